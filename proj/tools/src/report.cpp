#include "phpq_cli/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "phpq/error.hpp"

namespace phpq::cli {

void write_tsv(std::ostream& out, const Table& table) {
  if (!table.title.empty()) out << "# " << table.title << '\n';
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "\t" : "") << cells[i];
    out << '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
}

void write_markdown(std::ostream& out, const Table& table) {
  std::vector<std::size_t> width(table.header.size(), 3);
  for (std::size_t c = 0; c < table.header.size(); ++c) width[c] = std::max(width[c], table.header[c].size());
  for (const auto& row : table.rows)
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c)
      width[c] = std::max(width[c], row[c].size());

  auto line = [&](const std::vector<std::string>& cells) {
    out << '|';
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string& v = c < cells.size() ? cells[c] : std::string();
      out << ' ' << v << std::string(width[c] - v.size(), ' ') << " |";
    }
    out << '\n';
  };
  if (!table.title.empty()) out << "### " << table.title << "\n\n";
  line(table.header);
  out << '|';
  for (std::size_t w : width) out << std::string(w + 2, '-') << '|';
  out << '\n';
  for (const auto& row : table.rows) line(row);
  out << '\n';
}

void save_tables(const std::filesystem::path& stem, const std::vector<Table>& tables) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream tsv(stem.string() + ".tsv");
  std::ofstream md(stem.string() + ".md");
  if (!tsv || !md) throw InputError("cannot write report " + stem.string());
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (i) tsv << '\n';
    write_tsv(tsv, tables[i]);
    write_markdown(md, tables[i]);
  }
}

std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

}  // namespace phpq::cli
