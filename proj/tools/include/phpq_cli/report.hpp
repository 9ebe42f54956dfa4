#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace phpq::cli {

struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_tsv(std::ostream& out, const Table& table);
void write_markdown(std::ostream& out, const Table& table);

/// Writes `<stem>.tsv` and `<stem>.md` holding every table in order.
void save_tables(const std::filesystem::path& stem, const std::vector<Table>& tables);

/// Fixed four-decimal rendering used in every report.
std::string format_metric(double value);

}  // namespace phpq::cli
