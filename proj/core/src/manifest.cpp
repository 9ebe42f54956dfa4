#include "phpq/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "phpq/error.hpp"

namespace phpq {

const char* to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::query: return "query";
    case Split::database: return "database";
  }
  return "unknown";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "query") return Split::query;
  if (name == "database") return Split::database;
  throw FormatError(FormatErrorCode::malformed, "unknown split '" + name + "'");
}

const char* to_string(Protocol p) noexcept {
  switch (p) {
    case Protocol::manifest: return "manifest";
    case Protocol::cub: return "cub";
    case Protocol::dogs: return "dogs";
  }
  return "unknown";
}

Protocol parse_protocol(const std::string& name) {
  if (name == "manifest") return Protocol::manifest;
  if (name == "cub") return Protocol::cub;
  if (name == "dogs") return Protocol::dogs;
  throw ParamError("unknown split protocol '" + name + "'");
}

void DatasetManifest::validate() const {
  if (num_classes == 0) throw InputError("manifest: num_classes must be positive");
  std::set<ItemId> seen;
  for (const auto& item : items) {
    if (!seen.insert(item.id).second) {
      throw InputError("manifest: duplicate item id " + std::to_string(item.id));
    }
    if (item.label < 0 || static_cast<std::size_t>(item.label) >= num_classes) {
      throw InputError("manifest: item " + std::to_string(item.id) + " has label " +
                       std::to_string(item.label) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
}

void write_manifest(std::ostream& out, const DatasetManifest& manifest) {
  manifest.validate();
  out << "phpq-manifest\t" << kManifestVersion << '\n';
  out << "num_classes\t" << manifest.num_classes << '\n';
  out << "stage_dims";
  for (const StageDims& s : {manifest.dims.stage2, manifest.dims.stage3, manifest.dims.stage4}) {
    out << '\t' << s.height << '\t' << s.width << '\t' << s.channels;
  }
  out << '\n';
  for (const auto& item : manifest.items) {
    out << "item\t" << item.id << '\t' << item.label << '\t' << to_string(item.split) << '\t'
        << item.path << '\n';
  }
  if (!out) throw FormatError(FormatErrorCode::io, "manifest write failed");
}

DatasetManifest read_manifest(std::istream& in) {
  DatasetManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  bool have_dims = false;
  auto fail = [&](const std::string& what) {
    throw FormatError(FormatErrorCode::malformed,
                      "manifest line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string key;
    std::getline(fields, key, '\t');
    if (!header) {
      std::uint32_t version = 0;
      if (key != "phpq-manifest" || !(fields >> version)) fail("missing phpq-manifest header");
      if (version != kManifestVersion) {
        throw FormatError(FormatErrorCode::bad_version,
                          "manifest version " + std::to_string(version) + " is not supported");
      }
      header = true;
    } else if (key == "num_classes") {
      if (!(fields >> manifest.num_classes)) fail("bad num_classes");
    } else if (key == "stage_dims") {
      for (StageDims* s : {&manifest.dims.stage2, &manifest.dims.stage3, &manifest.dims.stage4}) {
        if (!(fields >> s->height >> s->width >> s->channels)) fail("bad stage_dims");
      }
      have_dims = true;
    } else if (key == "item") {
      ManifestItem item;
      std::string id, label, split;
      if (!std::getline(fields, id, '\t') || !std::getline(fields, label, '\t') ||
          !std::getline(fields, split, '\t') || !std::getline(fields, item.path)) {
        fail("item record needs id, label, split, path");
      }
      try {
        item.id = std::stoll(id);
        item.label = std::stoi(label);
      } catch (const std::exception&) {
        fail("non-numeric id or label");
      }
      item.split = parse_split(split);
      manifest.items.push_back(std::move(item));
    } else {
      fail("unknown record type '" + key + "'");
    }
  }
  if (!header) throw FormatError(FormatErrorCode::truncated, "empty manifest");
  if (!have_dims) throw FormatError(FormatErrorCode::malformed, "manifest lacks stage_dims");
  try {
    manifest.validate();
  } catch (const InputError& e) {
    throw FormatError(FormatErrorCode::malformed, e.what());
  }
  return manifest;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatErrorCode::io, "cannot open " + path.string());
  write_manifest(out, manifest);
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatErrorCode::io, "cannot open " + path.string());
  return read_manifest(in);
}

DatasetSplit split_dataset(const DatasetManifest& manifest, const SplitProtocol& protocol) {
  manifest.validate();
  DatasetSplit out;
  if (protocol.kind == Protocol::manifest) {
    for (std::size_t i = 0; i < manifest.items.size(); ++i) {
      switch (manifest.items[i].split) {
        case Split::train:
          out.train.push_back(i);
          out.database.push_back(i);
          break;
        case Split::database: out.database.push_back(i); break;
        case Split::query: out.query.push_back(i); break;
      }
    }
    return out;
  }

  if (protocol.kind == Protocol::cub &&
      !(protocol.query_fraction > 0.0 && protocol.query_fraction < 1.0)) {
    throw ParamError("query fraction must lie in (0, 1)");
  }
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    by_class[manifest.items[i].label].push_back(i);
  }
  std::mt19937_64 rng(protocol.seed);
  for (auto& [label, members] : by_class) {
    std::size_t queries = 0;
    if (protocol.kind == Protocol::cub) {
      if (members.size() < 2) {
        throw ParamError("class " + std::to_string(label) +
                         " has fewer than 2 samples; cannot split into train and query");
      }
      queries = static_cast<std::size_t>(
          std::llround(protocol.query_fraction * static_cast<double>(members.size())));
      queries = std::clamp<std::size_t>(queries, 1, members.size() - 1);
    } else {
      if (members.size() <= protocol.query_per_class) {
        throw ParamError("class " + std::to_string(label) + " has " +
                         std::to_string(members.size()) + " samples; needs more than " +
                         std::to_string(protocol.query_per_class) + " to hold out queries");
      }
      queries = protocol.query_per_class;
    }
    std::shuffle(members.begin(), members.end(), rng);
    std::sort(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(queries));
    std::sort(members.begin() + static_cast<std::ptrdiff_t>(queries), members.end());
    out.query.insert(out.query.end(), members.begin(),
                     members.begin() + static_cast<std::ptrdiff_t>(queries));
    out.train.insert(out.train.end(), members.begin() + static_cast<std::ptrdiff_t>(queries),
                     members.end());
  }
  std::sort(out.query.begin(), out.query.end());
  std::sort(out.train.begin(), out.train.end());
  out.database = out.train;
  return out;
}

}  // namespace phpq
