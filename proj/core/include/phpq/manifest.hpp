#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "phpq/losses.hpp"
#include "phpq/pooling.hpp"
#include "phpq/retrieval.hpp"

namespace phpq {

enum class Split : std::uint8_t { train, query, database };

const char* to_string(Split s) noexcept;
Split parse_split(const std::string& name);

struct ManifestItem {
  ItemId id = 0;
  Label label = 0;
  Split split = Split::train;
  std::string path;  // relative to the manifest directory
  friend bool operator==(const ManifestItem&, const ManifestItem&) = default;
};

/// Dataset description. Text form, tab separated, one record per line:
///   phpq-manifest <version>
///   num_classes   <Nc>
///   stage_dims    <H2> <W2> <C2> <H3> <W3> <C3> <H4> <W4> <C4>
///   item          <id> <label> <split> <path>    (repeated)
/// Blank lines and lines starting with '#' are ignored.
struct DatasetManifest {
  std::size_t num_classes = 0;
  PyramidDims dims;
  std::vector<ManifestItem> items;

  /// Unique ids, labels in [0, Nc).
  void validate() const;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline constexpr std::uint32_t kManifestVersion = 1;

void write_manifest(std::ostream& out, const DatasetManifest& manifest);
DatasetManifest read_manifest(std::istream& in);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

enum class Protocol : std::uint8_t {
  manifest,  // use the recorded split field
  cub,       // per-class query fraction; database = training set
  dogs,      // fixed query count per class; database = training set
};

Protocol parse_protocol(const std::string& name);
const char* to_string(Protocol p) noexcept;

struct SplitProtocol {
  Protocol kind = Protocol::manifest;
  double query_fraction = 0.5;
  std::size_t query_per_class = 10;
  std::uint64_t seed = 0;
};

/// Positions into manifest.items.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> query;
  std::vector<std::size_t> database;
};

/// Throws ParamError naming the class when a class is too small for the
/// protocol.
DatasetSplit split_dataset(const DatasetManifest& manifest, const SplitProtocol& protocol);

}  // namespace phpq
