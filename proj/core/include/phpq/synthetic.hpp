#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "phpq/manifest.hpp"
#include "phpq/pooling.hpp"

namespace phpq {

/// Fine-grained stand-in dataset. Subclasses are grouped into meta-classes.
/// Each stage2 map carries a small square "part" patch at a random position
/// whose channel signature identifies the subclass; subclasses of one
/// meta-class share half of their signature channels. Stage4 carries only
/// the meta-class signature, spread over the whole map. Everything else is
/// rectified Gaussian noise plus a few single-pixel clutter spikes.
struct SyntheticSpec {
  std::size_t meta_classes = 4;
  std::size_t subclasses_per_meta = 5;
  std::size_t samples_per_class = 60;
  PyramidDims dims;
  std::size_t patch_size = 3;
  double part_strength = 10.0;
  double meta_strength = 0.5;
  double noise = 0.3;
  std::size_t clutter_spikes = 3;
  double clutter_strength = 3.0;
  double query_fraction = 0.5;  // recorded as the manifest split
  std::uint64_t seed = 7;

  std::size_t num_classes() const noexcept { return meta_classes * subclasses_per_meta; }
  /// Throws ParamError naming the offending field.
  void validate() const;
};

struct SyntheticDataset {
  DatasetManifest manifest;            // paths are filled by write_dataset
  std::vector<FeatureMapSet> samples;  // aligned with manifest.items
  std::vector<Vec> subclass_signatures;  // per class, stage2 channel signature
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Writes `<dir>/manifest.tsv` and `<dir>/features/<id>.phpqf`; returns the
/// manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, SyntheticDataset& dataset);

/// Loads every feature file referenced by `manifest` (paths relative to
/// `root`), checking extents against the manifest.
std::vector<FeatureMapSet> load_samples(const DatasetManifest& manifest,
                                        const std::filesystem::path& root);

}  // namespace phpq
