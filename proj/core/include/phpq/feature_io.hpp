#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "phpq/pooling.hpp"

namespace phpq {

inline constexpr char kFeatureMagic[] = "PHPQFEAT";
inline constexpr std::uint32_t kFeatureVersion = 1;

/// Feature file layout (little-endian):
///   magic "PHPQFEAT", u32 version
///   3 stage headers: u32 H, u32 W, u32 C (stage2, stage3, stage4)
///   f32 payloads in the same stage order, each H x W x C row-major
/// Labels live in the manifest, not in the feature file.
void write_feature_set(std::ostream& out, const FeatureMapSet& maps);

/// Rejects bad magic/version, truncation, stage extents that differ from
/// `expected`, and negative activations, each with its own FormatErrorCode.
FeatureMapSet read_feature_set(std::istream& in,
                               const std::optional<PyramidDims>& expected = std::nullopt);

void save_feature_set(const std::filesystem::path& path, const FeatureMapSet& maps);
FeatureMapSet load_feature_set(const std::filesystem::path& path,
                               const std::optional<PyramidDims>& expected = std::nullopt);

}  // namespace phpq
