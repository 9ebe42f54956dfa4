#include "phpq/feature_io.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "phpq/binary_io.hpp"
#include "phpq/error.hpp"

namespace phpq {

void write_feature_set(std::ostream& out, const FeatureMapSet& maps) {
  const PyramidDims dims = maps.dims();
  BinaryWriter w(out);
  w.write_magic({kFeatureMagic, 8});
  w.write<std::uint32_t>(kFeatureVersion);
  for (const StageDims& s : {dims.stage2, dims.stage3, dims.stage4}) {
    w.write<std::uint32_t>(static_cast<std::uint32_t>(s.height));
    w.write<std::uint32_t>(static_cast<std::uint32_t>(s.width));
    w.write<std::uint32_t>(static_cast<std::uint32_t>(s.channels));
  }
  for (const DenseArray* stage : {&maps.stage2, &maps.stage3, &maps.stage4}) {
    for (double v : stage->values()) w.write<float>(static_cast<float>(v));
  }
}

FeatureMapSet read_feature_set(std::istream& in, const std::optional<PyramidDims>& expected) {
  BinaryReader r(in, "feature file");
  r.expect_magic({kFeatureMagic, 8});
  const auto version = r.read<std::uint32_t>();
  if (version != kFeatureVersion) {
    throw FormatError(FormatErrorCode::bad_version,
                      "feature file version " + std::to_string(version) + " is not supported");
  }
  PyramidDims dims;
  for (StageDims* s : {&dims.stage2, &dims.stage3, &dims.stage4}) {
    s->height = r.read<std::uint32_t>();
    s->width = r.read<std::uint32_t>();
    s->channels = r.read<std::uint32_t>();
    if (s->size() == 0) throw FormatError(FormatErrorCode::malformed, "zero stage extent");
  }
  if (expected && !(dims == *expected)) {
    throw FormatError(FormatErrorCode::dim_mismatch,
                      "feature file stage extents disagree with the manifest");
  }

  FeatureMapSet maps;
  auto read_stage = [&](const StageDims& s) {
    DenseArray a({s.height, s.width, s.channels});
    for (double& v : a.values()) {
      const float f = r.read<float>();
      if (!std::isfinite(f)) {
        throw FormatError(FormatErrorCode::malformed, "non-finite activation");
      }
      if (f < 0.0f) {
        throw FormatError(FormatErrorCode::negative_value,
                          "negative activation violates the post-ReLU contract");
      }
      v = f;
    }
    return a;
  };
  maps.stage2 = read_stage(dims.stage2);
  maps.stage3 = read_stage(dims.stage3);
  maps.stage4 = read_stage(dims.stage4);
  return maps;
}

void save_feature_set(const std::filesystem::path& path, const FeatureMapSet& maps) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorCode::io, "cannot open " + path.string());
  write_feature_set(out, maps);
}

FeatureMapSet load_feature_set(const std::filesystem::path& path,
                               const std::optional<PyramidDims>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorCode::io, "cannot open " + path.string());
  return read_feature_set(in, expected);
}

}  // namespace phpq
