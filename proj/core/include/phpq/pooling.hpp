#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>

#include "phpq/numerics.hpp"

namespace phpq {

struct StageDims {
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;

  std::size_t spatial() const noexcept { return height * width; }
  std::size_t size() const noexcept { return height * width * channels; }
  friend bool operator==(const StageDims&, const StageDims&) = default;
};

/// Extents of the three backbone stages (H x W x C each).
struct PyramidDims {
  StageDims stage2{16, 16, 32};
  StageDims stage3{8, 8, 64};
  StageDims stage4{4, 4, 128};
  friend bool operator==(const PyramidDims&, const PyramidDims&) = default;
};

/// Three-stage post-ReLU activation pyramid for one sample.
struct FeatureMapSet {
  DenseArray stage2;  // H x W x C
  DenseArray stage3;
  DenseArray stage4;
  std::optional<std::int32_t> label;

  PyramidDims dims() const;
  /// Throws ShapeError on bad ranks and InputError on negative entries.
  void validate() const;
};

inline constexpr double kMaxPoolRho = std::numeric_limits<double>::infinity();

/// Per-stage GSP focus factors. Infinity selects exact max pooling.
struct FocusFactors {
  double rho_s2 = 3.0;
  double rho_s3 = 2.0;
  double rho_s4 = 1.0;

  static FocusFactors average() { return {1.0, 1.0, 1.0}; }
  static FocusFactors max() { return {kMaxPoolRho, kMaxPoolRho, kMaxPoolRho}; }
  static FocusFactors ascending() { return {1.0, 2.0, 3.0}; }

  bool is_descending() const noexcept { return rho_s2 >= rho_s3 && rho_s3 >= rho_s4; }
  void validate() const;
  friend bool operator==(const FocusFactors&, const FocusFactors&) = default;
};

enum class FusionMode : std::uint8_t {
  pyramid,          // full stage2 -> stage3 -> stage4 chain
  last_stage_only,  // z = g(GSP(stage4))
};

/// Guard on the power sum inside the GSP gradient for all-zero channels.
inline constexpr double kPoolEpsilon = 1e-6;

/// Generalized spatial pooling of an H x W x C map, one value per channel:
/// a_c = (1/HW) * (sum_hw F_hwc^rho)^(1/rho).
Vec gsp_pool(const DenseArray& map, double rho);

/// d a_c / d F_hwc, shaped H x W x C (cross-channel terms are zero).
DenseArray gsp_grad(const DenseArray& map, double rho);

/// fc1: C2 -> C3, fc2: C3 -> C4, transform_g: C4 -> D.
struct PhpParams {
  LinearLayer fc1;
  LinearLayer fc2;
  LinearLayer transform_g;

  static PhpParams init(const PyramidDims& dims, std::size_t embedding_dim,
                        std::mt19937_64& rng);
  PhpParams zeros_like() const;
  std::size_t embedding_dim() const { return transform_g.out_dim(); }
  void validate(const PyramidDims& dims) const;
};

struct PyramidDescriptors {
  Vec f2;
  Vec f3;
  Vec f4;
};

PyramidDescriptors pool_pyramid(const FeatureMapSet& maps, const FocusFactors& rhos);

/// Forward activations of the fusion chain, kept for the reverse pass.
struct PhpForward {
  bool valid = false;
  FusionMode mode = FusionMode::pyramid;
  PyramidDescriptors descriptors;
  Vec h2;     // fc1(f2)
  Vec h3_in;  // h2 + f3
  Vec h4;     // fc2(h3_in) + f4
  Vec z;
};

PhpForward php_forward(const PyramidDescriptors& descriptors, const PhpParams& params,
                       FusionMode mode = FusionMode::pyramid);

/// Embedding z for one sample.
Vec php_fuse(const FeatureMapSet& maps, const FocusFactors& rhos, const PhpParams& params,
             FusionMode mode = FusionMode::pyramid);

/// Adds dL/d(fc1, fc2, g) for upstream dL/dz into `grads`. Pooled
/// descriptors are constants (the backbone is frozen).
void php_backward_accumulate(const PhpForward& cache, const PhpParams& params,
                             std::span<const double> upstream, PhpParams& grads);

PhpParams php_backward(const PhpForward& cache, const PhpParams& params,
                       std::span<const double> upstream);

}  // namespace phpq
