#include "phpq/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "phpq/error.hpp"

namespace phpq {
namespace {

StageDims dims_of(const DenseArray& map) {
  if (map.rank() != 3) throw ShapeError("feature map must be rank 3 (H x W x C)");
  return {map.extent(0), map.extent(1), map.extent(2)};
}

void check_rho(double rho) {
  if (!(rho >= 1.0)) {
    throw ParamError("GSP focus factor must be >= 1, got " + std::to_string(rho));
  }
}

void check_nonnegative(const DenseArray& map) {
  for (double v : map.values()) {
    if (!(v >= 0.0)) throw InputError("feature map entries must be finite and >= 0");
  }
}

}  // namespace

PyramidDims FeatureMapSet::dims() const {
  return {dims_of(stage2), dims_of(stage3), dims_of(stage4)};
}

void FeatureMapSet::validate() const {
  (void)dims();
  check_nonnegative(stage2);
  check_nonnegative(stage3);
  check_nonnegative(stage4);
}

void FocusFactors::validate() const {
  check_rho(rho_s2);
  check_rho(rho_s3);
  check_rho(rho_s4);
}

namespace {

// x^rho with the common integer focus factors spelled out.
double power(double x, double rho) {
  if (rho == 2.0) return x * x;
  if (rho == 3.0) return x * x * x;
  return std::pow(x, rho);
}

}  // namespace

Vec gsp_pool(const DenseArray& map, double rho) {
  const StageDims d = dims_of(map);
  check_rho(rho);
  check_nonnegative(map);

  const std::size_t hw = d.spatial();
  const std::size_t c = d.channels;
  const double inv_hw = 1.0 / static_cast<double>(hw);
  const auto v = map.values();
  Vec out(c, 0.0);

  if (rho == 1.0) {
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t ch = 0; ch < c; ++ch) out[ch] += v[p * c + ch];
    for (double& x : out) x *= inv_hw;
    return out;
  }

  Vec peak(c, 0.0);
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t ch = 0; ch < c; ++ch) peak[ch] = std::max(peak[ch], v[p * c + ch]);

  if (std::isinf(rho)) {
    for (std::size_t ch = 0; ch < c; ++ch) out[ch] = peak[ch] * inv_hw;
    return out;
  }

  // (sum F^rho)^(1/rho) evaluated as peak * (sum (F/peak)^rho)^(1/rho).
  Vec inv_peak(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) inv_peak[ch] = peak[ch] > 0.0 ? 1.0 / peak[ch] : 0.0;
  Vec sum(c, 0.0);
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t ch = 0; ch < c; ++ch) sum[ch] += power(v[p * c + ch] * inv_peak[ch], rho);
  for (std::size_t ch = 0; ch < c; ++ch) {
    out[ch] = peak[ch] > 0.0 ? peak[ch] * std::pow(sum[ch], 1.0 / rho) * inv_hw : 0.0;
  }
  return out;
}

DenseArray gsp_grad(const DenseArray& map, double rho) {
  const StageDims d = dims_of(map);
  check_rho(rho);
  check_nonnegative(map);

  const std::size_t hw = d.spatial();
  const std::size_t c = d.channels;
  const double inv_hw = 1.0 / static_cast<double>(hw);
  const auto v = map.values();
  DenseArray grad(map.shape(), 0.0);
  auto g = grad.values();

  if (rho == 1.0) {
    grad.fill(inv_hw);
    return grad;
  }

  if (std::isinf(rho)) {
    // Subgradient at the first maximal position.
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::size_t best = 0;
      for (std::size_t p = 1; p < hw; ++p)
        if (v[p * c + ch] > v[best * c + ch]) best = p;
      g[best * c + ch] = inv_hw;
    }
    return grad;
  }

  // (1/HW) * S^(1/rho - 1) * F^(rho - 1) == (1/HW) * (F / S^(1/rho))^(rho - 1),
  // with S floored at kPoolEpsilon.
  const Vec pooled = gsp_pool(map, rho);
  const double norm_floor = std::pow(kPoolEpsilon, 1.0 / rho);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double norm = std::max(pooled[ch] * static_cast<double>(hw), norm_floor);
    for (std::size_t p = 0; p < hw; ++p) {
      g[p * c + ch] = inv_hw * power(v[p * c + ch] / norm, rho - 1.0);
    }
  }
  return grad;
}

PhpParams PhpParams::init(const PyramidDims& dims, std::size_t embedding_dim,
                          std::mt19937_64& rng) {
  PhpParams p;
  p.fc1 = LinearLayer::xavier(dims.stage3.channels, dims.stage2.channels, rng);
  p.fc2 = LinearLayer::xavier(dims.stage4.channels, dims.stage3.channels, rng);
  p.transform_g = LinearLayer::xavier(embedding_dim, dims.stage4.channels, rng);
  return p;
}

PhpParams PhpParams::zeros_like() const {
  return {LinearLayer::zeros(fc1.out_dim(), fc1.in_dim(), fc1.has_bias),
          LinearLayer::zeros(fc2.out_dim(), fc2.in_dim(), fc2.has_bias),
          LinearLayer::zeros(transform_g.out_dim(), transform_g.in_dim(),
                             transform_g.has_bias)};
}

void PhpParams::validate(const PyramidDims& dims) const {
  fc1.validate();
  fc2.validate();
  transform_g.validate();
  if (fc1.in_dim() != dims.stage2.channels || fc1.out_dim() != dims.stage3.channels ||
      fc2.in_dim() != dims.stage3.channels || fc2.out_dim() != dims.stage4.channels ||
      transform_g.in_dim() != dims.stage4.channels) {
    throw ShapeError("PHP layer dimensions do not compose with the stage channel counts");
  }
}

PyramidDescriptors pool_pyramid(const FeatureMapSet& maps, const FocusFactors& rhos) {
  return {gsp_pool(maps.stage2, rhos.rho_s2), gsp_pool(maps.stage3, rhos.rho_s3),
          gsp_pool(maps.stage4, rhos.rho_s4)};
}

PhpForward php_forward(const PyramidDescriptors& descriptors, const PhpParams& params,
                       FusionMode mode) {
  PhpForward fwd;
  fwd.mode = mode;
  fwd.descriptors = descriptors;
  if (mode == FusionMode::last_stage_only) {
    fwd.h4 = descriptors.f4;
  } else {
    if (descriptors.f3.size() != params.fc1.out_dim() ||
        descriptors.f4.size() != params.fc2.out_dim()) {
      throw ShapeError("php_fuse: pooled descriptor widths do not match the FC chain");
    }
    fwd.h2 = linear_forward(params.fc1, descriptors.f2);
    fwd.h3_in = fwd.h2;
    for (std::size_t i = 0; i < fwd.h3_in.size(); ++i) fwd.h3_in[i] += descriptors.f3[i];
    fwd.h4 = linear_forward(params.fc2, fwd.h3_in);
    for (std::size_t i = 0; i < fwd.h4.size(); ++i) fwd.h4[i] += descriptors.f4[i];
  }
  fwd.z = linear_forward(params.transform_g, fwd.h4);
  fwd.valid = true;
  return fwd;
}

Vec php_fuse(const FeatureMapSet& maps, const FocusFactors& rhos, const PhpParams& params,
             FusionMode mode) {
  return php_forward(pool_pyramid(maps, rhos), params, mode).z;
}

void php_backward_accumulate(const PhpForward& cache, const PhpParams& params,
                             std::span<const double> upstream, PhpParams& grads) {
  if (!cache.valid) throw StateError("php_backward: no forward cache");
  if (upstream.size() != cache.z.size()) throw ShapeError("php_backward: upstream width");

  const Vec d_h4 = linear_backward(params.transform_g, cache.h4, upstream, grads.transform_g);
  if (cache.mode == FusionMode::last_stage_only) return;
  const Vec d_h3_in = linear_backward(params.fc2, cache.h3_in, d_h4, grads.fc2);
  (void)linear_backward(params.fc1, cache.descriptors.f2, d_h3_in, grads.fc1);
}

PhpParams php_backward(const PhpForward& cache, const PhpParams& params,
                       std::span<const double> upstream) {
  PhpParams grads = params.zeros_like();
  php_backward_accumulate(cache, params, upstream, grads);
  return grads;
}

}  // namespace phpq
