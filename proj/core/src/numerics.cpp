#include "phpq/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "phpq/error.hpp"

namespace phpq {

const char* to_string(FormatErrorCode code) noexcept {
  switch (code) {
    case FormatErrorCode::io: return "io";
    case FormatErrorCode::bad_magic: return "bad_magic";
    case FormatErrorCode::bad_version: return "bad_version";
    case FormatErrorCode::truncated: return "truncated";
    case FormatErrorCode::dim_mismatch: return "dim_mismatch";
    case FormatErrorCode::negative_value: return "negative_value";
    case FormatErrorCode::malformed: return "malformed";
  }
  return "unknown";
}

std::size_t shape_product(const std::vector<std::size_t>& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>{});
}

DenseArray::DenseArray(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
  if (std::find(shape_.begin(), shape_.end(), 0u) != shape_.end()) {
    throw ShapeError("DenseArray extents must be positive");
  }
}

DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (std::find(shape_.begin(), shape_.end(), 0u) != shape_.end()) {
    throw ShapeError("DenseArray extents must be positive");
  }
  if (data_.size() != shape_product(shape_)) {
    throw ShapeError("DenseArray data length " + std::to_string(data_.size()) +
                     " does not match shape product " +
                     std::to_string(shape_product(shape_)));
  }
}

DenseArray DenseArray::from_vector(std::vector<double> values) {
  std::vector<std::size_t> shape{values.size()};
  return DenseArray(std::move(shape), std::move(values));
}

std::size_t DenseArray::extent(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range");
  return shape_[axis];
}

double& DenseArray::at(std::size_t i, std::size_t j) {
  return data_[i * shape_[1] + j];
}
double DenseArray::at(std::size_t i, std::size_t j) const {
  return data_[i * shape_[1] + j];
}
double& DenseArray::at(std::size_t i, std::size_t j, std::size_t k) {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}
double DenseArray::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

std::span<double> DenseArray::row(std::size_t i) {
  const std::size_t stride = data_.size() / shape_[0];
  return std::span<double>(data_).subspan(i * stride, stride);
}
std::span<const double> DenseArray::row(std::size_t i) const {
  const std::size_t stride = data_.size() / shape_[0];
  return std::span<const double>(data_).subspan(i * stride, stride);
}

void DenseArray::fill(double value) noexcept {
  std::fill(data_.begin(), data_.end(), value);
}

bool DenseArray::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

LinearLayer LinearLayer::zeros(std::size_t out, std::size_t in, bool has_bias) {
  return LinearLayer{DenseArray({out, in}), DenseArray({out}), has_bias};
}

LinearLayer LinearLayer::identity(std::size_t n, bool has_bias) {
  auto layer = zeros(n, n, has_bias);
  for (std::size_t i = 0; i < n; ++i) layer.weights.at(i, i) = 1.0;
  return layer;
}

LinearLayer LinearLayer::xavier(std::size_t out, std::size_t in, std::mt19937_64& rng,
                                bool has_bias) {
  auto layer = zeros(out, in, has_bias);
  fill_gaussian(layer.weights.values(), rng,
                std::sqrt(2.0 / static_cast<double>(in + out)));
  return layer;
}

void LinearLayer::validate() const {
  if (weights.rank() != 2) throw ShapeError("linear weights must be rank 2");
  if (bias.rank() != 1 || bias.size() != weights.extent(0)) {
    throw ShapeError("linear bias length must equal weight row count");
  }
}

Vec linear_forward(const LinearLayer& layer, std::span<const double> x) {
  const std::size_t out = layer.out_dim();
  const std::size_t in = layer.in_dim();
  if (x.size() != in) {
    throw ShapeError("linear_forward: input width " + std::to_string(x.size()) +
                     ", layer expects " + std::to_string(in));
  }
  Vec y(out, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    const auto w = layer.weights.row(o);
    double acc = layer.has_bias ? layer.bias[o] : 0.0;
    for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
  return y;
}

Vec linear_backward(const LinearLayer& layer, std::span<const double> x,
                    std::span<const double> upstream, LinearLayer& grad) {
  const std::size_t out = layer.out_dim();
  const std::size_t in = layer.in_dim();
  if (x.size() != in || upstream.size() != out) {
    throw ShapeError("linear_backward: shape mismatch");
  }
  if (grad.weights.shape() != layer.weights.shape()) {
    throw ShapeError("linear_backward: gradient buffer shape mismatch");
  }
  Vec dx(in, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    const double g = upstream[o];
    const auto w = layer.weights.row(o);
    auto gw = grad.weights.row(o);
    for (std::size_t i = 0; i < in; ++i) {
      gw[i] += g * x[i];
      dx[i] += w[i] * g;
    }
    if (layer.has_bias) grad.bias[o] += g;
  }
  return dx;
}

Vec softmax_scaled(std::span<const double> v, double scale) {
  if (v.empty()) throw ShapeError("softmax_scaled: empty input");
  if (!(scale > 0.0)) throw ParamError("softmax_scaled: scale must be positive");
  const double mx = *std::max_element(v.begin(), v.end());
  Vec out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(scale * (v[i] - mx));
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) noexcept { return std::sqrt(dot(v, v)); }

Vec l2_normalize(std::span<const double> v) {
  const double denom = std::max(l2_norm(v), kNormalizeEpsilon);
  Vec out(v.begin(), v.end());
  for (double& x : out) x /= denom;
  return out;
}

Vec l2_normalize_backward(std::span<const double> v, std::span<const double> upstream) {
  // y = v / max(n, e): dy/dv = I/n - v v^T / n^3 above the floor, I/e below it
  const double n = l2_norm(v);
  const double s = std::max(n, kNormalizeEpsilon);
  Vec out(upstream.begin(), upstream.end());
  for (double& x : out) x /= s;
  if (n > kNormalizeEpsilon) {
    const double coef = dot(v, upstream) / (n * n * n);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] -= coef * v[i];
  }
  return out;
}

void fill_gaussian(std::span<double> out, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& x : out) x = dist(rng);
}

}  // namespace phpq
