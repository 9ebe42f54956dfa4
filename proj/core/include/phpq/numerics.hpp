#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace phpq {

using Vec = std::vector<double>;

/// Row-major array of doubles with explicit shape metadata.
class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(std::vector<std::size_t> shape, double fill = 0.0);
  DenseArray(std::vector<std::size_t> shape, std::vector<double> data);

  static DenseArray from_vector(std::vector<double> values);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;
  double& at(std::size_t i, std::size_t j, std::size_t k);
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  /// Contiguous slice for a fixed leading index (rank >= 2).
  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;

  void fill(double value) noexcept;
  bool all_finite() const noexcept;

  friend bool operator==(const DenseArray&, const DenseArray&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape) noexcept;

/// Fully connected layer without activation: y = W x (+ b).
struct LinearLayer {
  DenseArray weights;  // out x in
  DenseArray bias;     // out
  bool has_bias = true;

  static LinearLayer zeros(std::size_t out, std::size_t in, bool has_bias = true);
  static LinearLayer identity(std::size_t n, bool has_bias = true);
  /// Gaussian weights with variance 2/(in+out), zero bias.
  static LinearLayer xavier(std::size_t out, std::size_t in, std::mt19937_64& rng,
                            bool has_bias = true);

  std::size_t in_dim() const { return weights.extent(1); }
  std::size_t out_dim() const { return weights.extent(0); }
  /// Throws ShapeError if weights and bias disagree.
  void validate() const;
};

Vec linear_forward(const LinearLayer& layer, std::span<const double> x);

/// Accumulates dL/dW and dL/db into `grad` (shaped like `layer`) and
/// returns dL/dx.
Vec linear_backward(const LinearLayer& layer, std::span<const double> x,
                    std::span<const double> upstream, LinearLayer& grad);

/// softmax(scale * v), evaluated with max subtraction.
Vec softmax_scaled(std::span<const double> v, double scale);

inline constexpr double kNormalizeEpsilon = 1e-12;

/// v / (||v||_2 + 1e-12).
Vec l2_normalize(std::span<const double> v);

/// Backward of l2_normalize at `v` for upstream gradient `upstream`.
Vec l2_normalize_backward(std::span<const double> v, std::span<const double> upstream);

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double l2_norm(std::span<const double> v) noexcept;

/// Fills with N(0, stddev^2) samples.
void fill_gaussian(std::span<double> out, std::mt19937_64& rng, double stddev = 1.0);

}  // namespace phpq
