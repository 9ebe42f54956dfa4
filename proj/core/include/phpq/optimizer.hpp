#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "phpq/numerics.hpp"

namespace phpq {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One trainable tensor and its gradient for the current step.
struct ParamSlot {
  DenseArray* value;
  const DenseArray* grad;
};

/// Adaptive-moment optimizer. Moment buffers are bound to parameters by
/// position: the same parameter list order must be passed on every step.
/// Not thread-safe.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig config = {});

  void step(std::span<const ParamSlot> params);

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t step_count() const noexcept { return step_; }

  const std::vector<DenseArray>& first_moments() const noexcept { return m_; }
  const std::vector<DenseArray>& second_moments() const noexcept { return v_; }
  /// Restores previously saved state (checkpoint resume).
  void restore(std::uint64_t step, std::vector<DenseArray> first,
               std::vector<DenseArray> second);

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<DenseArray> m_;
  std::vector<DenseArray> v_;
};

}  // namespace phpq
