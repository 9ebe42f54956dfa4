#include "phpq/optimizer.hpp"

#include <cmath>

#include "phpq/error.hpp"

namespace phpq {

AdamOptimizer::AdamOptimizer(AdamConfig config) : config_(config) {
  if (config_.learning_rate < 0.0) throw ParamError("learning rate must be >= 0");
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 ||
      config_.beta2 >= 1.0) {
    throw ParamError("moment decay rates must lie in [0, 1)");
  }
}

void AdamOptimizer::step(std::span<const ParamSlot> params) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
      m_.emplace_back(p.value->shape());
      v_.emplace_back(p.value->shape());
    }
  }
  if (params.size() != m_.size()) {
    throw ShapeError("optimizer_step: parameter count changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].grad->shape() != params[i].value->shape() ||
        params[i].value->shape() != m_[i].shape()) {
      throw ShapeError("optimizer_step: gradient shape does not mirror parameter " +
                       std::to_string(i));
    }
  }

  ++step_;
  const double t = static_cast<double>(step_);
  const double bias1 = 1.0 - std::pow(config_.beta1, t);
  const double bias2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].value->values();
    const auto grad = params[i].grad->values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j];
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      value[j] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

void AdamOptimizer::restore(std::uint64_t step, std::vector<DenseArray> first,
                            std::vector<DenseArray> second) {
  if (first.size() != second.size()) throw ShapeError("optimizer restore: moment count mismatch");
  step_ = step;
  m_ = std::move(first);
  v_ = std::move(second);
}

}  // namespace phpq
