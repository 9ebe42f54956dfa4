#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "phpq/numerics.hpp"

namespace phpq {

using Label = std::int32_t;

struct LossConfig {
  double tau = 0.5;       // SR-CEL temperature
  double m_plus = 0.0;    // positive margin
  double m_minus = 1.0;   // negative margin
  double gamma = 1.0;     // contrastive weight

  void validate() const;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct LossValue {
  double value = 0.0;
  DenseArray grad;                    // same shape as the loss input
  std::vector<std::string> warnings;
};

/// Mean over the batch of -log softmax(logits / tau)[label]; gradient is with
/// respect to the N x Nc logits.
LossValue sr_cel(const DenseArray& logits, std::span<const Label> labels, double tau);

/// Batch contrastive loss over reconstructions (N x D). For every class c in
/// the batch:
///   d+ = 1/|Bc|^2 * sum over ordered pairs (i != j) in Bc of ||zi - zj||
///   d- = 1/(|Bc| (N - |Bc|)) * sum over i in Bc, j not in Bc of ||zi - zj||
///   l_c = max(d+ - m+, 0) + max(m- - d-, 0)
/// and the loss is the mean of l_c over classes present. Classes with one
/// sample have no d+ term; a batch with one class has no d- term (warned).
LossValue contrastive(const DenseArray& reconstructions, std::span<const Label> labels,
                      const LossConfig& config);

inline double total_loss(double sr_cel_value, double contrastive_value, double gamma) {
  return sr_cel_value + gamma * contrastive_value;
}

}  // namespace phpq
