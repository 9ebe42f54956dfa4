#include "phpq/losses.hpp"

#include <cmath>
#include <map>

#include "phpq/error.hpp"

namespace phpq {

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ParamError("tau must be positive");
  if (m_plus < 0.0 || m_minus < 0.0) throw ParamError("margins must be >= 0");
  if (gamma < 0.0) throw ParamError("gamma must be >= 0");
}

LossValue sr_cel(const DenseArray& logits, std::span<const Label> labels, double tau) {
  if (!(tau > 0.0)) throw ParamError("sr_cel: tau must be positive");
  if (logits.rank() != 2) throw ShapeError("sr_cel: logits must be N x Nc");
  const std::size_t n = logits.extent(0);
  const std::size_t classes = logits.extent(1);
  if (labels.size() != n) throw ShapeError("sr_cel: one label per row required");

  LossValue out{0.0, DenseArray(logits.shape()), {}};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Label y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InputError("sr_cel: label " + std::to_string(y) + " out of range");
    }
    const auto row = logits.row(i);
    const Vec prob = softmax_scaled(row, 1.0 / tau);
    // -log p_y computed from the shifted logits to stay finite
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double log_sum = 0.0;
    for (double v : row) log_sum += std::exp((v - mx) / tau);
    out.value += (std::log(log_sum) - (row[static_cast<std::size_t>(y)] - mx) / tau) * inv_n;

    auto g = out.grad.row(i);
    for (std::size_t c = 0; c < classes; ++c) {
      const double target = static_cast<std::size_t>(y) == c ? 1.0 : 0.0;
      g[c] = (prob[c] - target) * inv_n / tau;
    }
  }
  return out;
}

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

// Adds w * d||a - b|| / da to ga and the negation to gb (zero at a == b).
void add_distance_grad(std::span<const double> a, std::span<const double> b, double w,
                       std::span<double> ga, std::span<double> gb) {
  const double dist = distance(a, b);
  if (dist == 0.0) return;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double g = w * (a[i] - b[i]) / dist;
    ga[i] += g;
    gb[i] -= g;
  }
}

}  // namespace

LossValue contrastive(const DenseArray& reconstructions, std::span<const Label> labels,
                      const LossConfig& config) {
  config.validate();
  if (reconstructions.rank() != 2) throw ShapeError("contrastive: embeddings must be N x D");
  const std::size_t n = reconstructions.extent(0);
  if (labels.size() != n) throw ShapeError("contrastive: one label per row required");
  if (n < 2) throw ParamError("contrastive: batch needs at least 2 samples");

  std::map<Label, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < n; ++i) classes[labels[i]].push_back(i);

  LossValue out{0.0, DenseArray(reconstructions.shape()), {}};
  if (classes.size() == 1) {
    out.warnings.push_back("contrastive: batch holds a single class; negative term skipped");
  }
  const double inv_classes = 1.0 / static_cast<double>(classes.size());

  for (const auto& [label, members] : classes) {
    const double size_c = static_cast<double>(members.size());
    double term = 0.0;

    if (members.size() >= 2) {
      const double norm = 1.0 / (size_c * size_c);
      double d_pos = 0.0;
      for (std::size_t a : members)
        for (std::size_t b : members)
          if (a != b) d_pos += distance(reconstructions.row(a), reconstructions.row(b));
      d_pos *= norm;
      if (d_pos - config.m_plus > 0.0) {
        term += d_pos - config.m_plus;
        // each unordered pair appears twice in the ordered sum
        for (std::size_t ia = 0; ia < members.size(); ++ia)
          for (std::size_t ib = ia + 1; ib < members.size(); ++ib)
            add_distance_grad(reconstructions.row(members[ia]), reconstructions.row(members[ib]),
                              2.0 * norm * inv_classes, out.grad.row(members[ia]),
                              out.grad.row(members[ib]));
      }
    }

    const std::size_t others = n - members.size();
    if (others > 0) {
      const double norm = 1.0 / (size_c * static_cast<double>(others));
      double d_neg = 0.0;
      for (std::size_t a : members)
        for (std::size_t b = 0; b < n; ++b)
          if (labels[b] != label) d_neg += distance(reconstructions.row(a), reconstructions.row(b));
      d_neg *= norm;
      if (config.m_minus - d_neg > 0.0) {
        term += config.m_minus - d_neg;
        for (std::size_t a : members)
          for (std::size_t b = 0; b < n; ++b)
            if (labels[b] != label)
              add_distance_grad(reconstructions.row(a), reconstructions.row(b),
                                -norm * inv_classes, out.grad.row(a), out.grad.row(b));
      }
    }
    out.value += term * inv_classes;
  }
  return out;
}

}  // namespace phpq
