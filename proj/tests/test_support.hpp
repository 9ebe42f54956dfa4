#pragma once

#include <random>
#include <span>
#include <vector>

#include "phpq/numerics.hpp"
#include "phpq/pooling.hpp"

namespace phpq::testing {

inline DenseArray random_map(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng,
                             double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  DenseArray a({h, w, c});
  for (double& v : a.values()) v = u(rng);
  return a;
}

inline LinearLayer random_layer(std::size_t out, std::size_t in, std::mt19937_64& rng) {
  LinearLayer l = LinearLayer::zeros(out, in);
  fill_gaussian(l.weights.values(), rng, 0.5);
  fill_gaussian(l.bias.values(), rng, 0.5);
  return l;
}

inline Vec random_vec(std::size_t n, std::mt19937_64& rng, double stddev = 1.0) {
  Vec v(n);
  fill_gaussian(v, rng, stddev);
  return v;
}

inline std::vector<double> flatten(const std::vector<const DenseArray*>& tensors) {
  std::vector<double> out;
  for (const auto* t : tensors) out.insert(out.end(), t->values().begin(), t->values().end());
  return out;
}

inline std::vector<double> flatten(const std::vector<DenseArray*>& tensors) {
  std::vector<double> out;
  for (const auto* t : tensors) out.insert(out.end(), t->values().begin(), t->values().end());
  return out;
}

inline void assign(const std::vector<DenseArray*>& tensors, std::span<const double> values) {
  std::size_t pos = 0;
  for (auto* t : tensors)
    for (double& v : t->values()) v = values[pos++];
}

}  // namespace phpq::testing
