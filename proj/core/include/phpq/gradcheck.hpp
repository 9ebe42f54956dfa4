#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace phpq {

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
};

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Compares `analytic` against central differences of `f` around `params`.
/// Per coordinate the error is |a - n| / (|a| + |n| + eps); the maximum is
/// returned. Throws NumericError if `f` returns a non-finite value.
GradientCheck finite_diff_check(const ScalarFunction& f, std::span<const double> params,
                                std::span<const double> analytic, double h = 1e-5,
                                double eps = 1e-6);

}  // namespace phpq
