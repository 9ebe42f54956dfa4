#include "phpq/gradcheck.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "phpq/error.hpp"

namespace phpq {

GradientCheck finite_diff_check(const ScalarFunction& f, std::span<const double> params,
                                std::span<const double> analytic, double h, double eps) {
  if (params.size() != analytic.size()) {
    throw ShapeError("finite_diff_check: analytic gradient length mismatch");
  }
  if (!(h > 0.0)) throw ParamError("finite_diff_check: step must be positive");

  std::vector<double> x(params.begin(), params.end());
  auto eval = [&](std::size_t coord) {
    const double value = f(x);
    if (!std::isfinite(value)) {
      throw NumericError("finite_diff_check: non-finite function value at coordinate " +
                         std::to_string(coord));
    }
    return value;
  };

  GradientCheck result;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = x[i];
    x[i] = original + h;
    const double plus = eval(i);
    x[i] = original - h;
    const double minus = eval(i);
    x[i] = original;

    const double numeric = (plus - minus) / (2.0 * h);
    const double err =
        std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + std::abs(numeric) + eps);
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_coordinate = i;
    }
  }
  return result;
}

}  // namespace phpq
