#pragma once

// Central-difference gradient checker. Every backward pass in the project is
// validated against this before it is trusted.

#include <cmath>
#include <cstddef>
#include <functional>

#include "cropnet/errors.hpp"
#include "cropnet/tensor.hpp"

namespace cropnet {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // analytic gradient at the worst index
  double numeric = 0.0;   // central-difference estimate at the worst index
};

/// Compares an analytic gradient of a scalar function against central
/// differences, elementwise. Relative error |a-n| / max(1e-8, |a|+|n|).
inline GradCheckResult finite_diff_grad_check(const std::function<double(const Tensor&)>& f,
                                              const Tensor& x, const Tensor& analytic_grad,
                                              double h) {
  if (h <= 0.0) throw DataError("finite_diff_grad_check: step h must be positive");
  if (!x.same_shape(analytic_grad)) {
    throw DataError("finite_diff_grad_check: gradient shape " +
                    shape_to_string(analytic_grad.shape) + " does not match input " +
                    shape_to_string(x.shape));
  }
  GradCheckResult result;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double orig = probe.values[i];
    probe.values[i] = orig + h;
    const double fp = f(probe);
    probe.values[i] = orig - h;
    const double fm = f(probe);
    probe.values[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw DataError("finite_diff_grad_check: non-finite function value at index " +
                      std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = analytic_grad.values[i];
    const double denom = std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel >= result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_index = i;
      result.analytic = analytic;
      result.numeric = numeric;
    }
  }
  return result;
}

}  // namespace cropnet
