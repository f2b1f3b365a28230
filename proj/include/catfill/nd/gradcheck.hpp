#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "catfill/error.hpp"
#include "catfill/nd/tensor.hpp"

namespace catfill::nd {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  std::vector<double> per_tensor;  // max error within each tensor
};

/// |a - n| / max(1e-8, |a| + |n|)
inline double gradient_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

/// Compares analytic gradients against central differences, coordinate by
/// coordinate. `loss` is re-evaluated after each in-place perturbation of
/// `params`; every coordinate is restored exactly afterwards.
template <class LossFn>
GradCheckResult finite_diff_check(std::span<Tensor* const> params, LossFn&& loss,
                                  std::span<const Tensor> analytic, double step = 1e-5) {
  if (params.size() != analytic.size())
    throw ContractError("finite_diff_check: parameter and gradient counts differ");
  GradCheckResult result;
  result.per_tensor.assign(params.size(), 0.0);
  auto eval = [&]() {
    const double j = loss();
    if (!std::isfinite(j)) throw NumericError("finite_diff_check: loss is not finite");
    return j;
  };
  eval();
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(analytic[k]))
      throw ShapeError("finite_diff_check: gradient shape mismatch at tensor " +
                       std::to_string(k));
    auto x = params[k]->values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + step;
      const double up = eval();
      x[i] = saved - step;
      const double down = eval();
      x[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = gradient_rel_error(analytic[k][i], numeric);
      result.per_tensor[k] = std::max(result.per_tensor[k], err);
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_tensor = k;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace catfill::nd
