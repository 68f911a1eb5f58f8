#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>

#include "arst/numerics.hpp"

namespace arst {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

// loss(true) must zero the grads, evaluate the loss and accumulate analytic
// grads into every parameter; loss(false) only evaluates.
using LossWithGrad = std::function<double(bool with_grad)>;

// Compares analytic grads against central differences
// (L(theta + h) - L(theta - h)) / 2h over every parameter entry. The error of
// one entry is |a - n| / max(1, |a|, |n|).
inline GradCheckResult check_gradients(const LossWithGrad& loss,
                                       std::span<Parameter<double>* const> params, double h) {
  if (!(h >= 1e-6 && h <= 1e-4)) {
    throw std::invalid_argument("check_gradients: step " + std::to_string(h) +
                                " outside [1e-6, 1e-4]");
  }
  const double base = loss(true);
  if (!std::isfinite(base)) throw NumericError("check_gradients: non-finite loss");

  GradCheckResult result;
  for (Parameter<double>* p : params) {
    const Matrix<double> analytic = p->grad;
    auto& values = p->value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss(false);
      values[i] = saved - h;
      const double down = loss(false);
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("check_gradients: non-finite loss while perturbing " + p->name);
      }
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.data()[i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err > result.max_rel_error || result.entries_checked == 0) {
        result.max_rel_error = err;
        result.worst_parameter = p->name;
        result.worst_index = i;
      }
      ++result.entries_checked;
    }
  }
  return result;
}

}  // namespace arst
