#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dsvdae/parameters.hpp"

namespace dsvdae {

/// Evaluates the loss at the current parameter values. When `with_gradient` is
/// true it must also overwrite the gradient buffers of `params`.
using LossFunction = std::function<double(ParameterStore& params, bool with_gradient)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares analytic gradients with central differences for every entry of every
/// active parameter. Relative error is |a - n| / max(1e-8, |a| + |n|).
inline GradCheckReport grad_check(const LossFunction& loss_fn, ParameterStore& params, double h = 1e-5) {
  require(h > 0.0, "grad_check: step must be positive");
  const double base = loss_fn(params, true);
  if (!std::isfinite(base)) throw NumericalError("grad_check: non-finite loss at base point");

  std::vector<Tensor2> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad);

  GradCheckReport report;
  std::size_t index = 0;
  for (auto& p : params) {
    const Tensor2& a = analytic[index++];
    if (!p.active) continue;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double saved = p.value.data()[i];
      p.value.data()[i] = saved + h;
      const double plus = loss_fn(params, false);
      p.value.data()[i] = saved - h;
      const double minus = loss_fn(params, false);
      p.value.data()[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericalError("grad_check: non-finite loss while perturbing " + p.name);
      }
      const double numeric = (plus - minus) / (2.0 * h);
      const double an = a.data()[i];
      const double err = std::abs(an - numeric) / std::max(1e-8, std::abs(an) + std::abs(numeric));
      ++report.entries_checked;
      if (err > report.max_relative_error || report.worst_index < 0) {
        report.max_relative_error = std::max(report.max_relative_error, err);
        if (err >= report.max_relative_error) {
          report.worst_parameter = p.name;
          report.worst_index = i;
          report.worst_analytic = an;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  // restore gradient buffers to the analytic values at the base point
  index = 0;
  for (auto& p : params) p.grad = analytic[index++];
  return report;
}

}  // namespace dsvdae
