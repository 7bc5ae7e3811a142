#include "gatefuse/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace gatefuse {

GradCheckResult grad_check(std::span<Parameter* const> params,
                           const std::function<double()>& loss_and_grad, double eps) {
  GradCheckResult result;
  zero_grads(params);
  const double base = loss_and_grad();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  if (loss_and_grad() != base) {
    result.valid = false;
    zero_grads(params);
    return result;
  }

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (p.frozen) continue;
    auto w = p.value.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + eps;
      const double plus = loss_and_grad();
      w[i] = saved - eps;
      const double minus = loss_and_grad();
      w[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[k].values()[i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
      result.max_relative_error = std::max(result.max_relative_error, err);
      ++result.coordinates;
    }
  }
  zero_grads(params);
  return result;
}

}  // namespace gatefuse
