#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "gatefuse/layers.hpp"

namespace gatefuse {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  // False when loss_fn gave different values for identical parameters.
  bool valid = true;
};

// Compares analytic gradients against central differences.
//
// `loss_and_grad` must run a full forward + backward pass and return the
// loss; gradients are expected to accumulate into the parameters' grad
// fields. It is called once (after zeroing grads) to collect the analytic
// gradient, once more to confirm it is deterministic, then twice per
// coordinate. Any randomness (dropout masks) must be re-seeded inside it.
//
// Error per coordinate: |a - n| / max(1, |a| + |n|). Frozen parameters are
// skipped. Grads are zeroed on return.
GradCheckResult grad_check(std::span<Parameter* const> params,
                           const std::function<double()>& loss_and_grad, double eps = 1e-6);

}  // namespace gatefuse
