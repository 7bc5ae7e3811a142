#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gatefuse/gradcheck.hpp"

namespace gatefuse {

struct NamedGradCheck {
  std::string name;
  GradCheckResult result;
};

// Finite-difference checks for every layer kind (parameters and inputs),
// both losses, the distillation objective, a full classifier, the gate, and
// the gated fusion objective with and without the stop-gradient. Dropout
// masks are fixed per check by re-seeding.
std::vector<NamedGradCheck> run_gradient_suite(std::uint64_t seed = 1, double eps = 1e-6);

}  // namespace gatefuse
