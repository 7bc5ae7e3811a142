#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gatefuse/layers.hpp"

namespace gatefuse {

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Owns per-parameter state (Adam moments) for a fixed parameter list.
// step() applies the update in place, skips frozen parameters and zeroes
// every gradient afterwards.
class Optimizer {
 public:
  Optimizer(std::vector<Parameter*> params, OptimizerConfig config = {});

  // lr == 0 leaves parameters untouched; lr < 0 is rejected.
  void step(double lr);

  std::size_t steps_taken() const noexcept { return t_; }
  const OptimizerConfig& config() const noexcept { return config_; }

 private:
  std::vector<Parameter*> params_;
  OptimizerConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

}  // namespace gatefuse
