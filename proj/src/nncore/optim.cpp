#include "gatefuse/optim.hpp"

#include <cmath>

#include "gatefuse/errors.hpp"

namespace gatefuse {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

Optimizer::Optimizer(std::vector<Parameter*> params, OptimizerConfig config)
    : params_(std::move(params)), config_(config) {
  if (config_.kind == OptimizerKind::adam) {
    for (const Parameter* p : params_) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
}

void Optimizer::step(double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ParameterError("learning rate must be >= 0");
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (!p.frozen && lr > 0.0) {
      require_finite(p.grad, "optimizer gradient");
      auto w = p.value.values();
      const auto g = p.grad.values();
      if (config_.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
      } else {
        auto m = m_[k].values();
        auto v = v_[k].values();
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
          v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
          const double mhat = m[i] / bc1;
          const double vhat = v[i] / bc2;
          w[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
      }
    }
    p.zero_grad();
  }
}

}  // namespace gatefuse
