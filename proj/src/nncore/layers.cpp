#include "gatefuse/layers.hpp"

#include <cmath>

#include "gatefuse/errors.hpp"
#include "gatefuse/kernels.hpp"

namespace gatefuse {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::linear: return "linear";
    case LayerKind::relu: return "relu";
    case LayerKind::tanh: return "tanh";
    case LayerKind::dropout: return "dropout";
    case LayerKind::layer_norm: return "layer_norm";
    case LayerKind::sigmoid: return "sigmoid";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& s) {
  for (LayerKind k : {LayerKind::linear, LayerKind::relu, LayerKind::tanh, LayerKind::dropout,
                      LayerKind::layer_norm, LayerKind::sigmoid})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown layer kind '" + s + "'");
}

LayerSpec LayerSpec::linear(std::size_t in, std::size_t out, double init_scale) {
  LayerSpec s{LayerKind::linear};
  s.in = in;
  s.out = out;
  s.init_scale = init_scale;
  return s;
}

LayerSpec LayerSpec::dropout(double p) {
  LayerSpec s{LayerKind::dropout};
  s.p = p;
  return s;
}

LayerSpec LayerSpec::layer_norm(std::size_t dim, double eps) {
  LayerSpec s{LayerKind::layer_norm};
  s.in = dim;
  s.out = dim;
  s.eps = eps;
  return s;
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::linear:
      if (in == 0 || out == 0) throw ConfigError("linear layer needs nonzero in/out widths");
      break;
    case LayerKind::dropout:
      if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout p must be in [0,1)");
      break;
    case LayerKind::layer_norm:
      if (in == 0) throw ConfigError("layer_norm needs a nonzero width");
      if (!(eps > 0.0)) throw ConfigError("layer_norm eps must be > 0");
      break;
    default: break;
  }
}

Layer::Layer(LayerSpec spec, Rng& init_rng) : spec_(spec) {
  spec_.validate();
  if (spec_.kind == LayerKind::linear) {
    const double bound =
        spec_.init_scale * std::sqrt(6.0 / static_cast<double>(spec_.in + spec_.out));
    Tensor w(spec_.in, spec_.out);
    for (double& v : w.values()) v = init_rng.uniform(-bound, bound);
    params_.emplace_back(std::move(w));
    params_.emplace_back(Tensor(1, spec_.out));
  } else if (spec_.kind == LayerKind::layer_norm) {
    params_.emplace_back(Tensor(1, spec_.in, 1.0));
    params_.emplace_back(Tensor(1, spec_.in, 0.0));
  }
}

std::size_t Layer::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

namespace {

void require_width(const Tensor& x, std::size_t width, const LayerSpec& spec) {
  if (x.cols() != width)
    throw DimensionError(to_string(spec.kind) + " layer expects " + std::to_string(width) +
                         " input columns, got " + x.shape_string());
}

}  // namespace

Tensor layer_forward(const Layer& layer, const Tensor& x, Mode mode, Rng* dropout_rng,
                     Tape& tape) {
  const LayerSpec& spec = layer.spec();
  require_finite(x, "layer_forward input");
  tape = Tape{};
  tape.mode = mode;
  tape.input = x;
  Tensor y;
  switch (spec.kind) {
    case LayerKind::linear: {
      require_width(x, spec.in, spec);
      y = matmul(x, layer.params()[0].value);
      const auto bias = layer.params()[1].value.row(0);
      for (std::size_t i = 0; i < y.rows(); ++i) kernels::axpy(1.0, bias, y.row(i));
      break;
    }
    case LayerKind::relu:
      y = x;
      for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
      break;
    case LayerKind::tanh:
      y = x;
      for (double& v : y.values()) v = std::tanh(v);
      break;
    case LayerKind::sigmoid:
      y = x;
      for (double& v : y.values()) v = 1.0 / (1.0 + std::exp(-v));
      break;
    case LayerKind::dropout: {
      if (mode == Mode::eval || spec.p == 0.0) {
        y = x;
        break;
      }
      if (dropout_rng == nullptr) throw ContractViolation("dropout in train mode needs an rng");
      const double keep_scale = 1.0 / (1.0 - spec.p);
      tape.mask = Tensor(x.rows(), x.cols());
      for (double& m : tape.mask.values()) m = dropout_rng->uniform() < spec.p ? 0.0 : keep_scale;
      y = x;
      for (std::size_t i = 0; i < y.size(); ++i) y.values()[i] *= tape.mask.values()[i];
      break;
    }
    case LayerKind::layer_norm: {
      require_width(x, spec.in, spec);
      const auto gamma = layer.params()[0].value.row(0);
      const auto beta = layer.params()[1].value.row(0);
      const std::size_t n = x.cols();
      y = Tensor(x.rows(), n);
      tape.normalized = Tensor(x.rows(), n);
      tape.inv_std.resize(x.rows());
      for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto xr = x.row(i);
        double mean = 0.0;
        for (double v : xr) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : xr) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double inv_std = 1.0 / std::sqrt(var + spec.eps);
        tape.inv_std[i] = inv_std;
        auto xh = tape.normalized.row(i);
        auto yr = y.row(i);
        for (std::size_t j = 0; j < n; ++j) {
          xh[j] = (xr[j] - mean) * inv_std;
          yr[j] = gamma[j] * xh[j] + beta[j];
        }
      }
      break;
    }
  }
  tape.output = y;
  tape.valid = true;
  return y;
}

Tensor layer_backward(Layer& layer, const Tape& tape, const Tensor& upstream) {
  if (!tape.valid) throw ContractViolation("layer_backward called without a forward tape");
  const LayerSpec& spec = layer.spec();
  require_same_shape(upstream, tape.output, "layer_backward upstream");
  Tensor dx;
  switch (spec.kind) {
    case LayerKind::linear: {
      auto& w = layer.params()[0];
      auto& b = layer.params()[1];
      if (!w.frozen) {
        const Tensor dw = matmul_tn(tape.input, upstream);
        kernels::axpy(1.0, dw.values(), w.grad.values());
      }
      if (!b.frozen) {
        auto gb = b.grad.row(0);
        for (std::size_t i = 0; i < upstream.rows(); ++i) kernels::axpy(1.0, upstream.row(i), gb);
      }
      dx = matmul_nt(upstream, w.value);
      break;
    }
    case LayerKind::relu:
      dx = upstream;
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(tape.input.values()[i] > 0.0)) dx.values()[i] = 0.0;
      break;
    case LayerKind::tanh:
      dx = upstream;
      for (std::size_t i = 0; i < dx.size(); ++i) {
        const double t = tape.output.values()[i];
        dx.values()[i] *= 1.0 - t * t;
      }
      break;
    case LayerKind::sigmoid:
      dx = upstream;
      for (std::size_t i = 0; i < dx.size(); ++i) {
        const double s = tape.output.values()[i];
        dx.values()[i] *= s * (1.0 - s);
      }
      break;
    case LayerKind::dropout:
      dx = upstream;
      if (!tape.mask.empty())
        for (std::size_t i = 0; i < dx.size(); ++i) dx.values()[i] *= tape.mask.values()[i];
      break;
    case LayerKind::layer_norm: {
      auto& gamma = layer.params()[0];
      auto& beta = layer.params()[1];
      const std::size_t n = upstream.cols();
      dx = Tensor(upstream.rows(), n);
      std::vector<double> dxh(n);
      for (std::size_t i = 0; i < upstream.rows(); ++i) {
        const auto dy = upstream.row(i);
        const auto xh = tape.normalized.row(i);
        if (!gamma.frozen)
          for (std::size_t j = 0; j < n; ++j) gamma.grad(0, j) += dy[j] * xh[j];
        if (!beta.frozen)
          for (std::size_t j = 0; j < n; ++j) beta.grad(0, j) += dy[j];
        double sum_dxh = 0.0;
        double sum_dxh_xh = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          dxh[j] = dy[j] * gamma.value(0, j);
          sum_dxh += dxh[j];
          sum_dxh_xh += dxh[j] * xh[j];
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        auto out = dx.row(i);
        for (std::size_t j = 0; j < n; ++j)
          out[j] = tape.inv_std[i] * (dxh[j] - inv_n * sum_dxh - xh[j] * inv_n * sum_dxh_xh);
      }
      break;
    }
  }
  return dx;
}

Sequential::Sequential(const std::vector<LayerSpec>& specs, Rng& init_rng) {
  layers_.reserve(specs.size());
  for (const auto& s : specs) layers_.emplace_back(s, init_rng);
}

Tensor Sequential::forward(const Tensor& x, Mode mode, Rng* dropout_rng,
                           std::vector<Tape>& tapes) const {
  tapes.resize(layers_.size());
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    h = layer_forward(layers_[i], h, mode, dropout_rng, tapes[i]);
  return h;
}

Tensor Sequential::forward(const Tensor& x, Mode mode, Rng* dropout_rng) const {
  std::vector<Tape> tapes;
  return forward(x, mode, dropout_rng, tapes);
}

Tensor Sequential::backward(const std::vector<Tape>& tapes, const Tensor& upstream) {
  if (tapes.size() != layers_.size())
    throw ContractViolation("Sequential::backward: tape count does not match layer count");
  Tensor g = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layer_backward(layers_[i], tapes[i], g);
  return g;
}

std::vector<Parameter*> Sequential::params() {
  std::vector<Parameter*> out;
  for (auto& l : layers_)
    for (auto& p : l.params()) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> Sequential::params() const {
  std::vector<const Parameter*> out;
  for (const auto& l : layers_)
    for (const auto& p : l.params()) out.push_back(&p);
  return out;
}

std::size_t Sequential::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.parameter_count();
  return n;
}

void set_frozen(std::span<Parameter* const> params, bool frozen) {
  for (Parameter* p : params) {
    p->frozen = frozen;
    if (frozen) p->zero_grad();
  }
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace gatefuse
