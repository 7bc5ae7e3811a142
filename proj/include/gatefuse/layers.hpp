#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gatefuse/rng.hpp"
#include "gatefuse/tensor.hpp"

namespace gatefuse {

enum class Mode { train, eval };

enum class LayerKind { linear, relu, tanh, dropout, layer_norm, sigmoid };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& s);

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in = 0;   // linear input width; layer_norm width
  std::size_t out = 0;  // linear output width
  double p = 0.0;       // dropout probability
  double eps = 1e-5;    // layer_norm epsilon
  double init_scale = 1.0;

  static LayerSpec linear(std::size_t in, std::size_t out, double init_scale = 1.0);
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec tanh() { return {LayerKind::tanh}; }
  static LayerSpec sigmoid() { return {LayerKind::sigmoid}; }
  static LayerSpec dropout(double p);
  static LayerSpec layer_norm(std::size_t dim, double eps = 1e-5);

  // Throws ConfigError on invalid dimensions or probabilities.
  void validate() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Parameter {
  Tensor value;
  Tensor grad;
  bool frozen = false;

  explicit Parameter(Tensor v) : value(std::move(v)), grad(value.rows(), value.cols()) {}
  void zero_grad() { grad.fill(0.0); }
};

// Activations cached by a forward pass for the matching backward pass.
struct Tape {
  bool valid = false;
  Mode mode = Mode::eval;
  Tensor input;
  Tensor output;
  Tensor mask;                  // dropout keep mask, already scaled by 1/(1-p)
  Tensor normalized;            // layer_norm x_hat
  std::vector<double> inv_std;  // layer_norm per-row 1/sqrt(var + eps)
};

class Layer {
 public:
  // Linear: W ~ U(+-init_scale*sqrt(6/(in+out))), b = 0. LayerNorm: gamma=1, beta=0.
  Layer(LayerSpec spec, Rng& init_rng);

  const LayerSpec& spec() const noexcept { return spec_; }
  std::vector<Parameter>& params() noexcept { return params_; }
  const std::vector<Parameter>& params() const noexcept { return params_; }

  std::size_t parameter_count() const;

 private:
  LayerSpec spec_;
  std::vector<Parameter> params_;
};

// dropout_rng is only consulted for Dropout layers in train mode and may be
// null otherwise.
Tensor layer_forward(const Layer& layer, const Tensor& x, Mode mode, Rng* dropout_rng, Tape& tape);

// Returns d(loss)/d(input) and accumulates into the layer's parameter grads
// (skipped for frozen parameters).
Tensor layer_backward(Layer& layer, const Tape& tape, const Tensor& upstream);

class Sequential {
 public:
  Sequential() = default;
  Sequential(const std::vector<LayerSpec>& specs, Rng& init_rng);

  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  Tensor forward(const Tensor& x, Mode mode, Rng* dropout_rng, std::vector<Tape>& tapes) const;
  Tensor forward(const Tensor& x, Mode mode, Rng* dropout_rng) const;
  Tensor backward(const std::vector<Tape>& tapes, const Tensor& upstream);

  std::vector<Parameter*> params();
  std::vector<const Parameter*> params() const;
  std::size_t parameter_count() const;

 private:
  std::vector<Layer> layers_;
};

void set_frozen(std::span<Parameter* const> params, bool frozen);
void zero_grads(std::span<Parameter* const> params);

}  // namespace gatefuse
