#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gatefuse/data.hpp"
#include "gatefuse/layers.hpp"

namespace gatefuse {

enum class Activation { relu, tanh };
enum class Role { old_model, new_model };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);
std::string to_string(Role r);
Role role_from_string(const std::string& s);

// MLP classifier shape: input -> [Linear, act, Dropout] per hidden width ->
// embedding -> Linear head -> C logits.
struct ArchSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  Activation activation = Activation::relu;
  double dropout = 0.1;
  std::size_t num_classes = 2;

  std::size_t embedding_dim() const { return hidden.empty() ? input_dim : hidden.back(); }
  std::vector<LayerSpec> encoder_layers() const;
  void validate() const;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

// Activations from one training-mode forward pass.
struct ClassifierTape {
  std::vector<Tape> encoder;
  Tape head;
  Tensor embedding;
};

class EncoderClassifier {
 public:
  EncoderClassifier(ArchSpec arch, Role role, Rng& init_rng);

  const ArchSpec& arch() const noexcept { return arch_; }
  Role role() const noexcept { return role_; }
  std::size_t embedding_dim() const { return arch_.embedding_dim(); }
  std::size_t num_classes() const noexcept { return arch_.num_classes; }

  // Penultimate representation E(x). Deterministic in eval mode.
  Tensor encode(const Tensor& x, Mode mode = Mode::eval, Rng* dropout_rng = nullptr) const;
  Tensor head(const Tensor& embedding) const;
  Tensor logits(const Tensor& x, Mode mode = Mode::eval, Rng* dropout_rng = nullptr) const;

  // Forward that records tapes for backward(); returns logits.
  Tensor forward(const Tensor& x, Mode mode, Rng* dropout_rng, ClassifierTape& tape) const;
  // Backprop d(loss)/d(logits). Returns d(loss)/d(embedding) contribution
  // already pushed through the encoder (input gradient).
  Tensor backward(const ClassifierTape& tape, const Tensor& dlogits);
  // Same, with an extra gradient arriving directly at the embedding.
  Tensor backward(const ClassifierTape& tape, const Tensor& dlogits, const Tensor& dembedding);

  std::vector<Parameter*> params();
  std::vector<const Parameter*> params() const;
  std::size_t parameter_count() const;

  // Old models are frozen at construction; freezing also zeroes grads.
  void set_frozen(bool frozen);
  // Switching to Role::old_model freezes every parameter.
  void set_role(Role role);
  bool frozen() const;

  Sequential& encoder() noexcept { return encoder_; }
  const Sequential& encoder() const noexcept { return encoder_; }
  Layer& head_layer() noexcept { return head_; }
  const Layer& head_layer() const noexcept { return head_; }

 private:
  ArchSpec arch_;
  Role role_;
  Sequential encoder_;
  Layer head_;
};

EncoderClassifier build_classifier(const ArchSpec& arch, Role role, Rng& init_rng);

// g_theta: Dropout, Linear(h->64), LayerNorm(64), ReLU, Dropout, Linear(64->1), Sigmoid.
class GateNetwork {
 public:
  static constexpr std::size_t kHidden = 64;

  GateNetwork(std::size_t embedding_dim, double dropout, Rng& init_rng);

  std::size_t embedding_dim() const noexcept { return embedding_dim_; }
  double dropout() const noexcept { return dropout_; }

  // One alpha per row of e, strictly inside (0, 1) for finite input.
  std::vector<double> alpha(const Tensor& e, Mode mode = Mode::eval, Rng* dropout_rng = nullptr) const;
  std::vector<double> forward(const Tensor& e, Mode mode, Rng* dropout_rng,
                              std::vector<Tape>& tapes) const;
  // Accumulates parameter grads from d(loss)/d(alpha); returns d(loss)/d(e).
  Tensor backward(const std::vector<Tape>& tapes, std::span<const double> dalpha);

  Sequential& layers() noexcept { return net_; }
  const Sequential& layers() const noexcept { return net_; }
  std::vector<Parameter*> params() { return net_.params(); }
  std::vector<const Parameter*> params() const { return net_.params(); }
  std::size_t parameter_count() const { return net_.parameter_count(); }

 private:
  std::size_t embedding_dim_;
  double dropout_;
  Sequential net_;
};

std::vector<double> gate_alpha(const GateNetwork& gate, const Tensor& e, Mode mode = Mode::eval,
                               Rng* dropout_rng = nullptr);

enum class ScenarioFamily { scale_up, distinct };

std::string to_string(ScenarioFamily f);
ScenarioFamily scenario_family_from_string(const std::string& s);

// Old/new architectures plus the feature view each model reads. Both models
// share C and the evaluation set.
struct UpgradeScenario {
  std::string name;
  ArchSpec old_arch;
  ArchSpec new_arch;
  FeatureView old_view;
  FeatureView new_view;
};

// Feature-view parameters for numeric (synthetic) datasets. With nonzero
// noise the old and new models read independently noised copies of the same
// features; by default both read the clean features.
struct NumericViewConfig {
  double old_noise = 0.0;
  double new_noise = 0.0;
};

// Built-in scenario families at desk scale.
//  scale_up: old 1x32 ReLU, new 2x128 ReLU, same featuriser.
//  distinct: old 1x64 ReLU, new 1x64 tanh, new featuriser uses another hash
//            seed and unigrams+bigrams (numeric: another noise stream).
UpgradeScenario make_scenario(ScenarioFamily family, bool text_input, std::size_t num_classes,
                              std::size_t numeric_dim, std::size_t hashed_dim = 2048,
                              NumericViewConfig numeric = {}, double classifier_dropout = 0.1);

}  // namespace gatefuse
