#include "gatefuse/models.hpp"

#include "gatefuse/errors.hpp"

namespace gatefuse {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string to_string(Role r) { return r == Role::old_model ? "old" : "new"; }

Role role_from_string(const std::string& s) {
  if (s == "old") return Role::old_model;
  if (s == "new") return Role::new_model;
  throw ConfigError("unknown role '" + s + "'");
}

std::vector<LayerSpec> ArchSpec::encoder_layers() const {
  std::vector<LayerSpec> specs;
  std::size_t width = input_dim;
  for (std::size_t h : hidden) {
    specs.push_back(LayerSpec::linear(width, h));
    specs.push_back(activation == Activation::relu ? LayerSpec::relu() : LayerSpec::tanh());
    if (dropout > 0.0) specs.push_back(LayerSpec::dropout(dropout));
    width = h;
  }
  return specs;
}

void ArchSpec::validate() const {
  if (input_dim == 0) throw ConfigError("architecture needs input_dim > 0");
  if (num_classes < 2) throw ConfigError("architecture needs at least 2 classes");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("hidden widths must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0,1)");
}

EncoderClassifier::EncoderClassifier(ArchSpec arch, Role role, Rng& init_rng)
    : arch_((arch.validate(), std::move(arch))),
      role_(role),
      encoder_(arch_.encoder_layers(), init_rng),
      head_(LayerSpec::linear(arch_.embedding_dim(), arch_.num_classes), init_rng) {
  if (role_ == Role::old_model) set_frozen(true);
}

Tensor EncoderClassifier::encode(const Tensor& x, Mode mode, Rng* dropout_rng) const {
  if (x.cols() != arch_.input_dim)
    throw DimensionError("encode expects " + std::to_string(arch_.input_dim) +
                         " feature columns, got " + x.shape_string());
  return encoder_.forward(x, mode, dropout_rng);
}

Tensor EncoderClassifier::head(const Tensor& embedding) const {
  Tape t;
  return layer_forward(head_, embedding, Mode::eval, nullptr, t);
}

Tensor EncoderClassifier::logits(const Tensor& x, Mode mode, Rng* dropout_rng) const {
  return head(encode(x, mode, dropout_rng));
}

Tensor EncoderClassifier::forward(const Tensor& x, Mode mode, Rng* dropout_rng,
                                  ClassifierTape& tape) const {
  if (x.cols() != arch_.input_dim)
    throw DimensionError("forward expects " + std::to_string(arch_.input_dim) +
                         " feature columns, got " + x.shape_string());
  tape.embedding = encoder_.forward(x, mode, dropout_rng, tape.encoder);
  return layer_forward(head_, tape.embedding, mode, nullptr, tape.head);
}

Tensor EncoderClassifier::backward(const ClassifierTape& tape, const Tensor& dlogits) {
  const Tensor de = layer_backward(head_, tape.head, dlogits);
  return encoder_.backward(tape.encoder, de);
}

Tensor EncoderClassifier::backward(const ClassifierTape& tape, const Tensor& dlogits,
                                   const Tensor& dembedding) {
  Tensor de = layer_backward(head_, tape.head, dlogits);
  require_same_shape(de, dembedding, "embedding gradient");
  for (std::size_t i = 0; i < de.size(); ++i) de.values()[i] += dembedding.values()[i];
  return encoder_.backward(tape.encoder, de);
}

std::vector<Parameter*> EncoderClassifier::params() {
  auto out = encoder_.params();
  for (auto& p : head_.params()) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> EncoderClassifier::params() const {
  auto out = encoder_.params();
  for (const auto& p : head_.params()) out.push_back(&p);
  return out;
}

std::size_t EncoderClassifier::parameter_count() const {
  return encoder_.parameter_count() + head_.parameter_count();
}

void EncoderClassifier::set_frozen(bool frozen) {
  const auto ps = params();
  gatefuse::set_frozen(ps, frozen);
}

void EncoderClassifier::set_role(Role role) {
  role_ = role;
  if (role_ == Role::old_model) set_frozen(true);
}

bool EncoderClassifier::frozen() const {
  for (const Parameter* p : params())
    if (!p->frozen) return false;
  return true;
}

EncoderClassifier build_classifier(const ArchSpec& arch, Role role, Rng& init_rng) {
  return EncoderClassifier(arch, role, init_rng);
}

namespace {

std::vector<LayerSpec> gate_layers(std::size_t h, double p) {
  return {LayerSpec::dropout(p),
          LayerSpec::linear(h, GateNetwork::kHidden),
          LayerSpec::layer_norm(GateNetwork::kHidden),
          LayerSpec::relu(),
          LayerSpec::dropout(p),
          LayerSpec::linear(GateNetwork::kHidden, 1),
          LayerSpec::sigmoid()};
}

}  // namespace

GateNetwork::GateNetwork(std::size_t embedding_dim, double dropout, Rng& init_rng)
    : embedding_dim_(embedding_dim), dropout_(dropout), net_(gate_layers(embedding_dim, dropout), init_rng) {}

std::vector<double> GateNetwork::forward(const Tensor& e, Mode mode, Rng* dropout_rng,
                                         std::vector<Tape>& tapes) const {
  if (e.cols() != embedding_dim_)
    throw DimensionError("gate expects embeddings of width " + std::to_string(embedding_dim_) +
                         ", got " + e.shape_string());
  const Tensor out = net_.forward(e, mode, dropout_rng, tapes);
  return {out.values().begin(), out.values().end()};
}

std::vector<double> GateNetwork::alpha(const Tensor& e, Mode mode, Rng* dropout_rng) const {
  std::vector<Tape> tapes;
  return forward(e, mode, dropout_rng, tapes);
}

Tensor GateNetwork::backward(const std::vector<Tape>& tapes, std::span<const double> dalpha) {
  Tensor up(dalpha.size(), 1, std::vector<double>(dalpha.begin(), dalpha.end()));
  return net_.backward(tapes, up);
}

std::vector<double> gate_alpha(const GateNetwork& gate, const Tensor& e, Mode mode, Rng* dropout_rng) {
  return gate.alpha(e, mode, dropout_rng);
}

std::string to_string(ScenarioFamily f) { return f == ScenarioFamily::scale_up ? "scale_up" : "distinct"; }

ScenarioFamily scenario_family_from_string(const std::string& s) {
  if (s == "scale_up") return ScenarioFamily::scale_up;
  if (s == "distinct") return ScenarioFamily::distinct;
  throw ConfigError("unknown scenario '" + s + "' (expected scale_up or distinct)");
}

UpgradeScenario make_scenario(ScenarioFamily family, bool text_input, std::size_t num_classes,
                              std::size_t numeric_dim, std::size_t hashed_dim,
                              NumericViewConfig numeric, double classifier_dropout) {
  UpgradeScenario s;
  s.name = to_string(family);
  const std::size_t d = text_input ? hashed_dim : numeric_dim;
  auto arch = [&](std::vector<std::size_t> hidden, Activation act) {
    ArchSpec a;
    a.input_dim = d;
    a.hidden = std::move(hidden);
    a.activation = act;
    a.dropout = classifier_dropout;
    a.num_classes = num_classes;
    return a;
  };
  constexpr std::uint64_t kBaseHashSeed = 0x5eed;
  constexpr std::uint64_t kOldNoiseSeed = 101;
  if (family == ScenarioFamily::scale_up) {
    s.old_arch = arch({32}, Activation::relu);
    s.new_arch = arch({128, 128}, Activation::relu);
    if (text_input) {
      s.old_view = HashedBowView{hashed_dim, kBaseHashSeed, NgramRange::unigram};
      s.new_view = s.old_view;
    } else {
      s.old_view = NumericView{numeric.old_noise, kOldNoiseSeed};
      s.new_view = NumericView{numeric.new_noise, 202};
    }
  } else {
    s.old_arch = arch({64}, Activation::relu);
    s.new_arch = arch({64}, Activation::tanh);
    if (text_input) {
      s.old_view = HashedBowView{hashed_dim, kBaseHashSeed, NgramRange::unigram};
      s.new_view = HashedBowView{hashed_dim, 0xe1ec7a, NgramRange::uni_bigram};
    } else {
      s.old_view = NumericView{numeric.old_noise, kOldNoiseSeed};
      s.new_view = NumericView{numeric.new_noise, 303};
    }
  }
  return s;
}

}  // namespace gatefuse
