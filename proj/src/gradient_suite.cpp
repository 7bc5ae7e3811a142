#include "gatefuse/gradient_suite.hpp"

#include <cmath>

#include "gatefuse/losses.hpp"
#include "gatefuse/training.hpp"

namespace gatefuse {

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (double& v : t.values()) {
    v = scale * rng.normal();
    // Keep clear of the ReLU kink so central differences stay one-sided-free.
    if (std::abs(v) < 1e-3) v = v < 0 ? -1e-3 : 1e-3;
  }
  return t;
}

double weighted_sum(const Tensor& y, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * w.values()[i];
  return s;
}

void add_into(Tensor& grad, const Tensor& d) {
  for (std::size_t i = 0; i < grad.size(); ++i) grad.values()[i] += d.values()[i];
}

std::vector<int> random_labels(std::size_t n, std::size_t c, Rng& rng) {
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.below(c));
  return y;
}

// Layer in train mode with input treated as a parameter; loss = <y, w>.
NamedGradCheck check_layer(const std::string& name, LayerSpec spec, std::size_t in_width, Rng& rng, double eps) {
  Rng init = rng.child("init");
  Layer layer(spec, init);
  Parameter x(random_tensor(4, in_width, rng));
  Tape probe;
  Rng probe_rng(0);
  const Tensor y0 = layer_forward(layer, x.value, Mode::train, &probe_rng, probe);
  const Tensor w = random_tensor(y0.rows(), y0.cols(), rng);
  const std::uint64_t mask_seed = rng.next_u64();
  auto loss = [&] {
    Rng drop(mask_seed);
    Tape tape;
    const Tensor y = layer_forward(layer, x.value, Mode::train, &drop, tape);
    add_into(x.grad, layer_backward(layer, tape, w));
    return weighted_sum(y, w);
  };
  std::vector<Parameter*> params{&x};
  for (auto& p : layer.params()) params.push_back(&p);
  return {name, grad_check(params, loss, eps)};
}

}  // namespace

std::vector<NamedGradCheck> run_gradient_suite(std::uint64_t seed, double eps) {
  Rng rng(seed);
  std::vector<NamedGradCheck> out;
  out.push_back(check_layer("linear", LayerSpec::linear(5, 3), 5, rng, eps));
  out.push_back(check_layer("relu", LayerSpec::relu(), 6, rng, eps));
  out.push_back(check_layer("tanh", LayerSpec::tanh(), 6, rng, eps));
  out.push_back(check_layer("sigmoid", LayerSpec::sigmoid(), 6, rng, eps));
  out.push_back(check_layer("dropout", LayerSpec::dropout(0.3), 6, rng, eps));
  out.push_back(check_layer("layer_norm", LayerSpec::layer_norm(7), 7, rng, eps));

  {
    Parameter logits(random_tensor(6, 4, rng));
    const auto y = random_labels(6, 4, rng);
    out.push_back({"softmax_cross_entropy", grad_check(std::vector<Parameter*>{&logits}, [&] {
                     const LossResult r = softmax_cross_entropy(logits.value, y);
                     add_into(logits.grad, r.grad);
                     return r.loss;
                   }, eps)});
  }
  {
    const Tensor teacher = random_tensor(6, 4, rng);
    Parameter student(random_tensor(6, 4, rng));
    const std::vector<double> weights{1.0, 0.0, 1.0, 0.5, 1.0, 0.0};
    out.push_back({"kl_divergence_tempered", grad_check(std::vector<Parameter*>{&student}, [&] {
                     const LossResult r = kl_divergence_tempered(teacher, student.value, 2.0, weights);
                     add_into(student.grad, r.grad);
                     return r.loss;
                   }, eps)});
  }
  {
    const Tensor old_logits = random_tensor(8, 3, rng, 2.0);
    Parameter new_logits(random_tensor(8, 3, rng));
    const auto y = random_labels(8, 3, rng);
    out.push_back({"distill_objective", grad_check(std::vector<Parameter*>{&new_logits}, [&] {
                     const DistillLoss r = distill_loss(old_logits, new_logits.value, y, 0.7, 1.5);
                     add_into(new_logits.grad, r.grad);
                     return r.loss;
                   }, eps)});
  }

  ArchSpec arch;
  arch.input_dim = 6;
  arch.hidden = {8, 5};
  arch.activation = Activation::tanh;
  arch.dropout = 0.2;
  arch.num_classes = 3;
  const Tensor x = random_tensor(5, arch.input_dim, rng);
  const auto y = random_labels(5, arch.num_classes, rng);
  const Tensor old_logits = random_tensor(5, arch.num_classes, rng, 1.5);
  const std::uint64_t mask_seed = rng.next_u64();

  {
    Rng init = rng.child("classifier");
    EncoderClassifier model(arch, Role::new_model, init);
    out.push_back({"classifier_cross_entropy", grad_check(model.params(), [&] {
                     Rng drop(mask_seed);
                     ClassifierTape tape;
                     const Tensor logits = model.forward(x, Mode::train, &drop, tape);
                     const LossResult r = softmax_cross_entropy(logits, y);
                     model.backward(tape, r.grad);
                     return r.loss;
                   }, eps)});
  }
  {
    Rng init = rng.child("gate");
    GateNetwork gate(5, 0.1, init);
    const Tensor e = random_tensor(6, 5, rng);
    const std::vector<double> w{0.3, -1.2, 0.8, 0.5, -0.4, 1.1};
    out.push_back({"gate_network", grad_check(gate.params(), [&] {
                     Rng drop(mask_seed);
                     std::vector<Tape> tapes;
                     const auto alpha = gate.forward(e, Mode::train, &drop, tapes);
                     double loss = 0.0;
                     for (std::size_t i = 0; i < alpha.size(); ++i) loss += w[i] * alpha[i];
                     gate.backward(tapes, w);
                     return loss;
                   }, eps)});
  }

  Rng model_init = rng.child("fusion_model");
  EncoderClassifier new_model(arch, Role::new_model, model_init);
  Rng gate_init = rng.child("fusion_gate");
  GateNetwork gate(arch.embedding_dim(), 0.1, gate_init);
  const double temperature = 1.3;
  std::vector<Parameter*> all = new_model.params();
  for (Parameter* p : gate.params()) all.push_back(p);

  // Without the stop-gradient the analytic gradient is the exact derivative
  // of the fused loss for every parameter.
  out.push_back({"gated_fusion_full_path", grad_check(all, [&] {
                   Rng drop(mask_seed), gate_drop(mask_seed + 1);
                   return gated_fusion_step(new_model, gate, x, old_logits, y, temperature, &drop, &gate_drop,
                                            Mode::train, false)
                       .loss;
                 }, eps)});

  // With the stop-gradient, encoder gradients are those of the fused loss
  // with alpha held at its current value; gate and head gradients are exact.
  std::vector<double> alpha_fixed;
  {
    Rng drop(mask_seed), gate_drop(mask_seed + 1);
    alpha_fixed = gated_fusion_step(new_model, gate, x, old_logits, y, temperature, &drop, &gate_drop).alpha;
    zero_grads(all);
  }
  out.push_back({"gated_fusion_stop_gradient", grad_check(new_model.params(), [&] {
                   Rng drop(mask_seed);
                   ClassifierTape tape;
                   const Tensor l_new = new_model.forward(x, Mode::train, &drop, tape);
                   const Tensor fused = fuse_logits(old_logits, l_new, alpha_fixed, temperature);
                   const LossResult r = softmax_cross_entropy(fused, y);
                   // Recompute the stop-gradient step's grads; the loss above is
                   // the surrogate they differentiate.
                   Rng drop2(mask_seed), gate_drop(mask_seed + 1);
                   gated_fusion_step(new_model, gate, x, old_logits, y, temperature, &drop2, &gate_drop);
                   zero_grads(gate.params());
                   return r.loss;
                 }, eps)});
  out.push_back({"gated_fusion_gate", grad_check(gate.params(), [&] {
                   Rng drop(mask_seed), gate_drop(mask_seed + 1);
                   const double loss =
                       gated_fusion_step(new_model, gate, x, old_logits, y, temperature, &drop, &gate_drop).loss;
                   zero_grads(new_model.params());
                   return loss;
                 }, eps)});
  return out;
}

}  // namespace gatefuse
