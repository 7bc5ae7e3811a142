#include "gatefuse/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gatefuse/errors.hpp"
#include "gatefuse/losses.hpp"
#include "gatefuse/metrics.hpp"

namespace gatefuse {

void HyperParams::validate() const {
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be >= 0");
  };
  rate(lr, "lr");
  rate(lr2, "lr2");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(drop_gate >= 0.0 && drop_gate <= 1.0)) throw ConfigError("drop_gate must be in [0, 1]");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (!(distill_lambda >= 0.0)) throw ConfigError("distill_lambda must be >= 0");
  if (!(distill_temperature > 0.0)) throw ConfigError("distill_temperature must be > 0");
  if (!(gate_dropout >= 0.0 && gate_dropout < 1.0)) throw ConfigError("gate_dropout must be in [0, 1)");
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::new_only: return "new_only";
    case Phase::drop_gate: return "drop_gate";
    case Phase::gated: return "gated";
  }
  return "unknown";
}

RunStreams::RunStreams(std::uint64_t seed)
    : init(Rng(seed).child("init")),
      shuffle(Rng(seed).child("shuffle")),
      dropout(Rng(seed).child("dropout")),
      gate_init(Rng(seed).child("gate_init")),
      gate_dropout(Rng(seed).child("gate_dropout")),
      drop_gate(Rng(seed).child("drop_gate")) {}

namespace {

void require_trainable_data(const ArchSpec& arch, const Dataset& train) {
  if (train.size() == 0) throw ConfigError("training set is empty");
  if (train.features.cols() != arch.input_dim)
    throw DimensionError("training features have " + std::to_string(train.features.cols()) +
                         " columns, architecture expects " + std::to_string(arch.input_dim));
}

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

std::vector<int> gather_labels(const std::vector<int>& labels, std::span<const std::size_t> idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
  return out;
}

// Calls fn(batch_indices) for consecutive minibatches of one epoch.
template <typename Fn>
void for_each_batch(const std::vector<std::size_t>& order, std::size_t batch_size, Fn&& fn) {
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    fn(std::span<const std::size_t>(order.data() + start, end - start));
  }
}

double cross_entropy_step(EncoderClassifier& model, const Tensor& x, std::span<const int> labels,
                          Rng& dropout) {
  ClassifierTape tape;
  const Tensor logits = model.forward(x, Mode::train, &dropout, tape);
  const LossResult ce = softmax_cross_entropy(logits, labels);
  model.backward(tape, ce.grad);
  return ce.loss;
}

void notify(const TrainingObserver& observer, std::size_t epoch, std::size_t step, Phase phase,
            double loss) {
  if (observer) observer({epoch, step, phase, loss});
}

}  // namespace

EncoderClassifier train_vanilla(const ArchSpec& arch, const Dataset& train, const HyperParams& hp,
                                Role role, const TrainingObserver& observer) {
  hp.validate();
  require_trainable_data(arch, train);
  RunStreams streams(hp.seed);
  EncoderClassifier model = build_classifier(arch, Role::new_model, streams.init);
  Optimizer opt(model.params(), hp.optimizer);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    const auto order = shuffled_order(train.size(), streams.shuffle);
    for_each_batch(order, hp.batch_size, [&](std::span<const std::size_t> idx) {
      const Tensor x = train.features.gather_rows(idx);
      const auto y = gather_labels(train.labels, idx);
      const double loss = cross_entropy_step(model, x, y, streams.dropout);
      opt.step(hp.lr);
      notify(observer, epoch, ++step, Phase::new_only, loss);
    });
  }
  model.set_role(role);
  return model;
}

FusedStep gated_fusion_step(EncoderClassifier& new_model, GateNetwork& gate, const Tensor& x_new,
                            const Tensor& old_logits, std::span<const int> labels, double temperature,
                            Rng* dropout_rng, Rng* gate_dropout_rng, Mode mode, bool stop_gradient) {
  ClassifierTape tape;
  const Tensor l_new = new_model.forward(x_new, mode, dropout_rng, tape);
  std::vector<Tape> gate_tapes;
  // The gate reads the embedding value; whether its gradient may reach the
  // encoder is decided below.
  FusedStep out;
  out.alpha = gate.forward(tape.embedding, mode, gate_dropout_rng, gate_tapes);
  const Tensor fused = fuse_logits(old_logits, l_new, out.alpha, temperature);
  const LossResult ce = softmax_cross_entropy(fused, labels);
  out.loss = ce.loss;

  Tensor dl_new(l_new.rows(), l_new.cols());
  std::vector<double> dalpha(l_new.rows(), 0.0);
  for (std::size_t i = 0; i < l_new.rows(); ++i) {
    const double a = out.alpha[i];
    for (std::size_t j = 0; j < l_new.cols(); ++j) {
      const double g = ce.grad(i, j);
      dl_new(i, j) = a * g;
      dalpha[i] += g * (l_new(i, j) - old_logits(i, j) / temperature);
    }
  }
  const Tensor de_from_gate = gate.backward(gate_tapes, dalpha);
  if (stop_gradient)
    new_model.backward(tape, dl_new);
  else
    new_model.backward(tape, dl_new, de_from_gate);
  return out;
}

GatedFusionModel train_gated_fusion(std::shared_ptr<const EncoderClassifier> old_model,
                                    const Dataset& old_train, const ArchSpec& new_arch,
                                    const Dataset& new_train, const HyperParams& hp,
                                    const TrainingObserver& observer) {
  hp.validate();
  if (hp.epochs < 2) throw ConfigError("gated fusion needs epochs >= 2 (N-1 warm-up epochs + 1 joint epoch)");
  if (!old_model) throw ContractViolation("gated fusion needs a trained old model");
  if (!old_model->frozen()) throw ContractViolation("old model must be frozen before gated fusion");
  if (old_model->num_classes() != new_arch.num_classes)
    throw ContractViolation("old and new models disagree on the class count");
  if (old_train.ids != new_train.ids)
    throw ContractViolation("old and new training views cover different examples");
  require_trainable_data(new_arch, new_train);

  RunStreams streams(hp.seed);
  EncoderClassifier new_model = build_classifier(new_arch, Role::new_model, streams.init);
  GateNetwork gate(new_arch.embedding_dim(), hp.gate_dropout, streams.gate_init);
  const Tensor old_logits_all = old_model->logits(old_train.features);

  Optimizer opt_new(new_model.params(), hp.optimizer);
  Optimizer opt_gate(gate.params(), hp.optimizer);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    const bool joint_epoch = epoch == hp.epochs;
    const auto order = shuffled_order(new_train.size(), streams.shuffle);
    for_each_batch(order, hp.batch_size, [&](std::span<const std::size_t> idx) {
      const Tensor x = new_train.features.gather_rows(idx);
      const auto y = gather_labels(new_train.labels, idx);
      if (!joint_epoch) {
        const double loss = cross_entropy_step(new_model, x, y, streams.dropout);
        opt_new.step(hp.lr);
        notify(observer, epoch, ++step, Phase::new_only, loss);
        return;
      }
      if (streams.drop_gate.uniform() < hp.drop_gate) {
        const double loss = cross_entropy_step(new_model, x, y, streams.dropout);
        opt_new.step(hp.lr);
        notify(observer, epoch, ++step, Phase::drop_gate, loss);
        return;
      }
      const Tensor l_old = old_logits_all.gather_rows(idx);
      const FusedStep fs = gated_fusion_step(new_model, gate, x, l_old, y, hp.temperature,
                                             &streams.dropout, &streams.gate_dropout);
      opt_new.step(hp.lr2);
      opt_gate.step(hp.lr2);
      notify(observer, epoch, ++step, Phase::gated, fs.loss);
    });
  }
  return GatedFusionModel{std::move(old_model), std::move(new_model), std::move(gate), hp.temperature};
}

DistillLoss distill_loss(const Tensor& old_logits, const Tensor& new_logits, std::span<const int> labels,
                         double lambda, double distill_temperature) {
  require_same_shape(old_logits, new_logits, "distill_loss");
  LossResult ce = softmax_cross_entropy(new_logits, labels);
  const Tensor p_old = softmax_rows(old_logits);
  const Tensor p_new = softmax_rows(new_logits);
  DistillLoss out;
  out.mask.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    out.mask[i] = p_old(i, y) > p_new(i, y) ? 1.0 : 0.0;
  }
  const LossResult kl = kl_divergence_tempered(old_logits, new_logits, distill_temperature, out.mask);
  out.loss = ce.loss + lambda * kl.loss;
  out.grad = std::move(ce.grad);
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad.values()[i] += lambda * kl.grad.values()[i];
  return out;
}

EncoderClassifier train_distill(const EncoderClassifier& old_model, const Dataset& old_train,
                                const ArchSpec& new_arch, const Dataset& new_train,
                                const HyperParams& hp, const TrainingObserver& observer) {
  hp.validate();
  if (old_train.ids != new_train.ids)
    throw ContractViolation("old and new training views cover different examples");
  if (old_model.num_classes() != new_arch.num_classes)
    throw ContractViolation("old and new models disagree on the class count");
  require_trainable_data(new_arch, new_train);
  RunStreams streams(hp.seed);
  EncoderClassifier model = build_classifier(new_arch, Role::new_model, streams.init);
  const Tensor old_logits_all = old_model.logits(old_train.features);
  Optimizer opt(model.params(), hp.optimizer);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    const auto order = shuffled_order(new_train.size(), streams.shuffle);
    for_each_batch(order, hp.batch_size, [&](std::span<const std::size_t> idx) {
      const Tensor x = new_train.features.gather_rows(idx);
      const auto y = gather_labels(new_train.labels, idx);
      ClassifierTape tape;
      const Tensor l_new = model.forward(x, Mode::train, &streams.dropout, tape);
      const DistillLoss dl = distill_loss(old_logits_all.gather_rows(idx), l_new, y, hp.distill_lambda,
                                          hp.distill_temperature);
      model.backward(tape, dl.grad);
      opt.step(hp.lr);
      notify(observer, epoch, ++step, Phase::new_only, dl.loss);
    });
  }
  return model;
}

std::vector<std::uint64_t> ensemble_member_seeds(std::uint64_t seed, std::size_t k) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t j = 0; j < k; ++j)
    seeds.push_back(j == 0 ? seed : derive_seed(seed, std::uint64_t{0xe45e0000} + j));
  return seeds;
}

std::vector<EncoderClassifier> train_ensemble(const ArchSpec& arch, const Dataset& train,
                                              const HyperParams& hp, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw ConfigError("ensemble needs at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("ensemble member seeds must be distinct");
  std::vector<EncoderClassifier> members;
  members.reserve(seeds.size());
  for (std::uint64_t s : seeds) {
    HyperParams member_hp = hp;
    member_hp.seed = s;
    members.push_back(train_vanilla(arch, train, member_hp));
  }
  return members;
}

AlphaSearchResult alpha_search(const Tensor& old_logits, const Tensor& new_logits,
                               std::span<const int> labels, EnsembleSpace space,
                               std::span<const double> grid, double parity_margin) {
  require_same_shape(old_logits, new_logits, "alpha_search");
  if (old_logits.rows() != labels.size()) throw DimensionError("alpha_search: label count mismatch");
  std::vector<ExampleId> ids(labels.size());
  std::iota(ids.begin(), ids.end(), ExampleId{0});
  const Predictions old_p = predictions_from_logits(old_logits, ids, labels);
  const Predictions new_p = predictions_from_logits(new_logits, ids, labels);
  const double vanilla_acc = accuracy(new_p.predicted, labels);

  AlphaSearchResult result;
  result.feasible = false;
  double best_nfr = 0.0;
  for (double a : grid) {
    const Predictions p = weighted_ensemble(old_logits, new_logits, a, space, ids, labels);
    AlphaEvaluation ev;
    ev.alpha = a;
    ev.accuracy = accuracy(p.predicted, labels);
    ev.negative_flip_rate = negative_flip_rate(old_p.predicted, p.predicted, labels).rate;
    ev.feasible = ev.accuracy >= vanilla_acc - parity_margin;
    if (ev.feasible) {
      const bool better = !result.feasible || ev.negative_flip_rate < best_nfr ||
                          (ev.negative_flip_rate == best_nfr && a > result.alpha);
      if (better) {
        result.alpha = a;
        best_nfr = ev.negative_flip_rate;
        result.feasible = true;
      }
    }
    result.evaluations.push_back(ev);
  }
  if (!result.feasible) result.alpha = 1.0;
  return result;
}

}  // namespace gatefuse
