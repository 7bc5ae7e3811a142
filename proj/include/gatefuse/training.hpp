#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gatefuse/fusion.hpp"
#include "gatefuse/models.hpp"
#include "gatefuse/optim.hpp"

namespace gatefuse {

struct HyperParams {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 5;
  double lr2 = 1e-4;          // joint gate/new-model phase
  double drop_gate = 0.5;     // D: chance a final-epoch step trains f_new alone
  double temperature = 1.0;   // T on old logits inside the fusion
  double distill_lambda = 1.0;
  double distill_temperature = 1.0;
  double gate_dropout = 0.1;
  std::uint64_t seed = 1;
  OptimizerConfig optimizer{};

  // Throws ConfigError. Learning rates may be 0 (no-op updates).
  void validate() const;
};

enum class Phase { new_only, drop_gate, gated };

std::string to_string(Phase p);

struct TrainingEvent {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // global, 1-based
  Phase phase = Phase::new_only;
  double loss = 0.0;
};

using TrainingObserver = std::function<void(const TrainingEvent&)>;

// Random streams for one run, derived from hp.seed so each purpose has its
// own sequence: init, shuffle, dropout (new/old model), gate_init,
// gate_dropout, drop_gate.
struct RunStreams {
  explicit RunStreams(std::uint64_t seed);
  Rng init;
  Rng shuffle;
  Rng dropout;
  Rng gate_init;
  Rng gate_dropout;
  Rng drop_gate;
};

// Plain minibatch cross-entropy training; also used for the old model
// (pass Role::old_model and the model is frozen after training).
EncoderClassifier train_vanilla(const ArchSpec& arch, const Dataset& train, const HyperParams& hp,
                                Role role = Role::new_model, const TrainingObserver& observer = {});

// Two-phase schedule. Epochs 1..N-1 train the new model alone at lr. In
// epoch N every minibatch first draws the drop-gate coin: with probability D
// it is a plain new-model step at lr, otherwise the gate reads
// stop_grad(E_new(x)), the loss is CE on the fused logits and both the gate
// and the new model step at lr2. The old model is never updated.
//
// old_train holds the old model's view of the same training examples.
GatedFusionModel train_gated_fusion(std::shared_ptr<const EncoderClassifier> old_model,
                                    const Dataset& old_train, const ArchSpec& new_arch,
                                    const Dataset& new_train, const HyperParams& hp,
                                    const TrainingObserver& observer = {});

// Loss of one fused minibatch; accumulates grads into new_model and gate.
// With stop_gradient == false the gate's input gradient also flows into the
// encoder (kept for tests that contrast the two).
struct FusedStep {
  double loss = 0.0;
  std::vector<double> alpha;
};

FusedStep gated_fusion_step(EncoderClassifier& new_model, GateNetwork& gate, const Tensor& x_new,
                            const Tensor& old_logits, std::span<const int> labels, double temperature,
                            Rng* dropout_rng, Rng* gate_dropout_rng, Mode mode = Mode::train,
                            bool stop_gradient = true);

// Conditional distillation objective for one minibatch:
//   mean_i [ CE_i + lambda * mask_i * KL(softmax(l_old/T_kd) || softmax(l_new/T_kd)) ]
// mask_i = 1 iff p_old(y_i) > p_new(y_i) at temperature 1.
struct DistillLoss {
  double loss = 0.0;
  Tensor grad;  // d(loss)/d(l_new)
  std::vector<double> mask;
};

DistillLoss distill_loss(const Tensor& old_logits, const Tensor& new_logits, std::span<const int> labels,
                         double lambda, double distill_temperature);

EncoderClassifier train_distill(const EncoderClassifier& old_model, const Dataset& old_train,
                                const ArchSpec& new_arch, const Dataset& new_train,
                                const HyperParams& hp, const TrainingObserver& observer = {});

// Independent vanilla runs differing only in seed. Throws ConfigError on
// duplicate seeds.
std::vector<EncoderClassifier> train_ensemble(const ArchSpec& arch, const Dataset& train,
                                              const HyperParams& hp, std::span<const std::uint64_t> seeds);

// Member seeds for a k-member ensemble anchored at `seed`; the first member
// is `seed` itself, so member lists for smaller k are prefixes.
std::vector<std::uint64_t> ensemble_member_seeds(std::uint64_t seed, std::size_t k);

struct AlphaEvaluation {
  double alpha = 0.0;
  double accuracy = 0.0;
  double negative_flip_rate = 0.0;
  bool feasible = false;
};

struct AlphaSearchResult {
  double alpha = 1.0;
  // False when no grid point met accuracy parity and alpha fell back to 1.
  bool feasible = true;
  std::vector<AlphaEvaluation> evaluations;
};

inline const std::vector<double> kDefaultAlphaGrid{0.5, 0.6, 0.7, 0.8, 0.9};
// Absolute accuracy slack (fraction of examples) allowed below the vanilla
// new model for a grid point to count as on par.
inline constexpr double kDefaultParityMargin = 0.0015;

// Among grid points with accuracy >= vanilla-new accuracy - parity_margin,
// pick the one with the lowest R_NF (ties: larger alpha).
AlphaSearchResult alpha_search(const Tensor& old_logits, const Tensor& new_logits,
                               std::span<const int> labels, EnsembleSpace space,
                               std::span<const double> grid = kDefaultAlphaGrid,
                               double parity_margin = kDefaultParityMargin);

}  // namespace gatefuse
