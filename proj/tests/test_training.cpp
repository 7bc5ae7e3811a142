#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include "gatefuse/errors.hpp"
#include "gatefuse/losses.hpp"
#include "gatefuse/metrics.hpp"
#include "gatefuse/training.hpp"

using namespace gatefuse;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

ArchSpec arch_for(std::size_t in, std::vector<std::size_t> hidden, std::size_t c) {
  ArchSpec a;
  a.input_dim = in;
  a.hidden = std::move(hidden);
  a.num_classes = c;
  return a;
}

HyperParams small_hp(std::uint64_t seed = 3) {
  HyperParams hp;
  hp.epochs = 3;
  hp.batch_size = 16;
  hp.lr = 5e-3;
  hp.lr2 = 1e-3;
  hp.seed = seed;
  return hp;
}

std::vector<Tensor> param_values(const EncoderClassifier& m) {
  std::vector<Tensor> out;
  for (const Parameter* p : m.params()) out.push_back(p->value);
  return out;
}

std::vector<Tensor> param_grads(const std::vector<Parameter*>& ps) {
  std::vector<Tensor> out;
  for (const Parameter* p : ps) out.push_back(p->grad);
  return out;
}

}  // namespace

TEST(HyperParams, Validation) {
  HyperParams hp;
  EXPECT_NO_THROW(hp.validate());
  hp.lr = 0.0;
  EXPECT_NO_THROW(hp.validate());
  auto bad = [](auto mutate) {
    HyperParams h;
    mutate(h);
    EXPECT_THROW(h.validate(), ConfigError);
  };
  bad([](HyperParams& h) { h.lr = -1e-3; });
  bad([](HyperParams& h) { h.batch_size = 0; });
  bad([](HyperParams& h) { h.drop_gate = 1.5; });
  bad([](HyperParams& h) { h.temperature = 0.0; });
  bad([](HyperParams& h) { h.gate_dropout = 1.0; });
}

TEST(Vanilla, DeterministicAndLearns) {
  const Dataset d = synth_gaussian_mixture(300, 4, 3, 4.0, 0.0, 5);
  const auto arch = arch_for(4, {16}, 3);
  const auto a = train_vanilla(arch, d, small_hp());
  const auto b = train_vanilla(arch, d, small_hp());
  EXPECT_EQ(param_values(a), param_values(b));
  const auto c = train_vanilla(arch, d, small_hp(4));
  EXPECT_NE(param_values(a), param_values(c));
  const auto p = predictions_from_logits(a.logits(d.features), d.ids, d.labels);
  EXPECT_GT(accuracy(p.predicted, d.labels), 0.8);
}

TEST(Vanilla, OldRoleComesBackFrozen) {
  const Dataset d = synth_gaussian_mixture(64, 4, 2, 3.0, 0.0, 5);
  EXPECT_TRUE(train_vanilla(arch_for(4, {8}, 2), d, small_hp(), Role::old_model).frozen());
  EXPECT_THROW(train_vanilla(arch_for(5, {8}, 2), d, small_hp()), DimensionError);
}

TEST(GatedFusionStep, StopGradientKeepsGateOutOfEncoder) {
  Rng init(21), r(22);
  const auto arch = arch_for(5, {6}, 3);
  EncoderClassifier with_sg = build_classifier(arch, Role::new_model, init);
  EncoderClassifier without_sg = with_sg;
  GateNetwork gate_a(6, 0.0, init);
  GateNetwork gate_b = gate_a;
  const Tensor x = random_tensor(10, 5, r);
  const Tensor l_old = random_tensor(10, 3, r, 2.0);
  const std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};

  gated_fusion_step(with_sg, gate_a, x, l_old, y, 1.0, nullptr, nullptr, Mode::eval, true);
  gated_fusion_step(without_sg, gate_b, x, l_old, y, 1.0, nullptr, nullptr, Mode::eval, false);

  EXPECT_EQ(param_grads(gate_a.params()), param_grads(gate_b.params()));
  const auto head_a = param_grads({&with_sg.head_layer().params()[0], &with_sg.head_layer().params()[1]});
  const auto head_b = param_grads({&without_sg.head_layer().params()[0], &without_sg.head_layer().params()[1]});
  EXPECT_EQ(head_a, head_b);
  const auto enc_a = param_grads(with_sg.encoder().params());
  const auto enc_b = param_grads(without_sg.encoder().params());
  double diff = 0.0;
  for (std::size_t i = 0; i < enc_a.size(); ++i) diff = std::max(diff, max_abs_diff(enc_a[i], enc_b[i]));
  EXPECT_GT(diff, 1e-8);

  // With the stop-gradient the encoder sees exactly the alpha-scaled CE
  // gradient of a fixed-alpha fusion.
  EncoderClassifier surrogate = with_sg;
  for (Parameter* p : surrogate.params()) p->zero_grad();
  ClassifierTape tape;
  const Tensor l_new = surrogate.forward(x, Mode::eval, nullptr, tape);
  const auto alpha = gate_a.alpha(tape.embedding);
  const LossResult ce = softmax_cross_entropy(fuse_logits(l_old, l_new, alpha, 1.0), y);
  Tensor dl = ce.grad;
  for (std::size_t i = 0; i < dl.rows(); ++i)
    for (double& v : dl.row(i)) v *= alpha[i];
  surrogate.backward(tape, dl);
  const auto enc_s = param_grads(surrogate.encoder().params());
  for (std::size_t i = 0; i < enc_a.size(); ++i) EXPECT_LT(max_abs_diff(enc_a[i], enc_s[i]), 1e-14);
}

TEST(GatedFusion, SchedulePhasesAndFrozenOld) {
  const Dataset d = synth_gaussian_mixture(200, 4, 3, 3.0, 0.0, 8);
  auto hp = small_hp();
  hp.drop_gate = 0.5;
  auto old_model = std::make_shared<const EncoderClassifier>(train_vanilla(arch_for(4, {8}, 3), d, hp, Role::old_model));
  const auto before = param_values(*old_model);
  std::vector<TrainingEvent> events;
  const auto gf = train_gated_fusion(old_model, d, arch_for(4, {16}, 3), d, hp,
                                     [&](const TrainingEvent& e) { events.push_back(e); });
  EXPECT_EQ(param_values(*gf.old_model), before);
  const std::size_t per_epoch = (200 + 15) / 16;
  ASSERT_EQ(events.size(), 3 * per_epoch);
  std::size_t gated = 0, dropped = 0;
  for (const auto& e : events) {
    if (e.epoch < 3) EXPECT_EQ(e.phase, Phase::new_only);
    else EXPECT_NE(e.phase, Phase::new_only);
    gated += e.phase == Phase::gated;
    dropped += e.phase == Phase::drop_gate;
  }
  EXPECT_GT(gated, 0u);
  EXPECT_GT(dropped, 0u);
}

TEST(GatedFusion, FullDropGateEqualsVanilla) {
  const Dataset d = synth_gaussian_mixture(150, 4, 2, 3.0, 0.0, 9);
  auto hp = small_hp();
  hp.drop_gate = 1.0;
  auto old_model = std::make_shared<const EncoderClassifier>(train_vanilla(arch_for(4, {8}, 2), d, hp, Role::old_model));
  const auto new_arch = arch_for(4, {12}, 2);
  const auto gf = train_gated_fusion(old_model, d, new_arch, d, hp);
  const auto vanilla = train_vanilla(new_arch, d, hp);
  EXPECT_EQ(param_values(gf.new_model), param_values(vanilla));
}

TEST(GatedFusion, Preconditions) {
  const Dataset d = synth_gaussian_mixture(40, 4, 2, 3.0, 0.0, 9);
  auto hp = small_hp();
  auto unfrozen = std::make_shared<const EncoderClassifier>(train_vanilla(arch_for(4, {8}, 2), d, hp));
  EXPECT_THROW(train_gated_fusion(unfrozen, d, arch_for(4, {8}, 2), d, hp), ContractViolation);
  EXPECT_THROW(train_gated_fusion(nullptr, d, arch_for(4, {8}, 2), d, hp), ContractViolation);
  auto old_model = std::make_shared<const EncoderClassifier>(train_vanilla(arch_for(4, {8}, 2), d, hp, Role::old_model));
  hp.epochs = 1;
  EXPECT_THROW(train_gated_fusion(old_model, d, arch_for(4, {8}, 2), d, hp), ConfigError);
}

TEST(Distill, MaskedLossMatchesScalarLoop) {
  Rng r(31);
  const Tensor lo = random_tensor(12, 4, r, 2.0), ln = random_tensor(12, 4, r, 2.0);
  const std::vector<int> y{0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3};
  const double lambda = 0.7, t = 2.0;
  const auto dl = distill_loss(lo, ln, y, lambda, t);

  auto softmax = [](std::span<const double> row, double temp) {
    std::vector<double> p(row.size());
    double m = row[0];
    for (double v : row) m = std::max(m, v);
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) s += p[j] = std::exp((row[j] - m) / temp);
    for (double& v : p) v /= s;
    return p;
  };
  double total = 0.0;
  std::size_t masked = 0;
  for (std::size_t i = 0; i < 12; ++i) {
    const auto po = softmax(lo.row(i), 1.0), pn = softmax(ln.row(i), 1.0);
    const auto yi = static_cast<std::size_t>(y[i]);
    total += -std::log(pn[yi]);
    if (po[yi] > pn[yi]) {
      ++masked;
      EXPECT_EQ(dl.mask[i], 1.0);
      const auto to = softmax(lo.row(i), t), tn = softmax(ln.row(i), t);
      double kl = 0.0;
      for (std::size_t j = 0; j < 4; ++j) kl += to[j] * std::log(to[j] / tn[j]);
      total += lambda * kl;
    } else {
      EXPECT_EQ(dl.mask[i], 0.0);
    }
  }
  EXPECT_GT(masked, 0u);
  EXPECT_LT(masked, 12u);
  EXPECT_NEAR(dl.loss, total / 12.0, 1e-10);
}

TEST(Distill, NoTeacherSignalWhenNewWinsEverywhere) {
  const Tensor lo = Tensor::from_rows({{-50.0, 50.0}, {50.0, -50.0}});
  const Tensor ln = Tensor::from_rows({{0.1, 0.0}, {0.0, 0.2}});
  const std::vector<int> y{0, 1};
  const auto dl = distill_loss(lo, ln, y, 1.0, 1.0);
  const auto ce = softmax_cross_entropy(ln, y);
  EXPECT_EQ(dl.mask, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(dl.loss, ce.loss);
  EXPECT_EQ(dl.grad, ce.grad);
}

TEST(Distill, TrajectoryEqualsVanillaWhenOldAlwaysLoses) {
  // Label is the sign of x0; the old model puts all its mass on the other
  // class, so p_old(y) underflows to 0 and the KL term never switches on.
  Rng r(41);
  Dataset d;
  d.name = "fixture";
  d.num_classes = 2;
  d.features = Tensor(120, 3);
  for (std::size_t i = 0; i < 120; ++i) {
    auto row = d.features.row(i);
    for (double& v : row) v = r.normal();
    row[0] = (i % 2 == 0 ? 1.0 : -1.0) * (0.5 + std::abs(row[0]));
    d.ids.push_back(i);
    d.labels.push_back(row[0] > 0 ? 0 : 1);
  }
  ArchSpec old_arch = arch_for(3, {}, 2);
  Rng init(1);
  EncoderClassifier old_model(old_arch, Role::old_model, init);
  auto& w = old_model.head_layer().params()[0].value;
  w.fill(0.0);
  w(0, 0) = -2000.0;
  w(0, 1) = 2000.0;

  auto hp = small_hp();
  const auto new_arch = arch_for(3, {8}, 2);
  std::vector<double> distill_losses, vanilla_losses;
  const auto distilled = train_distill(old_model, d, new_arch, d, hp,
                                       [&](const TrainingEvent& e) { distill_losses.push_back(e.loss); });
  const auto vanilla = train_vanilla(new_arch, d, hp, Role::new_model,
                                     [&](const TrainingEvent& e) { vanilla_losses.push_back(e.loss); });
  EXPECT_EQ(distill_losses, vanilla_losses);
  EXPECT_EQ(param_values(distilled), param_values(vanilla));
}

TEST(Ensemble, MemberSeeds) {
  const auto five = ensemble_member_seeds(7, 5);
  const auto three = ensemble_member_seeds(7, 3);
  EXPECT_EQ(five[0], 7u);
  EXPECT_TRUE(std::equal(three.begin(), three.end(), five.begin()));
  EXPECT_EQ(std::set<std::uint64_t>(five.begin(), five.end()).size(), 5u);
  const Dataset d = synth_gaussian_mixture(40, 4, 2, 3.0, 0.0, 9);
  const std::vector<std::uint64_t> dup{1, 1};
  EXPECT_THROW(train_ensemble(arch_for(4, {4}, 2), d, small_hp(), dup), ConfigError);
}

TEST(AlphaSearch, MatchesBruteForce) {
  Rng r(51);
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor lo = random_tensor(80, 3, r, 2.0), ln = random_tensor(80, 3, r, 2.0);
    std::vector<int> y(80);
    for (auto& v : y) v = static_cast<int>(r.below(3));
    std::vector<ExampleId> ids(80);
    for (std::size_t i = 0; i < 80; ++i) ids[i] = i;
    for (const auto space : {EnsembleSpace::probability, EnsembleSpace::logit}) {
      const auto res = alpha_search(lo, ln, y, space);
      const auto old_p = predictions_from_logits(lo, ids, y);
      const double van = accuracy(predictions_from_logits(ln, ids, y).predicted, y);
      double best_a = 1.0, best_nfr = 2.0;
      bool any = false;
      for (double a : kDefaultAlphaGrid) {
        const auto p = weighted_ensemble(lo, ln, a, space, ids, y);
        if (accuracy(p.predicted, y) < van - kDefaultParityMargin) continue;
        const double nfr = negative_flip_rate(old_p.predicted, p.predicted, y).rate;
        if (!any || nfr < best_nfr || (nfr == best_nfr && a > best_a)) best_a = a, best_nfr = nfr;
        any = true;
      }
      EXPECT_EQ(res.feasible, any);
      EXPECT_EQ(res.alpha, any ? best_a : 1.0);
      EXPECT_EQ(res.evaluations.size(), kDefaultAlphaGrid.size());
    }
  }
}

TEST(AlphaSearch, InfeasibleFallsBackToNewModel) {
  // Old is always confidently wrong, new always right: every mix that lets the
  // old model win somewhere loses accuracy.
  const Tensor lo = Tensor::from_rows({{0.0, 20.0}, {20.0, 0.0}, {0.0, 20.0}});
  const Tensor ln = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}});
  const std::vector<int> y{0, 1, 0};
  const auto res = alpha_search(lo, ln, y, EnsembleSpace::logit);
  EXPECT_FALSE(res.feasible);
  EXPECT_EQ(res.alpha, 1.0);
}

TEST(AlphaSearch, TiesPreferLargerAlpha) {
  const Tensor l = Tensor::from_rows({{2.0, 0.0}, {0.0, 2.0}});
  const std::vector<int> y{0, 1};
  EXPECT_EQ(alpha_search(l, l, y, EnsembleSpace::probability).alpha, 0.9);
}
