#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gatefuse/checkpoint.hpp"
#include "gatefuse/errors.hpp"
#include "gatefuse/fusion.hpp"
#include "gatefuse/models.hpp"

using namespace gatefuse;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

ArchSpec small_arch(std::size_t in, std::vector<std::size_t> hidden, std::size_t c = 3) {
  ArchSpec a;
  a.input_dim = in;
  a.hidden = std::move(hidden);
  a.num_classes = c;
  return a;
}

std::vector<ExampleId> iota_ids(std::size_t n) {
  std::vector<ExampleId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("gatefuse_test_" + name);
}

}  // namespace

TEST(Classifier, ShapesAndEvalDeterminism) {
  Rng init(1), r(2);
  const auto model = build_classifier(small_arch(5, {8, 6}), Role::new_model, init);
  const Tensor x = random_tensor(4, 5, r);
  EXPECT_EQ(model.embedding_dim(), 6u);
  const Tensor e = model.encode(x);
  EXPECT_EQ(e.rows(), 4u);
  EXPECT_EQ(e.cols(), 6u);
  EXPECT_EQ(model.encode(x), e);
  EXPECT_EQ(model.logits(x), model.head(e));
  EXPECT_THROW(model.encode(random_tensor(4, 3, r)), DimensionError);
}

TEST(Classifier, RowsAreIndependentOfBatch) {
  Rng init(1), r(3);
  const auto model = build_classifier(small_arch(5, {8}), Role::new_model, init);
  const Tensor x = random_tensor(6, 5, r);
  const Tensor all = model.logits(x);
  for (std::size_t i = 0; i < 6; ++i) {
    const std::vector<std::size_t> one{i};
    EXPECT_EQ(model.logits(x.gather_rows(one)), all.gather_rows(one));
  }
}

TEST(Classifier, OldRoleIsFrozen) {
  Rng init(1);
  auto old_model = build_classifier(small_arch(4, {8}), Role::old_model, init);
  EXPECT_TRUE(old_model.frozen());
  auto new_model = build_classifier(small_arch(4, {8}), Role::new_model, init);
  EXPECT_FALSE(new_model.frozen());
  new_model.set_role(Role::old_model);
  EXPECT_TRUE(new_model.frozen());
}

TEST(Gate, AlphaInsideUnitInterval) {
  Rng init(4), r(5);
  const GateNetwork gate(16, 0.1, init);
  const auto alpha = gate.alpha(random_tensor(50, 16, r, 10.0));
  ASSERT_EQ(alpha.size(), 50u);
  for (double a : alpha) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  EXPECT_THROW(gate.alpha(Tensor(2, 15)), DimensionError);
}

TEST(Gate, LayerStack) {
  Rng init(4);
  const GateNetwork gate(10, 0.2, init);
  const auto& layers = gate.layers().layers();
  ASSERT_EQ(layers.size(), 7u);
  const std::vector<LayerKind> kinds{LayerKind::dropout, LayerKind::linear, LayerKind::layer_norm, LayerKind::relu,
                                     LayerKind::dropout, LayerKind::linear, LayerKind::sigmoid};
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(layers[i].spec().kind, kinds[i]);
  EXPECT_EQ(layers[1].spec().out, 64u);
  EXPECT_EQ(layers[5].spec().out, 1u);
}

TEST(Fusion, IdentitiesAtAlphaBounds) {
  Rng r(6);
  const Tensor lo = random_tensor(40, 4, r, 3.0), ln = random_tensor(40, 4, r, 3.0);
  EXPECT_EQ(fuse_logits(lo, ln, std::vector<double>(40, 1.0), 1.0), ln);
  EXPECT_EQ(fuse_logits(lo, ln, std::vector<double>(40, 1.0), 0.3), ln);
  EXPECT_EQ(fuse_logits(lo, ln, std::vector<double>(40, 0.0), 1.0), lo);
}

TEST(Fusion, ConvexCombinationExample) {
  const auto out = fuse_logits(Tensor::from_rows({{2.0, 0.0}}), Tensor::from_rows({{0.0, 4.0}}),
                               std::vector<double>{0.25}, 2.0);
  EXPECT_DOUBLE_EQ(out(0, 0), 0.75 * 1.0);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.25 * 4.0);
}

TEST(Fusion, RejectsBadArguments) {
  const Tensor l(2, 3);
  EXPECT_THROW(fuse_logits(l, l, std::vector<double>{0.5, 0.5}, 0.0), ParameterError);
  EXPECT_THROW(fuse_logits(l, l, std::vector<double>{0.5, 1.5}, 1.0), ParameterError);
  EXPECT_THROW(fuse_logits(l, l, std::vector<double>{0.5}, 1.0), DimensionError);
  EXPECT_THROW(fuse_logits(l, Tensor(2, 4), std::vector<double>{0.5, 0.5}, 1.0), DimensionError);
}

TEST(Fusion, GfPredictMatchesManualFusion) {
  Rng init(7), r(8);
  auto old_model = std::make_shared<EncoderClassifier>(small_arch(5, {6}), Role::old_model, init);
  GatedFusionModel gf{old_model, EncoderClassifier(small_arch(4, {7}), Role::new_model, init),
                      GateNetwork(7, 0.1, init), 1.5};
  PairedSplit batch{random_tensor(9, 5, r), random_tensor(9, 4, r), iota_ids(9), std::vector<int>(9, 1)};
  const auto p = gf_predict(gf, batch);
  const Tensor fused = fuse_logits(old_model->logits(batch.old_features), gf.new_model.logits(batch.new_features),
                                   gf.gate.alpha(gf.new_model.encode(batch.new_features)), 1.5);
  const Tensor probs = softmax_rows(fused);
  EXPECT_LT(max_abs_diff(p.probabilities, probs), 1e-15);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(p.predicted[i], static_cast<int>(argmax(fused.row(i))));
  gf.old_model = nullptr;
  EXPECT_THROW(gf_predict(gf, batch), ContractViolation);
}

TEST(Ensemble, WeightedBoundsRecoverMembers) {
  Rng r(9);
  const Tensor lo = random_tensor(30, 3, r, 2.0), ln = random_tensor(30, 3, r, 2.0);
  const auto ids = iota_ids(30);
  const std::vector<int> gold(30, 0);
  const auto old_p = predictions_from_logits(lo, ids, gold);
  const auto new_p = predictions_from_logits(ln, ids, gold);
  for (const auto space : {EnsembleSpace::probability, EnsembleSpace::logit}) {
    EXPECT_EQ(weighted_ensemble(lo, ln, 1.0, space, ids, gold).predicted, new_p.predicted);
    EXPECT_EQ(weighted_ensemble(lo, ln, 0.0, space, ids, gold).predicted, old_p.predicted);
    EXPECT_THROW(weighted_ensemble(lo, ln, 1.1, space, ids, gold), ParameterError);
  }
  const auto mix = weighted_ensemble(lo, ln, 0.7, EnsembleSpace::probability, ids, gold);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      EXPECT_NEAR(mix.probabilities(i, c), 0.3 * old_p.probabilities(i, c) + 0.7 * new_p.probabilities(i, c), 1e-15);
}

TEST(Ensemble, MajorityVoteAndTieBreak) {
  const std::vector<ExampleId> ids{0, 1};
  const std::vector<int> gold{0, 0};
  auto member = [&](std::initializer_list<std::initializer_list<double>> rows) {
    return predictions_from_probabilities(Tensor::from_rows(rows), ids, gold);
  };
  const std::vector<Predictions> three{member({{0.6, 0.3, 0.1}, {0.2, 0.7, 0.1}}),
                                       member({{0.1, 0.8, 0.1}, {0.1, 0.6, 0.3}}),
                                       member({{0.5, 0.4, 0.1}, {0.1, 0.1, 0.8}})};
  const auto v = majority_vote(three);
  EXPECT_EQ(v.predicted[0], 0);
  EXPECT_EQ(v.predicted[1], 1);
  EXPECT_NEAR(v.probabilities(0, 0), 2.0 / 3.0, 1e-15);

  const std::vector<Predictions> two{member({{0.9, 0.1, 0.0}, {0.45, 0.55, 0.0}}),
                                     member({{0.4, 0.6, 0.0}, {0.8, 0.2, 0.0}})};
  const auto t = majority_vote(two);
  EXPECT_EQ(t.predicted[0], 0);
  EXPECT_EQ(t.predicted[1], 0);

  const std::vector<Predictions> one{three[1]};
  EXPECT_EQ(majority_vote(one).predicted, three[1].predicted);
  EXPECT_THROW(majority_vote(std::span<const Predictions>{}), ContractViolation);
}

TEST(Predictions, TsvRoundTrip) {
  Rng r(10);
  const auto p = predictions_from_logits(random_tensor(12, 3, r), iota_ids(12), std::vector<int>(12, 2));
  const auto path = temp_path("preds.tsv");
  write_predictions_tsv(p, path);
  const auto q = read_predictions_tsv(path);
  EXPECT_EQ(q.ids, p.ids);
  EXPECT_EQ(q.gold, p.gold);
  EXPECT_EQ(q.predicted, p.predicted);
  EXPECT_EQ(q.probabilities, p.probabilities);
  std::filesystem::remove(path);
}

TEST(Checkpoint, ClassifierRoundTripIsExact) {
  Rng init(11), r(12);
  const auto model = build_classifier(small_arch(5, {8, 4}), Role::old_model, init);
  const auto path = temp_path("model.bin");
  save_classifier(model, path);
  const auto back = load_classifier(path);
  EXPECT_EQ(back.arch(), model.arch());
  EXPECT_EQ(back.role(), Role::old_model);
  EXPECT_TRUE(back.frozen());
  const Tensor x = random_tensor(7, 5, r);
  EXPECT_EQ(back.logits(x), model.logits(x));
  std::filesystem::remove(path);
}

TEST(Checkpoint, GatedFusionRoundTripIsExact) {
  Rng init(13), r(14);
  auto old_model = std::make_shared<EncoderClassifier>(small_arch(4, {5}), Role::old_model, init);
  const GatedFusionModel gf{old_model, EncoderClassifier(small_arch(4, {6}), Role::new_model, init),
                            GateNetwork(6, 0.1, init), 0.8};
  const auto path = temp_path("gf.bin");
  save_gated_fusion(gf, path);
  const auto back = load_gated_fusion(path, old_model);
  EXPECT_DOUBLE_EQ(back.temperature, 0.8);
  PairedSplit batch{random_tensor(8, 4, r), random_tensor(8, 4, r), iota_ids(8), std::vector<int>(8, 0)};
  EXPECT_EQ(gf_predict(back, batch).probabilities, gf_predict(gf, batch).probabilities);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsGarbage) {
  const auto path = temp_path("garbage.bin");
  {
    std::ofstream out(path);
    out << "not a model\n";
  }
  EXPECT_THROW(load_classifier(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST(Scenario, BuiltInFamilies) {
  const auto up = make_scenario(ScenarioFamily::scale_up, true, 2, 0, 512);
  EXPECT_EQ(up.old_arch.hidden, (std::vector<std::size_t>{32}));
  EXPECT_EQ(up.new_arch.hidden, (std::vector<std::size_t>{128, 128}));
  EXPECT_EQ(up.old_view, up.new_view);
  const auto d = make_scenario(ScenarioFamily::distinct, true, 2, 0, 512);
  EXPECT_EQ(d.old_arch.activation, Activation::relu);
  EXPECT_EQ(d.new_arch.activation, Activation::tanh);
  EXPECT_NE(d.old_view, d.new_view);
  EXPECT_EQ(scenario_family_from_string("distinct"), ScenarioFamily::distinct);
  EXPECT_THROW(scenario_family_from_string("bigger"), ConfigError);
}
