#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "gatefuse/cache.hpp"
#include "gatefuse/errors.hpp"

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

struct Fixture {
  std::shared_ptr<const EncoderClassifier> old_model;
  GatedFusionModel gf;
  PairedSplit eval;
};

Fixture make_fixture(std::size_t n, std::uint64_t seed = 1) {
  Rng init(seed), r(seed + 100);
  auto old_model = std::make_shared<const EncoderClassifier>(arch_for(5, {8}, 3), Role::old_model, init);
  GatedFusionModel gf{old_model, EncoderClassifier(arch_for(6, {9}, 3), Role::new_model, init),
                      GateNetwork(9, 0.1, init), 1.0};
  PairedSplit eval;
  eval.old_features = random_tensor(n, 5, r);
  eval.new_features = random_tensor(n, 6, r);
  for (std::size_t i = 0; i < n; ++i) {
    eval.ids.push_back(1000 + i);
    eval.labels.push_back(static_cast<int>(r.below(3)));
  }
  return {old_model, std::move(gf), std::move(eval)};
}

std::set<ExampleId> cached_ids(const LogitCache& c) {
  std::set<ExampleId> s;
  for (std::size_t i = 0; i < c.size(); ++i) s.insert(c.id(i));
  return s;
}

}  // namespace

TEST(LogitCache, CraftedLookup) {
  LogitCache cache(2, 2, 1.0, 0);
  const std::vector<double> k1{0.0, 0.0}, k2{3.0, 4.0}, k3{-3.0, -4.0};
  const std::vector<double> l1{1.0, 0.0}, l2{0.0, 1.0}, l3{5.0, 5.0};
  cache.insert(7, k1, l1);
  cache.insert(9, k2, l2);
  cache.insert(4, k3, l3);
  const std::vector<double> q{2.5, 3.0};
  const auto hit = cache.lookup(q);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->id, 9u);
  EXPECT_NEAR(hit->distance, std::sqrt(0.25 + 1.0), 1e-12);
  EXPECT_EQ(hit->old_logits[1], 1.0);

  // (0,0) is 5 away from both outer keys; the smaller id wins.
  LogitCache tie(2, 2, 1.0, 0);
  tie.insert(9, k2, l2);
  tie.insert(4, k3, l3);
  EXPECT_EQ(tie.lookup(k1)->id, 4u);

  EXPECT_THROW(cache.insert(7, k1, l1), ContractViolation);
  EXPECT_THROW(cache.insert(8, std::vector<double>{1.0}, l1), DimensionError);
  EXPECT_FALSE(LogitCache(2, 2, 0.0, 0).lookup(q).has_value());
  EXPECT_EQ(cache.find(4), 2u);
  EXPECT_FALSE(cache.find(5).has_value());
}

TEST(LogitCache, SizeAndNestingAcrossCoverage) {
  const auto f = make_fixture(101);
  std::set<ExampleId> previous;
  for (double x : {0.0, 0.1, 0.25, 0.5, 0.75, 1.0}) {
    const auto cache = build_cache(f.eval, *f.old_model, f.gf.new_model, x, 42);
    EXPECT_EQ(cache.size(), static_cast<std::size_t>(std::llround(x * 101.0)));
    const auto ids = cached_ids(cache);
    EXPECT_TRUE(std::includes(ids.begin(), ids.end(), previous.begin(), previous.end()));
    previous = ids;
  }
  EXPECT_NE(cached_ids(build_cache(f.eval, *f.old_model, f.gf.new_model, 0.3, 1)),
            cached_ids(build_cache(f.eval, *f.old_model, f.gf.new_model, 0.3, 2)));
  EXPECT_THROW(build_cache(f.eval, *f.old_model, f.gf.new_model, 1.5, 1), ParameterError);
}

TEST(LogitCache, FullCoverageEqualsGatedFusion) {
  const auto f = make_fixture(300);
  const auto cache = build_cache(f.eval, *f.old_model, f.gf.new_model, 1.0, 5);
  const auto full = gf_predict(f.gf, f.eval);
  const auto cached = gf_predict_with_cache(f.gf, cache, f.eval);
  EXPECT_EQ(cached.predicted, full.predicted);
  EXPECT_EQ(cached.probabilities, full.probabilities);
}

TEST(LogitCache, MissesUseNearestKey) {
  const auto f = make_fixture(200);
  const auto cache = build_cache(f.eval, *f.old_model, f.gf.new_model, 0.5, 5);
  const Tensor e = f.gf.new_model.encode(f.eval.new_features);
  const Tensor l_new = f.gf.new_model.head(e);
  const auto alpha = f.gf.gate.alpha(e);
  Tensor l_old(200, 3);
  for (std::size_t i = 0; i < 200; ++i) {
    const auto own = cache.find(f.eval.ids[i]);
    const auto src = own ? cache.logits(*own) : cache.lookup(e.row(i))->old_logits;
    std::copy(src.begin(), src.end(), l_old.row(i).begin());
  }
  const auto expected = predictions_from_logits(fuse_logits(l_old, l_new, alpha, 1.0), f.eval.ids, f.eval.labels);
  EXPECT_EQ(gf_predict_with_cache(f.gf, cache, f.eval).probabilities, expected.probabilities);
}

TEST(LogitCache, EmptyCacheDropsOldModel) {
  auto f = make_fixture(200);
  const auto cache = build_cache(f.eval, *f.old_model, f.gf.new_model, 0.0, 5);
  const auto dropped = drop_old_predict(f.gf, f.eval);
  const auto cached = gf_predict_with_cache(f.gf, cache, f.eval);
  EXPECT_EQ(cached.predicted, dropped.predicted);
  EXPECT_EQ(cached.probabilities, dropped.probabilities);
  f.gf.old_model = nullptr;
  EXPECT_EQ(drop_old_predict(f.gf, f.eval).predicted, dropped.predicted);
}

TEST(LogitCache, DropOldArgmaxIsNewArgmax) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto f = make_fixture(1000, seed);
    const auto p = drop_old_predict(f.gf, f.eval);
    const Tensor l_new = f.gf.new_model.logits(f.eval.new_features);
    for (std::size_t i = 0; i < p.size(); ++i)
      ASSERT_EQ(p.predicted[i], static_cast<int>(argmax(l_new.row(i))));
  }
}

TEST(LogitCache, FileRoundTrip) {
  const auto f = make_fixture(64);
  const auto cache = build_cache(f.eval, *f.old_model, f.gf.new_model, 0.5, 3);
  const auto path = std::filesystem::temp_directory_path() / "gatefuse_test_cache.bin";
  save_cache(cache, path);
  EXPECT_EQ(load_cache(path), cache);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(load_cache(path), ParseError);
  std::filesystem::remove(path);
}
