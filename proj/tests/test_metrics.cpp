#include <gtest/gtest.h>

#include <cmath>

#include "gatefuse/errors.hpp"
#include "gatefuse/metrics.hpp"
#include "gatefuse/rng.hpp"

using namespace gatefuse;

namespace {

struct Triple {
  std::vector<int> old_pred, new_pred, vanilla_pred, labels;
};

Triple random_triple(Rng& rng) {
  const auto n = static_cast<std::size_t>(1 + rng.below(200));
  const auto c = static_cast<int>(2 + rng.below(4));
  Triple t;
  for (std::size_t i = 0; i < n; ++i) {
    t.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(c))));
    // Bias towards the label so all four flip categories show up.
    auto draw = [&] {
      return rng.uniform() < 0.6 ? t.labels.back() : static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
    };
    t.old_pred.push_back(draw());
    t.new_pred.push_back(draw());
    t.vanilla_pred.push_back(draw());
  }
  return t;
}

Predictions as_predictions(const std::vector<int>& pred, const std::vector<int>& labels) {
  Predictions p;
  for (std::size_t i = 0; i < pred.size(); ++i) p.ids.push_back(i);
  p.gold = labels;
  p.predicted = pred;
  p.probabilities = Tensor(pred.size(), 6, 1.0 / 6.0);
  return p;
}

}  // namespace

TEST(Metrics, HandExample) {
  const std::vector<int> y{0, 1, 1, 0, 2};
  const std::vector<int> old_p{0, 1, 0, 1, 2};
  const std::vector<int> new_p{1, 1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(accuracy(new_p, y), 0.6);
  const auto nf = negative_flip_rate(old_p, new_p, y);
  EXPECT_EQ(nf.count, 2u);
  EXPECT_DOUBLE_EQ(nf.rate, 0.4);
  EXPECT_EQ(positive_flip_rate(old_p, new_p, y).count, 2u);
  EXPECT_THROW(negative_flip_rate(old_p, std::vector<int>{0}, y), ContractViolation);
}

TEST(Metrics, FixFaultWorkedExample) {
  // 20 vanilla flips; the candidate fixes 16 and adds 4 new ones.
  std::vector<int> y(40, 0), old_p(40, 0), vanilla(40, 0), cand(40, 0);
  for (int i = 0; i < 20; ++i) vanilla[i] = 1;
  for (int i = 16; i < 24; ++i) cand[i] = 1;
  const auto ff = fix_and_fault_rates(vanilla, cand, old_p, y);
  EXPECT_EQ(ff.vanilla_flips, 20u);
  EXPECT_EQ(ff.fixed, 16u);
  EXPECT_EQ(ff.new_faults, 4u);
  EXPECT_DOUBLE_EQ(*ff.fix_rate, 0.8);
  EXPECT_DOUBLE_EQ(*ff.new_fault_rate, 0.2);
  EXPECT_EQ(negative_flip_rate(old_p, cand, y).count, 8u);
}

TEST(Metrics, NoVanillaFlipsLeavesRatesEmpty) {
  const std::vector<int> y{0, 1}, p{0, 1};
  const auto ff = fix_and_fault_rates(p, p, p, y);
  EXPECT_FALSE(ff.fix_rate.has_value());
  EXPECT_FALSE(ff.new_fault_rate.has_value());
  EXPECT_FALSE(nfr_over_error(0.0, 1.0).has_value());
  EXPECT_FALSE(relative_reduction(0.0, 0.1).has_value());
  EXPECT_DOUBLE_EQ(*relative_reduction(0.04, 0.01), 0.75);
}

TEST(Metrics, RandomTriplesMatchEnumeration) {
  Rng rng(2022);
  for (int trial = 0; trial < 1000; ++trial) {
    const Triple t = random_triple(rng);
    const std::size_t n = t.labels.size();
    std::size_t neg = 0, pos = 0, old_ok = 0, new_ok = 0, vflips = 0, fixed = 0, faults = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool o = t.old_pred[i] == t.labels[i];
      const bool c = t.new_pred[i] == t.labels[i];
      const bool v = t.vanilla_pred[i] == t.labels[i];
      old_ok += o;
      new_ok += c;
      neg += o && !c;
      pos += !o && c;
      vflips += o && !v;
      fixed += o && !v && c;
      faults += o && v && !c;
    }
    const auto nf = negative_flip_rate(t.old_pred, t.new_pred, t.labels);
    ASSERT_EQ(nf.count, neg);
    ASSERT_EQ(nf.rate, static_cast<double>(neg) / static_cast<double>(n));
    ASSERT_EQ(positive_flip_rate(t.old_pred, t.new_pred, t.labels).count, pos);
    const double delta = accuracy(t.new_pred, t.labels) - accuracy(t.old_pred, t.labels);
    ASSERT_EQ(static_cast<long>(new_ok) - static_cast<long>(old_ok),
              static_cast<long>(pos) - static_cast<long>(neg));
    ASSERT_NEAR(delta, (static_cast<double>(pos) - static_cast<double>(neg)) / static_cast<double>(n), 1e-15);
    const auto ff = fix_and_fault_rates(t.vanilla_pred, t.new_pred, t.old_pred, t.labels);
    ASSERT_EQ(ff.vanilla_flips, vflips);
    ASSERT_EQ(ff.fixed, fixed);
    ASSERT_EQ(ff.new_faults, faults);
    ASSERT_EQ(neg, vflips - fixed + faults);
    if (vflips > 0) {
      ASSERT_EQ(*ff.fix_rate, static_cast<double>(fixed) / static_cast<double>(vflips));
      ASSERT_EQ(*ff.new_fault_rate, static_cast<double>(faults) / static_cast<double>(vflips));
    }
  }
}

TEST(Metrics, EvaluateAgreesWithPieces) {
  Rng rng(9);
  const Triple t = random_triple(rng);
  const auto old_p = as_predictions(t.old_pred, t.labels);
  const auto cand = as_predictions(t.new_pred, t.labels);
  const auto van = as_predictions(t.vanilla_pred, t.labels);
  const auto r = evaluate(old_p, cand, &van, 17);
  EXPECT_EQ(r.seed, 17u);
  EXPECT_EQ(r.n_examples, t.labels.size());
  EXPECT_EQ(r.negative_flip_count, negative_flip_rate(t.old_pred, t.new_pred, t.labels).count);
  EXPECT_EQ(r.negative_flip_count, r.vanilla_flip_count - r.fixed_count + r.new_fault_count);
  const auto without = evaluate(old_p, cand, nullptr, 17);
  EXPECT_FALSE(without.fix_rate.has_value());

  auto shifted = cand;
  shifted.ids.back() += 1000;
  EXPECT_THROW(evaluate(old_p, shifted, nullptr, 1), ContractViolation);
}

TEST(Metrics, AggregateMeanAndSampleStd) {
  std::vector<EvalReport> reports(3);
  const double acc[] = {0.8, 0.9, 1.0};
  for (int i = 0; i < 3; ++i) {
    reports[i].accuracy = acc[i];
    reports[i].seed = static_cast<std::uint64_t>(i + 1);
  }
  const auto agg = aggregate(reports);
  EXPECT_EQ(agg.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_NEAR(agg.metrics.at("accuracy").mean, 0.9, 1e-15);
  EXPECT_NEAR(agg.metrics.at("accuracy").stddev, 0.1, 1e-15);
  const std::vector<double> one{0.5};
  EXPECT_EQ(summarize(one).stddev, 0.0);
}
