#include "gatefuse/metrics.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "gatefuse/errors.hpp"

namespace gatefuse {

namespace {

void require_lengths(std::size_t a, std::size_t b, std::size_t c, const char* what) {
  if (a != b || b != c) throw ContractViolation(std::string(what) + ": prediction sets are not aligned");
}

}  // namespace

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw ContractViolation("accuracy: length mismatch");
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

FlipRate negative_flip_rate(std::span<const int> old_pred, std::span<const int> new_pred,
                            std::span<const int> labels) {
  require_lengths(old_pred.size(), new_pred.size(), labels.size(), "negative_flip_rate");
  FlipRate r;
  for (std::size_t i = 0; i < labels.size(); ++i)
    r.count += old_pred[i] == labels[i] && new_pred[i] != labels[i];
  r.rate = labels.empty() ? 0.0 : static_cast<double>(r.count) / static_cast<double>(labels.size());
  return r;
}

FlipRate positive_flip_rate(std::span<const int> old_pred, std::span<const int> new_pred,
                            std::span<const int> labels) {
  require_lengths(old_pred.size(), new_pred.size(), labels.size(), "positive_flip_rate");
  FlipRate r;
  for (std::size_t i = 0; i < labels.size(); ++i)
    r.count += old_pred[i] != labels[i] && new_pred[i] == labels[i];
  r.rate = labels.empty() ? 0.0 : static_cast<double>(r.count) / static_cast<double>(labels.size());
  return r;
}

FixFaultRates fix_and_fault_rates(std::span<const int> vanilla_pred, std::span<const int> candidate_pred,
                                  std::span<const int> old_pred, std::span<const int> labels) {
  require_lengths(vanilla_pred.size(), candidate_pred.size(), labels.size(), "fix_and_fault_rates");
  require_lengths(old_pred.size(), labels.size(), labels.size(), "fix_and_fault_rates");
  FixFaultRates r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (old_pred[i] != labels[i]) continue;
    const bool vanilla_flip = vanilla_pred[i] != labels[i];
    const bool candidate_flip = candidate_pred[i] != labels[i];
    r.vanilla_flips += vanilla_flip;
    r.fixed += vanilla_flip && !candidate_flip;
    r.new_faults += candidate_flip && !vanilla_flip;
  }
  if (r.vanilla_flips > 0) {
    const double v = static_cast<double>(r.vanilla_flips);
    r.fix_rate = static_cast<double>(r.fixed) / v;
    r.new_fault_rate = static_cast<double>(r.new_faults) / v;
  }
  return r;
}

std::optional<double> nfr_over_error(double nfr, double acc) {
  if (!(acc < 1.0)) return std::nullopt;
  return nfr / (1.0 - acc);
}

std::optional<double> relative_reduction(double nfr_baseline, double nfr_candidate) {
  if (!(nfr_baseline > 0.0)) return std::nullopt;
  return (nfr_baseline - nfr_candidate) / nfr_baseline;
}

EvalReport evaluate(const Predictions& old_preds, const Predictions& candidate,
                    const Predictions* vanilla, std::uint64_t seed) {
  require_aligned(old_preds, candidate, "evaluate");
  EvalReport r;
  r.seed = seed;
  r.n_examples = candidate.size();
  r.accuracy = accuracy(candidate.predicted, candidate.gold);
  const auto nf = negative_flip_rate(old_preds.predicted, candidate.predicted, candidate.gold);
  r.negative_flip_rate = nf.rate;
  r.negative_flip_count = nf.count;
  r.positive_flip_count = positive_flip_rate(old_preds.predicted, candidate.predicted, candidate.gold).count;
  r.nfr_over_error = gatefuse::nfr_over_error(r.negative_flip_rate, r.accuracy);
  if (vanilla != nullptr) {
    require_aligned(old_preds, *vanilla, "evaluate");
    const auto ff = fix_and_fault_rates(vanilla->predicted, candidate.predicted, old_preds.predicted,
                                        candidate.gold);
    r.vanilla_flip_count = ff.vanilla_flips;
    r.fixed_count = ff.fixed;
    r.new_fault_count = ff.new_faults;
    r.fix_rate = ff.fix_rate;
    r.new_fault_rate = ff.new_fault_rate;
  }
  return r;
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::vector<std::pair<std::string, double>> report_fields(const EvalReport& r) {
  std::vector<std::pair<std::string, double>> f{
      {"accuracy", r.accuracy},
      {"negative_flip_rate", r.negative_flip_rate},
      {"negative_flip_count", static_cast<double>(r.negative_flip_count)},
      {"positive_flip_count", static_cast<double>(r.positive_flip_count)},
  };
  if (r.nfr_over_error) f.emplace_back("nfr_over_error", *r.nfr_over_error);
  if (r.fix_rate) f.emplace_back("fix_rate", *r.fix_rate);
  if (r.new_fault_rate) f.emplace_back("new_fault_rate", *r.new_fault_rate);
  return f;
}

SeedAggregate aggregate(std::span<const EvalReport> reports) {
  SeedAggregate agg;
  std::map<std::string, std::vector<double>> columns;
  for (const auto& r : reports) {
    agg.seeds.push_back(r.seed);
    for (const auto& [name, value] : report_fields(r)) columns[name].push_back(value);
  }
  for (const auto& [name, values] : columns) agg.metrics[name] = summarize(values);
  return agg;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n_examples"] = r.n_examples;
  j["seed"] = r.seed;
  j["accuracy"] = r.accuracy;
  j["negative_flip_rate"] = r.negative_flip_rate;
  j["negative_flip_count"] = r.negative_flip_count;
  j["positive_flip_count"] = r.positive_flip_count;
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  j["nfr_over_error"] = opt(r.nfr_over_error);
  j["fix_rate"] = opt(r.fix_rate);
  j["new_fault_rate"] = opt(r.new_fault_rate);
  j["vanilla_flip_count"] = r.vanilla_flip_count;
  j["fixed_count"] = r.fixed_count;
  j["new_fault_count"] = r.new_fault_count;
  return j.dump(2);
}

}  // namespace gatefuse
