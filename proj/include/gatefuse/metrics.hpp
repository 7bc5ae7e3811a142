#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gatefuse/fusion.hpp"

namespace gatefuse {

struct FlipRate {
  double rate = 0.0;
  std::size_t count = 0;
};

double accuracy(std::span<const int> predicted, std::span<const int> labels);

// |{old correct and new wrong}| / n. Throws ContractViolation on length mismatch.
FlipRate negative_flip_rate(std::span<const int> old_pred, std::span<const int> new_pred,
                            std::span<const int> labels);
// |{old wrong and new correct}| / n.
FlipRate positive_flip_rate(std::span<const int> old_pred, std::span<const int> new_pred,
                            std::span<const int> labels);

struct FixFaultRates {
  std::size_t vanilla_flips = 0;
  std::size_t fixed = 0;       // vanilla flips the candidate gets right
  std::size_t new_faults = 0;  // candidate flips absent from the vanilla flips
  // Both empty when the vanilla upgrade has no negative flips.
  std::optional<double> fix_rate;
  std::optional<double> new_fault_rate;
};

FixFaultRates fix_and_fault_rates(std::span<const int> vanilla_pred, std::span<const int> candidate_pred,
                                  std::span<const int> old_pred, std::span<const int> labels);

// R_NF / (1 - accuracy); empty when accuracy == 1.
std::optional<double> nfr_over_error(double nfr, double acc);
// (baseline - candidate) / baseline; empty when baseline == 0.
std::optional<double> relative_reduction(double nfr_baseline, double nfr_candidate);

struct EvalReport {
  std::size_t n_examples = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double negative_flip_rate = 0.0;
  std::size_t negative_flip_count = 0;
  std::size_t positive_flip_count = 0;
  std::optional<double> nfr_over_error;
  // Relative to a vanilla new-model upgrade, when one is supplied.
  std::optional<double> fix_rate;
  std::optional<double> new_fault_rate;
  std::size_t vanilla_flip_count = 0;
  std::size_t fixed_count = 0;
  std::size_t new_fault_count = 0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Candidate vs old on D_reg; `vanilla` enables fix/new-fault rates.
EvalReport evaluate(const Predictions& old_preds, const Predictions& candidate,
                    const Predictions* vanilla, std::uint64_t seed);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1); 0 when n == 1
  std::size_t count = 0;
};

MetricSummary summarize(std::span<const double> values);

struct SeedAggregate {
  std::vector<std::uint64_t> seeds;
  std::map<std::string, MetricSummary> metrics;
};

// Metrics whose value is absent in some reports are summarised over the
// reports that have it.
SeedAggregate aggregate(std::span<const EvalReport> reports);

// Named scalar fields of a report, in a fixed order; absent optionals skipped.
std::vector<std::pair<std::string, double>> report_fields(const EvalReport& r);

std::string report_to_json(const EvalReport& r);

}  // namespace gatefuse
