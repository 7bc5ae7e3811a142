#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gatefuse/config.hpp"
#include "gatefuse/report.hpp"

namespace gatefuse {

// A dataset split and seen through one scenario's old and new feature views.
struct PreparedData {
  std::string scenario;
  std::string dataset;
  UpgradeScenario spec;
  Dataset old_train, old_dev, new_train, new_dev;
  std::string provenance;
};

Dataset load_dataset(const DatasetSpec& spec);
std::vector<PreparedData> prepare_data(const ExperimentConfig& config);

struct RunFailure {
  std::string scenario;
  std::string dataset;
  std::string method;
  std::uint64_t seed = 0;
  std::string message;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;  // deterministic order
  std::vector<RunFailure> failures;
  bool ok() const { return failures.empty(); }
};

struct RunOptions {
  std::size_t jobs = 1;
  bool write_files = true;
  std::function<void(const std::string&)> log;
};

// Trains the old model once per (scenario, dataset, seed), then every listed
// method, and evaluates on dev. Independent (scenario, dataset, seed) units
// run on up to `jobs` threads; each unit is sequential and rows are merged in
// config order, so results do not depend on `jobs`. A failing method is
// recorded and the remaining runs continue.
//
// With write_files the output directory receives
//   <scenario>-<dataset>/<method>/<seed>/{model, predictions.tsv, report.json}
//   results.csv, summary.md, manifest.json
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// The rows for one unit; exposed for tests and the cache-sim command.
ExperimentResult run_unit(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed,
                          const std::filesystem::path& out_dir = {},
                          const std::function<void(const std::string&)>& log = {});

// Seed used for the old model of a run anchored at `seed`.
std::uint64_t old_model_seed(std::uint64_t seed);
// Seed of the logit-cache subset for a run anchored at `seed`.
std::uint64_t cache_seed(std::uint64_t seed);

std::string variant_for_cache(double coverage);
std::string variant_for_ensemble(std::size_t k);

}  // namespace gatefuse
