#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gatefuse/metrics.hpp"

namespace gatefuse {

// One evaluated (scenario, dataset, method, variant, seed). variant is
// "main" for the summary table, "k=<n>" for ensemble sweeps and
// "cache=<X>" for cache sweeps.
struct ResultRow {
  std::string scenario;
  std::string dataset;
  std::string method;
  std::string variant = "main";
  EvalReport report;
  std::optional<double> alpha;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

const std::vector<std::string>& results_csv_columns();

void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
std::string results_csv(const std::vector<ResultRow>& rows);
// Throws ConfigError naming the first missing column; ParseError on bad cells.
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);
std::vector<ResultRow> parse_results_csv(const std::string& text);

// Percent with two decimals, e.g. 0.12345 -> "12.35".
std::string percent(double fraction);

// Summary table per (scenario, dataset): methods x Accuracy, R_NF (mean ±
// sample std), relative R_NF reduction vs vanilla_new, fix rate and new
// fault rate. Cache and ensemble sweeps follow when rows for them exist.
std::string render_markdown(const std::vector<ResultRow>& rows);

}  // namespace gatefuse
