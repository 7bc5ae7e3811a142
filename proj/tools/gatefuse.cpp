#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gatefuse/errors.hpp"
#include "gatefuse/experiment.hpp"
#include "gatefuse/gradient_suite.hpp"
#include "gatefuse/kernels.hpp"

using namespace gatefuse;

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text, const char* source) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    try {
      seeds.push_back(std::stoull(item, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ConfigError(std::string(source) + ": '" + item + "' is not a seed");
  }
  if (seeds.empty()) throw ConfigError(std::string(source) + " lists no seeds");
  return seeds;
}

struct Common {
  std::string config;
  std::string out;
  std::string seeds;
  std::size_t jobs = 1;
  bool quiet = false;
};

ExperimentConfig load_with_overrides(const Common& c) {
  ExperimentConfig cfg = load_experiment_config(c.config);
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (const char* env = std::getenv("GATEFUSE_SEED"); env && *env) cfg.seeds = parse_seed_list(env, "GATEFUSE_SEED");
  if (!c.seeds.empty()) cfg.seeds = parse_seed_list(c.seeds, "--seeds");
  cfg.validate();
  return cfg;
}

RunOptions options_for(const Common& c) {
  RunOptions o;
  o.jobs = c.jobs;
  if (!c.quiet) o.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  return o;
}

void print_failures(const ExperimentResult& r) {
  for (const auto& f : r.failures)
    std::cerr << "FAILED " << f.scenario << "/" << f.dataset << " " << f.method << " seed " << f.seed << ": "
              << f.message << '\n';
}

int cmd_run(const Common& c) {
  const ExperimentConfig cfg = load_with_overrides(c);
  const ExperimentResult r = run_experiment(cfg, options_for(c));
  print_failures(r);
  std::cout << render_markdown(r.rows);
  std::cerr << "wrote " << (cfg.output_dir / "results.csv").string() << '\n';
  return r.ok() ? 0 : 1;
}

int cmd_report(const std::vector<std::string>& csvs, const std::string& out) {
  std::vector<ResultRow> rows;
  for (const auto& path : csvs) {
    auto part = read_results_csv(path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const std::string md = render_markdown(rows);
  if (out.empty()) {
    std::cout << md;
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + out);
    f << md;
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, double tolerance) {
  bool ok = true;
  std::cout << "kernels: " << kernels::backend_name(kernels::active().backend) << '\n';
  for (const auto& c : run_gradient_suite(seed)) {
    const bool pass = c.result.valid && c.result.max_relative_error < tolerance;
    ok = ok && pass;
    char line[160];
    std::snprintf(line, sizeof line, "%-28s %6zu coords  max rel err %.3e  %s", c.name.c_str(),
                  c.result.coordinates, c.result.max_relative_error,
                  !c.result.valid ? "NONDETERMINISTIC" : pass ? "ok" : "FAIL");
    std::cout << line << '\n';
  }
  return ok ? 0 : 1;
}

int cmd_cache_sim(Common c, const std::vector<double>& coverages) {
  ExperimentConfig cfg = load_with_overrides(c);
  cfg.methods = {Method::old, Method::vanilla_new, Method::gated_fusion};
  if (!coverages.empty()) cfg.cache_sweep = coverages;
  if (cfg.cache_sweep.empty()) cfg.cache_sweep = {0.0, 0.25, 0.5, 0.75, 1.0};
  cfg.ensemble_sizes.clear();
  RunOptions o = options_for(c);
  o.write_files = !c.out.empty();
  const ExperimentResult r = run_experiment(cfg, o);
  print_failures(r);
  std::cout << render_markdown(r.rows);
  return r.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gatefuse: backward-compatible classifier upgrades with gated fusion"};
  app.require_subcommand(1);

  Common run_opts;
  auto* run = app.add_subcommand("run", "train and evaluate every method in a config");
  run->add_option("--config", run_opts.config, "experiment config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_opts.out, "output directory (overrides the config)");
  run->add_option("--seeds", run_opts.seeds, "comma-separated seeds (overrides the config)");
  run->add_option("--jobs", run_opts.jobs, "parallel runs")->check(CLI::PositiveNumber);
  run->add_flag("--quiet", run_opts.quiet, "no progress log");

  std::vector<std::string> csvs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "markdown tables from results CSV files");
  report->add_option("csv", csvs, "results.csv files")->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "write markdown here instead of stdout");

  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-5;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
  gradcheck->add_option("--seed", gc_seed, "seed for the random fixtures");
  gradcheck->add_option("--tolerance", gc_tol, "maximum relative error");

  Common cache_opts;
  std::vector<double> coverages;
  auto* cache = app.add_subcommand("cache-sim", "gated fusion inference from partial logit caches");
  cache->add_option("--config", cache_opts.config, "experiment config file")->required()->check(CLI::ExistingFile);
  cache->add_option("--out", cache_opts.out, "also write run files here");
  cache->add_option("--seeds", cache_opts.seeds, "comma-separated seeds");
  cache->add_option("--jobs", cache_opts.jobs, "parallel runs")->check(CLI::PositiveNumber);
  cache->add_option("--coverage", coverages, "cached fractions (default 0 0.25 0.5 0.75 1)")->delimiter(',');
  cache->add_flag("--quiet", cache_opts.quiet, "no progress log");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_opts);
    if (*report) return cmd_report(csvs, report_out);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_tol);
    if (*cache) return cmd_cache_sim(cache_opts, coverages);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
