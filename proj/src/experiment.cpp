#include "gatefuse/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "gatefuse/cache.hpp"
#include "gatefuse/checkpoint.hpp"
#include "gatefuse/errors.hpp"

namespace gatefuse {

using json = nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json hp_json(const HyperParams& hp) {
  return {{"lr", hp.lr},
          {"batch_size", hp.batch_size},
          {"epochs", hp.epochs},
          {"lr2", hp.lr2},
          {"drop_gate", hp.drop_gate},
          {"temperature", hp.temperature},
          {"distill_lambda", hp.distill_lambda},
          {"distill_temperature", hp.distill_temperature},
          {"gate_dropout", hp.gate_dropout},
          {"seed", hp.seed}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void check_count_identity(const EvalReport& r) {
  // candidate flips = vanilla flips - fixed + new faults
  if (r.negative_flip_count + r.fixed_count != r.vanilla_flip_count + r.new_fault_count)
    throw ContractViolation("flip count identity violated: " + std::to_string(r.negative_flip_count) +
                            " != " + std::to_string(r.vanilla_flip_count) + " - " + std::to_string(r.fixed_count) +
                            " + " + std::to_string(r.new_fault_count));
}

}  // namespace

std::uint64_t old_model_seed(std::uint64_t seed) { return derive_seed(seed, "old_model"); }
std::uint64_t cache_seed(std::uint64_t seed) { return derive_seed(seed, "logit_cache"); }

std::string variant_for_cache(double coverage) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cache=%.4g", coverage);
  return buf;
}

std::string variant_for_ensemble(std::size_t k) { return "k=" + std::to_string(k); }

Dataset load_dataset(const DatasetSpec& spec) {
  Dataset d;
  if (spec.kind == DatasetSpec::Kind::tsv) {
    d = load_tsv(spec.path, spec.schema, spec.label_vocab);
  } else {
    d = synth_gaussian_mixture(spec.n, spec.dim, spec.num_classes, spec.class_sep, spec.label_noise, spec.data_seed,
                               spec.clusters_per_class);
  }
  d.name = spec.name;
  return d;
}

std::vector<PreparedData> prepare_data(const ExperimentConfig& config) {
  std::vector<PreparedData> out;
  for (const auto& ds : config.datasets) {
    const Dataset base = load_dataset(ds);
    const auto [train, dev] = split(base, ds.dev_fraction, ds.split_seed);
    const bool text = ds.kind == DatasetSpec::Kind::tsv;
    const std::string provenance =
        text ? "tsv:" + ds.path.filename().string()
             : "synthetic gaussian mixture n=" + std::to_string(ds.n) + " d=" + std::to_string(ds.dim) +
                   " seed=" + std::to_string(ds.data_seed);
    for (ScenarioFamily fam : config.scenarios) {
      PreparedData p;
      p.scenario = to_string(fam);
      p.dataset = ds.name;
      p.spec = make_scenario(fam, text, base.num_classes, ds.dim, ds.hashed_dim, ds.numeric, config.classifier_dropout);
      p.old_train = apply_view(train, p.spec.old_view);
      p.old_dev = apply_view(dev, p.spec.old_view);
      p.new_train = apply_view(train, p.spec.new_view);
      p.new_dev = apply_view(dev, p.spec.new_view);
      p.provenance = provenance;
      out.push_back(std::move(p));
    }
  }
  return out;
}

ExperimentResult run_unit(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed,
                          const std::filesystem::path& out_dir,
                          const std::function<void(const std::string&)>& log) {
  ExperimentResult result;
  const auto has = [&](Method m) {
    return std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end();
  };
  const auto say = [&](const std::string& msg) {
    if (log) log(data.scenario + "/" + data.dataset + " seed " + std::to_string(seed) + ": " + msg);
  };
  const bool files = !out_dir.empty();
  const bool models = files && config.save_models;
  const auto run_dir = [&](Method m) {
    const auto dir = out_dir / (data.scenario + "-" + data.dataset) / to_string(m) / std::to_string(seed);
    std::filesystem::create_directories(dir);
    return dir;
  };

  HyperParams hp = config.hp;
  hp.seed = seed;
  const PairedSplit dev = make_paired(data.old_dev, data.new_dev);

  std::shared_ptr<const EncoderClassifier> old_model;
  Predictions old_preds, vanilla_preds;
  Tensor old_logits, vanilla_logits;
  std::optional<EncoderClassifier> vanilla_model;

  std::map<Method, json> manifests;
  const auto write_manifests = [&] {
    if (!files) return;
    for (const auto& [m, j] : manifests) write_text(run_dir(m) / "report.json", j.dump(2) + "\n");
  };

  // Runs one method; failures are recorded and the unit continues.
  const auto attempt = [&](Method m, const std::function<json()>& body) {
    const std::string started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    json manifest;
    manifest["scenario"] = data.scenario;
    manifest["dataset"] = data.dataset;
    manifest["method"] = to_string(m);
    manifest["seed"] = seed;
    manifest["started"] = started;
    bool ok = true;
    try {
      json extra = body();
      manifest["status"] = "ok";
      for (auto& [k, v] : extra.items()) manifest[k] = v;
    } catch (const std::exception& e) {
      ok = false;
      manifest["status"] = "failed";
      manifest["error"] = e.what();
      result.failures.push_back({data.scenario, data.dataset, to_string(m), seed, e.what()});
      say(to_string(m) + " failed: " + e.what());
    }
    manifest["finished"] = utc_now();
    manifest["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifests[m] = std::move(manifest);
    return ok;
  };

  // Evaluates against old and vanilla, checks the count identity, appends a row.
  const auto emit = [&](Method m, const std::string& variant, const Predictions& p,
                        std::optional<double> alpha = std::nullopt) {
    const EvalReport rep = evaluate(old_preds, p, &vanilla_preds, seed);
    check_count_identity(rep);
    result.rows.push_back({data.scenario, data.dataset, to_string(m), variant, rep, alpha});
    return json::parse(report_to_json(rep));
  };
  const auto save_preds = [&](Method m, const Predictions& p) {
    if (files) write_predictions_tsv(p, run_dir(m) / "predictions.tsv");
  };

  const bool old_ok = attempt(Method::old, [&]() -> json {
    HyperParams old_hp = hp;
    old_hp.seed = old_model_seed(seed);
    old_model = std::make_shared<const EncoderClassifier>(
        train_vanilla(data.spec.old_arch, data.old_train, old_hp, Role::old_model));
    old_logits = old_model->logits(dev.old_features);
    old_preds = predictions_from_logits(old_logits, dev.ids, dev.labels);
    if (models) save_classifier(*old_model, run_dir(Method::old) / "model");
    save_preds(Method::old, old_preds);
    return {{"hyperparameters", hp_json(old_hp)}};
  });
  if (!old_ok) {
    write_manifests();
    return result;
  }

  const bool vanilla_ok = attempt(Method::vanilla_new, [&]() -> json {
    vanilla_model.emplace(train_vanilla(data.spec.new_arch, data.new_train, hp));
    vanilla_logits = vanilla_model->logits(dev.new_features);
    vanilla_preds = predictions_from_logits(vanilla_logits, dev.ids, dev.labels);
    if (models) save_classifier(*vanilla_model, run_dir(Method::vanilla_new) / "model");
    save_preds(Method::vanilla_new, vanilla_preds);
    return {{"hyperparameters", hp_json(hp)}};
  });
  if (!vanilla_ok) {
    write_manifests();
    return result;
  }
  if (has(Method::old)) manifests[Method::old]["report"] = emit(Method::old, "main", old_preds);
  if (has(Method::vanilla_new))
    manifests[Method::vanilla_new]["report"] = emit(Method::vanilla_new, "main", vanilla_preds);

  if (has(Method::distill)) {
    attempt(Method::distill, [&]() -> json {
      const EncoderClassifier model = train_distill(*old_model, data.old_train, data.spec.new_arch, data.new_train, hp);
      const Predictions p = predictions_from_logits(model.logits(dev.new_features), dev.ids, dev.labels);
      if (models) save_classifier(model, run_dir(Method::distill) / "model");
      save_preds(Method::distill, p);
      return {{"hyperparameters", hp_json(hp)}, {"report", emit(Method::distill, "main", p)}};
    });
  }

  if (has(Method::ensemble)) {
    attempt(Method::ensemble, [&]() -> json {
      std::size_t k_max = config.ensemble_k;
      for (std::size_t k : config.ensemble_sizes) k_max = std::max(k_max, k);
      const auto seeds = ensemble_member_seeds(seed, k_max);
      std::vector<Predictions> members{vanilla_preds};  // member 0 shares the vanilla seed
      for (std::size_t j = 1; j < k_max; ++j) {
        HyperParams mhp = hp;
        mhp.seed = seeds[j];
        const EncoderClassifier m = train_vanilla(data.spec.new_arch, data.new_train, mhp);
        members.push_back(predictions_from_logits(m.logits(dev.new_features), dev.ids, dev.labels));
      }
      const auto vote = [&](std::size_t k) {
        return majority_vote(std::span<const Predictions>(members.data(), k));
      };
      const Predictions p = vote(config.ensemble_k);
      save_preds(Method::ensemble, p);
      json j;
      j["member_seeds"] = std::vector<std::uint64_t>(seeds.begin(), seeds.begin() + config.ensemble_k);
      j["report"] = emit(Method::ensemble, "main", p);
      json sweep = json::object();
      for (std::size_t k : config.ensemble_sizes) sweep[std::to_string(k)] = emit(Method::ensemble, variant_for_ensemble(k), vote(k));
      if (!config.ensemble_sizes.empty()) j["size_sweep"] = sweep;
      return j;
    });
  }

  for (auto [m, space] : {std::pair{Method::weighted_probs, EnsembleSpace::probability},
                          std::pair{Method::weighted_logits, EnsembleSpace::logit}}) {
    if (!has(m)) continue;
    attempt(m, [&, m = m, space = space]() -> json {
      const auto search =
          alpha_search(old_logits, vanilla_logits, dev.labels, space, config.alpha_grid, config.parity_margin);
      if (!search.feasible) say(to_string(m) + ": no alpha reached accuracy parity, using alpha = 1");
      const Predictions p = weighted_ensemble(old_logits, vanilla_logits, search.alpha, space, dev.ids, dev.labels);
      save_preds(m, p);
      json grid = json::array();
      for (const auto& ev : search.evaluations)
        grid.push_back({{"alpha", ev.alpha},
                        {"accuracy", ev.accuracy},
                        {"negative_flip_rate", ev.negative_flip_rate},
                        {"feasible", ev.feasible}});
      return {{"alpha", search.alpha},
              {"alpha_feasible", search.feasible},
              {"alpha_grid", grid},
              {"report", emit(m, "main", p, search.alpha)}};
    });
  }

  if (has(Method::gated_fusion)) {
    attempt(Method::gated_fusion, [&]() -> json {
      const double vanilla_acc = accuracy(vanilla_preds.predicted, dev.labels);
      std::optional<GatedFusionModel> best;
      std::optional<Predictions> best_preds;
      HyperParams best_hp;
      double best_nfr = 0.0;
      bool best_feasible = false;
      json grid = json::array();
      for (double t : config.fusion_grid.temperature)
        for (double d : config.fusion_grid.drop_gate)
          for (double l2 : config.fusion_grid.lr2) {
            HyperParams ghp = hp;
            ghp.temperature = t;
            ghp.drop_gate = d;
            ghp.lr2 = l2;
            GatedFusionModel gf = train_gated_fusion(old_model, data.old_train, data.spec.new_arch, data.new_train, ghp);
            Predictions p = gf_predict(gf, dev);
            const double acc = accuracy(p.predicted, dev.labels);
            const double nfr = negative_flip_rate(old_preds.predicted, p.predicted, dev.labels).rate;
            const bool feasible = acc >= vanilla_acc - config.parity_margin;
            grid.push_back({{"temperature", t}, {"drop_gate", d}, {"lr2", l2}, {"accuracy", acc},
                            {"negative_flip_rate", nfr}, {"feasible", feasible}});
            // Same rule as the alpha search; with no feasible point keep the most accurate.
            const bool better = !best || (feasible && !best_feasible) ||
                                (feasible == best_feasible &&
                                 (feasible ? nfr < best_nfr
                                           : acc > accuracy(best_preds->predicted, dev.labels)));
            if (better) {
              best.emplace(std::move(gf));
              best_preds = std::move(p);
              best_hp = ghp;
              best_nfr = nfr;
              best_feasible = feasible;
            }
          }
      if (models) save_gated_fusion(*best, run_dir(Method::gated_fusion) / "model");
      save_preds(Method::gated_fusion, *best_preds);
      json j;
      j["hyperparameters"] = hp_json(best_hp);
      if (config.fusion_grid.size() > 1) j["fusion_grid"] = grid;
      j["report"] = emit(Method::gated_fusion, "main", *best_preds);
      json sweep = json::object();
      for (double x : config.cache_sweep) {
        const LogitCache cache = build_cache(dev, *old_model, best->new_model, x, cache_seed(seed));
        sweep[variant_for_cache(x)] = emit(Method::gated_fusion, variant_for_cache(x),
                                           gf_predict_with_cache(*best, cache, dev));
      }
      if (!config.cache_sweep.empty()) j["cache_sweep"] = sweep;
      return j;
    });
  }
  write_manifests();
  say("done");
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const std::string started = utc_now();
  const std::vector<PreparedData> data = prepare_data(config);
  if (options.write_files) std::filesystem::create_directories(config.output_dir);
  const std::filesystem::path out_dir = options.write_files ? config.output_dir : std::filesystem::path{};

  struct Unit {
    const PreparedData* data;
    std::uint64_t seed;
  };
  std::vector<Unit> units;
  for (const auto& d : data)
    for (std::uint64_t s : config.seeds) units.push_back({&d, s});

  std::mutex log_mutex;
  const auto log = [&](const std::string& msg) {
    if (!options.log) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    options.log(msg);
  };

  std::vector<ExperimentResult> parts(units.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < units.size(); i = next++) {
      try {
        parts[i] = run_unit(config, *units[i].data, units[i].seed, out_dir, log);
      } catch (const std::exception& e) {
        parts[i].failures.push_back({units[i].data->scenario, units[i].data->dataset, "*", units[i].seed, e.what()});
        log(std::string("unit failed: ") + e.what());
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, units.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  ExperimentResult all;
  for (auto& p : parts) {
    all.rows.insert(all.rows.end(), p.rows.begin(), p.rows.end());
    all.failures.insert(all.failures.end(), p.failures.begin(), p.failures.end());
  }

  if (options.write_files) {
    write_results_csv(all.rows, config.output_dir / "results.csv");
    write_text(config.output_dir / "summary.md", render_markdown(all.rows));
    json manifest;
    manifest["name"] = config.name;
    manifest["started"] = started;
    manifest["finished"] = utc_now();
    manifest["jobs"] = jobs;
    manifest["seeds"] = config.seeds;
    json methods = json::array();
    for (Method m : config.methods) methods.push_back(to_string(m));
    manifest["methods"] = methods;
    manifest["hyperparameters"] = hp_json(config.hp);
    json datasets = json::array();
    for (const auto& d : data)
      datasets.push_back({{"scenario", d.scenario},
                          {"dataset", d.dataset},
                          {"provenance", d.provenance},
                          {"old_view", describe(d.spec.old_view)},
                          {"new_view", describe(d.spec.new_view)},
                          {"train", json::parse(dataset_manifest_json(d.new_train, d.provenance))},
                          {"dev", json::parse(dataset_manifest_json(d.new_dev, d.provenance))}});
    manifest["data"] = datasets;
    json failures = json::array();
    for (const auto& f : all.failures)
      failures.push_back({{"scenario", f.scenario}, {"dataset", f.dataset}, {"method", f.method},
                          {"seed", f.seed}, {"error", f.message}});
    manifest["failures"] = failures;
    manifest["status"] = all.ok() ? "ok" : "failed";
    write_text(config.output_dir / "manifest.json", manifest.dump(2) + "\n");
  }
  return all;
}

}  // namespace gatefuse
