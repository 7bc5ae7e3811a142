#include "gatefuse/cache.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gatefuse/errors.hpp"
#include "gatefuse/kernels.hpp"

namespace gatefuse {

LogitCache::LogitCache(std::size_t key_dim, std::size_t num_classes, double coverage, std::uint64_t seed)
    : key_dim_(key_dim), num_classes_(num_classes), coverage_(coverage), seed_(seed) {
  if (key_dim == 0 || num_classes == 0) throw DimensionError("cache needs key_dim > 0 and num_classes > 0");
  if (!(coverage >= 0.0 && coverage <= 1.0)) throw ParameterError("cache coverage outside [0, 1]");
}

std::span<const double> LogitCache::key(std::size_t i) const {
  if (i >= size()) throw IndexError("cache entry out of range");
  return {keys_.data() + i * key_dim_, key_dim_};
}

std::span<const double> LogitCache::logits(std::size_t i) const {
  if (i >= size()) throw IndexError("cache entry out of range");
  return {logits_.data() + i * num_classes_, num_classes_};
}

void LogitCache::insert(ExampleId id, std::span<const double> key, std::span<const double> old_logits) {
  if (key.size() != key_dim_) throw DimensionError("cache key has the wrong width");
  if (old_logits.size() != num_classes_) throw DimensionError("cached logits have the wrong width");
  for (ExampleId existing : ids_)
    if (existing == id) throw ContractViolation("duplicate example id " + std::to_string(id) + " in cache");
  ids_.push_back(id);
  keys_.insert(keys_.end(), key.begin(), key.end());
  logits_.insert(logits_.end(), old_logits.begin(), old_logits.end());
}

std::optional<std::size_t> LogitCache::find(ExampleId id) const {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

std::optional<LogitCache::Hit> LogitCache::lookup(std::span<const double> query) const {
  if (query.size() != key_dim_) throw DimensionError("cache query has the wrong width");
  if (empty()) return std::nullopt;
  std::size_t best = 0;
  double best_d2 = kernels::squared_distance(query, key(0));
  for (std::size_t i = 1; i < size(); ++i) {
    const double d2 = kernels::squared_distance(query, key(i));
    if (d2 < best_d2 || (d2 == best_d2 && ids_[i] < ids_[best])) {
      best = i;
      best_d2 = d2;
    }
  }
  return Hit{logits(best), ids_[best], std::sqrt(best_d2)};
}

LogitCache build_cache(const PairedSplit& eval, const EncoderClassifier& old_model,
                       const EncoderClassifier& new_model, double coverage, std::uint64_t seed) {
  if (!(coverage >= 0.0 && coverage <= 1.0)) throw ParameterError("cache coverage outside [0, 1]");
  LogitCache cache(new_model.embedding_dim(), old_model.num_classes(), coverage, seed);
  const std::size_t n = eval.ids.size();
  const auto m = static_cast<std::size_t>(std::llround(coverage * static_cast<double>(n)));
  if (m == 0) return cache;
  // One permutation per seed; larger coverages extend smaller ones.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng(seed).child("cache");
  rng.shuffle(std::span<std::size_t>(order));
  order.resize(m);
  const Tensor keys = new_model.encode(eval.new_features.gather_rows(order));
  const Tensor old_logits = old_model.logits(eval.old_features.gather_rows(order));
  for (std::size_t r = 0; r < m; ++r) cache.insert(eval.ids[order[r]], keys.row(r), old_logits.row(r));
  return cache;
}

Predictions drop_old_predict(const GatedFusionModel& gf, const PairedSplit& batch) {
  const Tensor e_new = gf.new_model.encode(batch.new_features);
  const Tensor l_new = gf.new_model.head(e_new);
  const auto alpha = gf.gate.alpha(e_new);
  Tensor scaled = l_new;
  for (std::size_t i = 0; i < scaled.rows(); ++i)
    for (double& v : scaled.row(i)) v *= alpha[i];
  Predictions p = predictions_from_logits(scaled, batch.ids, batch.labels);
  // alpha > 0 rescales each row, so the class decision is the new model's own.
  for (std::size_t i = 0; i < l_new.rows(); ++i) p.predicted[i] = static_cast<int>(argmax(l_new.row(i)));
  return p;
}

Predictions gf_predict_with_cache(const GatedFusionModel& gf, const LogitCache& cache,
                                  const PairedSplit& batch) {
  if (cache.empty()) return drop_old_predict(gf, batch);
  if (cache.key_dim() != gf.new_model.embedding_dim() || cache.num_classes() != gf.new_model.num_classes())
    throw DimensionError("cache does not match the new model's shapes");
  const Tensor e_new = gf.new_model.encode(batch.new_features);
  const Tensor l_new = gf.new_model.head(e_new);
  const auto alpha = gf.gate.alpha(e_new);
  Tensor l_old(l_new.rows(), l_new.cols());
  for (std::size_t i = 0; i < e_new.rows(); ++i) {
    const auto own = cache.find(batch.ids[i]);
    const auto logits = own ? cache.logits(*own) : cache.lookup(e_new.row(i))->old_logits;
    std::copy(logits.begin(), logits.end(), l_old.row(i).begin());
  }
  return predictions_from_logits(fuse_logits(l_old, l_new, alpha, gf.temperature), batch.ids, batch.labels);
}

namespace {

static_assert(std::endian::native == std::endian::little, "cache files are written little-endian");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw ParseError("cache file " + path.string() + " is truncated", 0);
  return v;
}

}  // namespace

void save_cache(const LogitCache& cache, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write cache file " + path.string());
  nlohmann::ordered_json h;
  h["format"] = "gatefuse-cache-1";
  h["key_dim"] = cache.key_dim();
  h["num_classes"] = cache.num_classes();
  h["coverage"] = cache.coverage();
  h["seed"] = cache.seed();
  h["count"] = cache.size();
  out << h.dump() << '\n';
  for (std::size_t i = 0; i < cache.size(); ++i) {
    put<std::uint64_t>(out, cache.id(i));
    for (double v : cache.key(i)) put(out, v);
    for (double v : cache.logits(i)) put(out, v);
  }
  if (!out) throw ConfigError("failed writing cache file " + path.string());
}

LogitCache load_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open cache file " + path.string());
  std::string header;
  std::getline(in, header);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("cache header is not JSON: " + std::string(e.what()), 1);
  }
  if (h.value("format", "") != "gatefuse-cache-1") throw ParseError("unknown cache format", 1);
  LogitCache cache(h.at("key_dim").get<std::size_t>(), h.at("num_classes").get<std::size_t>(),
                   h.at("coverage").get<double>(), h.at("seed").get<std::uint64_t>());
  const auto count = h.at("count").get<std::size_t>();
  std::vector<double> key(cache.key_dim()), logits(cache.num_classes());
  for (std::size_t i = 0; i < count; ++i) {
    const auto id = get<std::uint64_t>(in, path);
    for (double& v : key) v = get<double>(in, path);
    for (double& v : logits) v = get<double>(in, path);
    cache.insert(id, key, logits);
  }
  return cache;
}

}  // namespace gatefuse
