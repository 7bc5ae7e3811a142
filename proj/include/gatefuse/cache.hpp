#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "gatefuse/fusion.hpp"

namespace gatefuse {

// Old-model logits for a random fraction of an evaluation set, keyed by the
// new model's eval-mode embedding. Immutable once built.
class LogitCache {
 public:
  LogitCache(std::size_t key_dim, std::size_t num_classes, double coverage, std::uint64_t seed);

  std::size_t key_dim() const noexcept { return key_dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  double coverage() const noexcept { return coverage_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  ExampleId id(std::size_t i) const { return ids_.at(i); }
  std::span<const double> key(std::size_t i) const;
  std::span<const double> logits(std::size_t i) const;

  // Throws ContractViolation on a duplicate id, DimensionError on widths.
  void insert(ExampleId id, std::span<const double> key, std::span<const double> old_logits);

  struct Hit {
    std::span<const double> old_logits;
    ExampleId id = 0;
    double distance = 0.0;
  };

  // Entry index for id, if cached.
  std::optional<std::size_t> find(ExampleId id) const;

  // Nearest entry by Euclidean distance; equal distances go to the smallest
  // id. Empty cache -> nullopt.
  std::optional<Hit> lookup(std::span<const double> query) const;

  friend bool operator==(const LogitCache&, const LogitCache&) = default;

 private:
  std::size_t key_dim_;
  std::size_t num_classes_;
  double coverage_;
  std::uint64_t seed_;
  std::vector<ExampleId> ids_;
  std::vector<double> keys_;
  std::vector<double> logits_;
};

// Caches round(X * n) examples drawn uniformly without replacement.
// Throws ParameterError for X outside [0, 1].
LogitCache build_cache(const PairedSplit& eval, const EncoderClassifier& old_model,
                       const EncoderClassifier& new_model, double coverage, std::uint64_t seed);

// softmax(alpha * l_new): the fusion with the old term removed. Argmax always
// equals the new model's own argmax.
Predictions drop_old_predict(const GatedFusionModel& gf, const PairedSplit& batch);

// Gated fusion with l_old from the cache: an example whose id is cached uses
// its own entry, others the nearest key. Only the new features of batch are
// read; an empty cache gives drop_old_predict.
Predictions gf_predict_with_cache(const GatedFusionModel& gf, const LogitCache& cache,
                                  const PairedSplit& batch);

// One JSON header line (key_dim, num_classes, coverage, seed, count), then per
// entry: uint64 id, key_dim float64 key values, num_classes float64 logits,
// all little-endian.
void save_cache(const LogitCache& cache, const std::filesystem::path& path);
LogitCache load_cache(const std::filesystem::path& path);

}  // namespace gatefuse
