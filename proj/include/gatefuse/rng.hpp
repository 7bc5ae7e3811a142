#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace gatefuse {

// SplitMix64 finaliser. Used to derive seeds and for counter-based draws.
std::uint64_t mix64(std::uint64_t x);
// FNV-1a over the bytes of a string.
std::uint64_t hash_string(std::string_view s, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// Deterministic generator: mt19937_64 engine, with all conversions to
// floating point done here rather than through <random> distributions so the
// stream does not depend on the standard library implementation.
//
// child(tag) depends only on the construction seed and the tag, never on how
// many values were drawn, so separate purposes (init, shuffling, dropout,
// drop-gate coin flips) cannot perturb each other.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  Rng child(std::string_view tag) const { return Rng(derive_seed(seed_, tag)); }
  Rng child(std::uint64_t key) const { return Rng(derive_seed(seed_, key)); }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller (one value per call).
  double normal();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Counter-based standard normal draw for (seed, a, b); pure function.
double hashed_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace gatefuse
