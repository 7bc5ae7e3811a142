#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gatefuse/tensor.hpp"

namespace gatefuse {

using ExampleId = std::uint64_t;

enum class TsvSchema { single_sentence, sentence_pair };
enum class NgramRange { unigram, uni_bigram };

std::string to_string(TsvSchema s);
TsvSchema tsv_schema_from_string(const std::string& s);
std::string to_string(NgramRange n);
NgramRange ngram_range_from_string(const std::string& s);

// One classification dataset. Text corpora carry `texts` (and `texts_b` for
// sentence pairs) until a feature view is applied; numeric datasets carry
// `features` directly. ids are unique and labels lie in [0, num_classes).
struct Dataset {
  std::string name;
  std::string split = "all";
  std::size_t num_classes = 0;
  std::vector<ExampleId> ids;
  std::vector<int> labels;
  std::vector<std::string> texts;
  std::vector<std::string> texts_b;
  Tensor features;

  std::size_t size() const noexcept { return ids.size(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }
  bool has_text() const noexcept { return !texts.empty(); }
  bool is_pair() const noexcept { return !texts_b.empty(); }

  // Text that feeds featurisation: text1, or "text1 [SEP] text2" for pairs.
  std::string joined_text(std::size_t i) const;

  // Rows picked by position, preserving order.
  Dataset subset(const std::vector<std::size_t>& positions) const;

  // Checks the invariants above; throws ContractViolation.
  void validate() const;
};

// Maps raw inputs to the feature vectors one model sees.
struct HashedBowView {
  std::size_t dim = 2048;
  std::uint64_t hash_seed = 0;
  NgramRange ngrams = NgramRange::unigram;
  friend bool operator==(const HashedBowView&, const HashedBowView&) = default;
};

// Numeric datasets: adds N(0, noise_std^2) per coordinate, drawn from a
// counter-based stream keyed by (seed, example id, coordinate), so the view of
// an example never depends on which other examples are present.
struct NumericView {
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  friend bool operator==(const NumericView&, const NumericView&) = default;
};

using FeatureView = std::variant<HashedBowView, NumericView>;

std::string describe(const FeatureView& view);

Dataset apply_view(const Dataset& base, const FeatureView& view);

// Lowercase, whitespace tokens, signed feature hashing, L2 normalised.
// Empty text gives the zero vector.
std::vector<double> featurize_hashed_bow(const std::string& text, std::size_t dim,
                                         std::uint64_t hash_seed, NgramRange ngrams);

// Header row `label<TAB>text1[<TAB>text2]`. Label tokens are looked up in
// `label_vocab` (index = class id). Sentence pairs keep text2 in texts_b.
// Throws ParseError with the 1-based line number.
Dataset load_tsv(const std::filesystem::path& path, TsvSchema schema,
                 const std::vector<std::string>& label_vocab = {"0", "1"});
void write_tsv(const Dataset& data, const std::filesystem::path& path,
               const std::vector<std::string>& label_vocab = {"0", "1"});

// Unit-covariance Gaussian mixture. With clusters_per_class == 1 there is one
// cluster per class, pairwise mean distance class_sep (means at
// class_sep/sqrt(2) * e_c, so d >= C). With K > 1 each class owns K clusters
// whose means are drawn from N(0, class_sep^2/2 I) and the class's share is
// split evenly among them. label_noise of the labels are replaced by a
// uniformly chosen different class.
Dataset synth_gaussian_mixture(std::size_t n, std::size_t d, std::size_t num_classes,
                               double class_sep, double label_noise, std::uint64_t seed,
                               std::size_t clusters_per_class = 1);

// Deterministic shuffle then cut: round(dev_fraction * n) examples go to dev.
// Both parts keep the original relative order.
std::pair<Dataset, Dataset> split(const Dataset& data, double dev_fraction, std::uint64_t seed);

// name, n, C, d, provenance
std::string dataset_manifest_json(const Dataset& data, const std::string& provenance);

}  // namespace gatefuse
