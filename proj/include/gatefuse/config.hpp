#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "gatefuse/data.hpp"
#include "gatefuse/models.hpp"
#include "gatefuse/training.hpp"

namespace gatefuse {

// Sectioned key = value text: [section] / [section.sub] headers, '#'
// comments, values are "strings", numbers, true/false, or flat [arrays] of
// those. Keys are addressed as "section.key".
class ConfigDocument {
 public:
  using Scalar = std::variant<bool, double, std::string>;
  struct Value {
    std::vector<Scalar> items;
    bool is_array = false;
    std::size_t line = 0;
  };

  static ConfigDocument parse(const std::string& text);
  static ConfigDocument load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::string> get_strings(const std::string& key, std::vector<std::string> fallback) const;
  // Distinct "a.b" prefixes below a section, e.g. subsections("dataset").
  std::vector<std::string> subsections(const std::string& section) const;
  // ConfigError naming the first key that no getter has read.
  void require_all_read() const;

 private:
  const Value* find(const std::string& key) const;
  std::map<std::string, Value> values_;
  std::vector<std::string> order_;
  mutable std::set<std::string> read_;
};

enum class Method { old, vanilla_new, distill, ensemble, weighted_probs, weighted_logits, gated_fusion };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
const std::vector<Method>& all_methods();

struct DatasetSpec {
  enum class Kind { tsv, synthetic };
  std::string name;
  Kind kind = Kind::synthetic;
  // tsv
  std::filesystem::path path;
  TsvSchema schema = TsvSchema::single_sentence;
  std::vector<std::string> label_vocab{"0", "1"};
  std::size_t hashed_dim = 2048;
  // synthetic
  std::size_t n = 6000;
  std::size_t dim = 16;
  std::size_t num_classes = 2;
  double class_sep = 3.0;
  std::size_t clusters_per_class = 1;
  double label_noise = 0.0;
  std::uint64_t data_seed = 7;
  NumericViewConfig numeric{};
  // both
  double dev_fraction = 0.2;
  std::uint64_t split_seed = 11;
};

// Candidate values for the gated fusion schedule. With more than one
// combination, the run keeps the one with the lowest dev R_NF among those
// within parity_margin of vanilla accuracy (the alpha-search rule).
struct FusionGrid {
  std::vector<double> temperature{1.0};
  std::vector<double> drop_gate{0.5};
  std::vector<double> lr2{1e-4};
  std::size_t size() const { return temperature.size() * drop_gate.size() * lr2.size(); }
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<ScenarioFamily> scenarios{ScenarioFamily::scale_up};
  std::vector<DatasetSpec> datasets;
  std::vector<Method> methods;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  HyperParams hp{};
  FusionGrid fusion_grid{};
  double classifier_dropout = 0.1;
  std::size_t ensemble_k = 5;
  std::vector<std::size_t> ensemble_sizes;  // sweep; empty = none
  std::vector<double> cache_sweep;          // coverages; empty = none
  std::vector<double> alpha_grid = kDefaultAlphaGrid;
  double parity_margin = kDefaultParityMargin;
  std::filesystem::path output_dir = "out";
  bool save_models = true;

  // Throws ConfigError.
  void validate() const;
};

// Relative dataset paths resolve against the config file's directory.
ExperimentConfig parse_experiment_config(const ConfigDocument& doc,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace gatefuse
