#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gatefuse/data.hpp"
#include "gatefuse/models.hpp"

namespace gatefuse {

struct PredictionRecord {
  ExampleId example_id = 0;
  int predicted = 0;
  int gold = 0;
  std::vector<double> probabilities;
};

// Column-oriented set of PredictionRecords over one evaluation set.
// probabilities rows are distributions; predicted[i] is their argmax
// (lowest class index on ties) unless a producer documents its own
// tie-break among the maximal classes.
struct Predictions {
  std::vector<ExampleId> ids;
  std::vector<int> gold;
  std::vector<int> predicted;
  Tensor probabilities;

  std::size_t size() const noexcept { return ids.size(); }
  PredictionRecord record(std::size_t i) const;
};

// Softmax each row of logits and take the argmax.
Predictions predictions_from_logits(const Tensor& logits, std::span<const ExampleId> ids,
                                    std::span<const int> gold);
Predictions predictions_from_probabilities(Tensor probs, std::span<const ExampleId> ids,
                                           std::span<const int> gold);

// Throws ContractViolation unless both sets cover the same ids in the same order.
void require_aligned(const Predictions& a, const Predictions& b, const char* what);

// Row-wise (1 - alpha_i) * l_old / T + alpha_i * l_new.
Tensor fuse_logits(const Tensor& l_old, const Tensor& l_new, std::span<const double> alpha,
                   double temperature);

// Frozen old model + new model + gate. old_model may be null when inference
// runs from a logit cache or with the old model dropped.
struct GatedFusionModel {
  std::shared_ptr<const EncoderClassifier> old_model;
  EncoderClassifier new_model;
  GateNetwork gate;
  double temperature = 1.0;
};

// Inputs for one evaluation set, with the features each model reads.
struct PairedSplit {
  Tensor old_features;
  Tensor new_features;
  std::vector<ExampleId> ids;
  std::vector<int> labels;
};

PairedSplit make_paired(const Dataset& old_view, const Dataset& new_view);

// softmax(fuse_logits(l_old, l_new, g(E_new(x)), T)), all in eval mode.
Predictions gf_predict(const GatedFusionModel& gf, const PairedSplit& batch);

enum class EnsembleSpace { probability, logit };

std::string to_string(EnsembleSpace s);

// Probability space: (1-a) p_old + a p_new. Logit space: softmax((1-a) l_old + a l_new).
// Throws ParameterError for alpha outside [0, 1].
Predictions weighted_ensemble(const Tensor& old_logits, const Tensor& new_logits, double alpha,
                              EnsembleSpace space, std::span<const ExampleId> ids,
                              std::span<const int> gold);

// Plurality vote over members. Ties go to the tied class with the highest
// summed member probability, then the lowest index. Output probabilities are
// vote fractions.
Predictions majority_vote(std::span<const Predictions> members);

// example_id, gold, pred, then one probability column per class.
void write_predictions_tsv(const Predictions& p, const std::filesystem::path& path);
Predictions read_predictions_tsv(const std::filesystem::path& path);

}  // namespace gatefuse
