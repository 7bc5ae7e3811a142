#include "gatefuse/fusion.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gatefuse/errors.hpp"

namespace gatefuse {

PredictionRecord Predictions::record(std::size_t i) const {
  const auto row = probabilities.row(i);
  return {ids[i], predicted[i], gold[i], {row.begin(), row.end()}};
}

Predictions predictions_from_probabilities(Tensor probs, std::span<const ExampleId> ids,
                                           std::span<const int> gold) {
  if (probs.rows() != ids.size() || ids.size() != gold.size())
    throw DimensionError("predictions: ids, gold and probability rows differ in length");
  Predictions p;
  p.ids.assign(ids.begin(), ids.end());
  p.gold.assign(gold.begin(), gold.end());
  p.predicted.resize(ids.size());
  for (std::size_t i = 0; i < probs.rows(); ++i)
    p.predicted[i] = static_cast<int>(argmax(probs.row(i)));
  p.probabilities = std::move(probs);
  return p;
}

Predictions predictions_from_logits(const Tensor& logits, std::span<const ExampleId> ids,
                                    std::span<const int> gold) {
  return predictions_from_probabilities(softmax_rows(logits), ids, gold);
}

void require_aligned(const Predictions& a, const Predictions& b, const char* what) {
  if (a.ids != b.ids) throw ContractViolation(std::string(what) + ": example ids are not aligned");
}

Tensor fuse_logits(const Tensor& l_old, const Tensor& l_new, std::span<const double> alpha,
                   double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ParameterError("fusion temperature must be > 0");
  require_same_shape(l_old, l_new, "fuse_logits");
  if (alpha.size() != l_old.rows())
    throw DimensionError("fuse_logits: need one alpha per row");
  Tensor out(l_old.rows(), l_old.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const double a = alpha[i];
    if (!(a >= 0.0 && a <= 1.0)) throw ParameterError("fuse_logits: alpha outside [0, 1]");
    const auto lo = l_old.row(i);
    const auto ln = l_new.row(i);
    auto o = out.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] = (1.0 - a) * (lo[j] / temperature) + a * ln[j];
  }
  return out;
}

PairedSplit make_paired(const Dataset& old_view, const Dataset& new_view) {
  if (old_view.ids != new_view.ids)
    throw ContractViolation("old and new feature views cover different examples");
  return {old_view.features, new_view.features, new_view.ids, new_view.labels};
}

Predictions gf_predict(const GatedFusionModel& gf, const PairedSplit& batch) {
  if (!gf.old_model) throw ContractViolation("gf_predict needs the old model; use the cache path");
  const Tensor l_old = gf.old_model->logits(batch.old_features);
  const Tensor e_new = gf.new_model.encode(batch.new_features);
  const Tensor l_new = gf.new_model.head(e_new);
  const auto alpha = gf.gate.alpha(e_new);
  return predictions_from_logits(fuse_logits(l_old, l_new, alpha, gf.temperature), batch.ids,
                                 batch.labels);
}

std::string to_string(EnsembleSpace s) {
  return s == EnsembleSpace::probability ? "probability" : "logit";
}

Predictions weighted_ensemble(const Tensor& old_logits, const Tensor& new_logits, double alpha,
                              EnsembleSpace space, std::span<const ExampleId> ids,
                              std::span<const int> gold) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("ensemble alpha outside [0, 1]");
  require_same_shape(old_logits, new_logits, "weighted_ensemble");
  if (space == EnsembleSpace::logit) {
    const std::vector<double> a(old_logits.rows(), alpha);
    return predictions_from_logits(fuse_logits(old_logits, new_logits, a, 1.0), ids, gold);
  }
  const Tensor p_old = softmax_rows(old_logits);
  const Tensor p_new = softmax_rows(new_logits);
  Tensor mix(p_old.rows(), p_old.cols());
  for (std::size_t i = 0; i < mix.size(); ++i)
    mix.values()[i] = (1.0 - alpha) * p_old.values()[i] + alpha * p_new.values()[i];
  return predictions_from_probabilities(std::move(mix), ids, gold);
}

Predictions majority_vote(std::span<const Predictions> members) {
  if (members.empty()) throw ContractViolation("majority_vote needs at least one member");
  const Predictions& first = members.front();
  const std::size_t n = first.size();
  const std::size_t c = first.probabilities.cols();
  for (const auto& m : members) {
    require_aligned(first, m, "majority_vote");
    if (m.probabilities.cols() != c) throw ContractViolation("majority_vote: class counts differ");
  }
  const double k = static_cast<double>(members.size());
  Predictions out;
  out.ids = first.ids;
  out.gold = first.gold;
  out.predicted.resize(n);
  out.probabilities = Tensor(n, c);
  std::vector<int> votes(c);
  std::vector<double> mass(c);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    std::fill(mass.begin(), mass.end(), 0.0);
    for (const auto& m : members) {
      ++votes[static_cast<std::size_t>(m.predicted[i])];
      const auto row = m.probabilities.row(i);
      for (std::size_t j = 0; j < c; ++j) mass[j] += row[j];
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (votes[j] > votes[best] || (votes[j] == votes[best] && mass[j] > mass[best])) best = j;
    }
    out.predicted[i] = static_cast<int>(best);
    for (std::size_t j = 0; j < c; ++j) out.probabilities(i, j) = votes[j] / k;
  }
  return out;
}

void write_predictions_tsv(const Predictions& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write predictions file " + path.string());
  out << "example_id\tgold\tpred";
  for (std::size_t j = 0; j < p.probabilities.cols(); ++j) out << "\tp" << j;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < p.size(); ++i) {
    out << p.ids[i] << '\t' << p.gold[i] << '\t' << p.predicted[i];
    for (double v : p.probabilities.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << '\t' << buf;
    }
    out << '\n';
  }
}

Predictions read_predictions_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open predictions file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty predictions file", 1);
  std::size_t c = 0;
  {
    std::istringstream hs(line);
    std::string col;
    std::size_t n = 0;
    while (std::getline(hs, col, '\t')) ++n;
    if (n < 4) throw ParseError("predictions header needs example_id, gold, pred, p0..", 1);
    c = n - 3;
  }
  Predictions p;
  std::vector<double> probs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ExampleId id;
    int gold, pred;
    if (!(ls >> id >> gold >> pred)) throw ParseError("malformed prediction row", line_no);
    for (std::size_t j = 0; j < c; ++j) {
      double v;
      if (!(ls >> v)) throw ParseError("missing probability column", line_no);
      probs.push_back(v);
    }
    p.ids.push_back(id);
    p.gold.push_back(gold);
    p.predicted.push_back(pred);
  }
  p.probabilities = Tensor(p.ids.size(), c, std::move(probs));
  return p;
}

}  // namespace gatefuse
