#include "gatefuse/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gatefuse/errors.hpp"
#include "gatefuse/rng.hpp"

namespace gatefuse {

std::string to_string(TsvSchema s) {
  return s == TsvSchema::single_sentence ? "single" : "pair";
}

TsvSchema tsv_schema_from_string(const std::string& s) {
  if (s == "single" || s == "single-sentence") return TsvSchema::single_sentence;
  if (s == "pair" || s == "sentence-pair") return TsvSchema::sentence_pair;
  throw ConfigError("unknown TSV schema '" + s + "'");
}

std::string to_string(NgramRange n) { return n == NgramRange::unigram ? "1" : "1-2"; }

NgramRange ngram_range_from_string(const std::string& s) {
  if (s == "1") return NgramRange::unigram;
  if (s == "1-2") return NgramRange::uni_bigram;
  throw ConfigError("unknown ngram range '" + s + "' (expected 1 or 1-2)");
}

std::string Dataset::joined_text(std::size_t i) const {
  if (is_pair()) return texts[i] + " [SEP] " + texts_b[i];
  return texts[i];
}

Dataset Dataset::subset(const std::vector<std::size_t>& positions) const {
  Dataset out;
  out.name = name;
  out.split = split;
  out.num_classes = num_classes;
  out.ids.reserve(positions.size());
  out.labels.reserve(positions.size());
  for (std::size_t p : positions) {
    out.ids.push_back(ids.at(p));
    out.labels.push_back(labels.at(p));
    if (has_text()) out.texts.push_back(texts.at(p));
    if (is_pair()) out.texts_b.push_back(texts_b.at(p));
  }
  if (!features.empty()) out.features = features.gather_rows(positions);
  return out;
}

void Dataset::validate() const {
  if (labels.size() != ids.size()) throw ContractViolation(name + ": labels/ids size mismatch");
  if (!features.empty() && features.rows() != ids.size())
    throw ContractViolation(name + ": feature rows do not match example count");
  if (has_text() && texts.size() != ids.size())
    throw ContractViolation(name + ": text count does not match example count");
  if (is_pair() && texts_b.size() != ids.size())
    throw ContractViolation(name + ": second-text count does not match example count");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw ContractViolation(name + ": label " + std::to_string(y) + " outside [0, C)");
  std::vector<ExampleId> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ContractViolation(name + ": duplicate example ids");
}

std::string describe(const FeatureView& view) {
  if (const auto* h = std::get_if<HashedBowView>(&view))
    return "hashed_bow(d=" + std::to_string(h->dim) + ",seed=" + std::to_string(h->hash_seed) +
           ",ngrams=" + to_string(h->ngrams) + ")";
  const auto& nv = std::get<NumericView>(view);
  std::ostringstream os;
  os << "numeric(noise=" << nv.noise_std;
  os << ",seed=" << nv.seed << ")";
  return os.str();
}

std::vector<double> featurize_hashed_bow(const std::string& text, std::size_t dim,
                                         std::uint64_t hash_seed, NgramRange ngrams) {
  if (dim == 0) throw ConfigError("hashed bag-of-words needs dim > 0");
  std::vector<double> v(dim, 0.0);
  std::vector<std::string> tokens;
  {
    std::string lowered = text;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::istringstream is(lowered);
    std::string tok;
    while (is >> tok) tokens.push_back(tok);
  }
  const std::uint64_t bucket_basis = derive_seed(hash_seed, std::uint64_t{1});
  const std::uint64_t sign_basis = derive_seed(hash_seed, std::uint64_t{2});
  auto add = [&](const std::string& feature) {
    const std::uint64_t b = mix64(hash_string(feature, bucket_basis));
    const std::uint64_t s = mix64(hash_string(feature, sign_basis));
    v[b % dim] += (s & 1U) ? 1.0 : -1.0;
  };
  for (const auto& t : tokens) add(t);
  if (ngrams == NgramRange::uni_bigram)
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) add(tokens[i] + ' ' + tokens[i + 1]);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

Dataset apply_view(const Dataset& base, const FeatureView& view) {
  Dataset out = base;
  if (const auto* h = std::get_if<HashedBowView>(&view)) {
    if (!base.has_text()) throw ConfigError(base.name + ": hashed_bow view needs a text dataset");
    out.features = Tensor(base.size(), h->dim);
    for (std::size_t i = 0; i < base.size(); ++i) {
      const auto f = featurize_hashed_bow(base.joined_text(i), h->dim, h->hash_seed, h->ngrams);
      std::copy(f.begin(), f.end(), out.features.row(i).begin());
    }
    return out;
  }
  const auto& nv = std::get<NumericView>(view);
  if (base.features.empty()) throw ConfigError(base.name + ": numeric view needs features");
  if (!(nv.noise_std >= 0.0)) throw ConfigError("numeric view noise must be >= 0");
  if (nv.noise_std == 0.0) return out;
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto row = out.features.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += nv.noise_std * hashed_normal(nv.seed, base.ids[i], j);
  }
  return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace

Dataset load_tsv(const std::filesystem::path& path, TsvSchema schema,
                 const std::vector<std::string>& label_vocab) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open TSV file " + path.string());
  if (label_vocab.empty()) throw ConfigError("empty label vocabulary");
  const std::size_t expected = schema == TsvSchema::sentence_pair ? 3 : 2;
  Dataset data;
  data.name = path.stem().string();
  data.num_classes = label_vocab.size();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      const auto header = split_tabs(line);
      if (header.size() != expected || header[0] != "label")
        throw ParseError("bad TSV header, expected label<TAB>text1" +
                             std::string(expected == 3 ? "<TAB>text2" : ""),
                         line_no);
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != expected)
      throw ParseError("expected " + std::to_string(expected) + " tab-separated fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    const auto it = std::find(label_vocab.begin(), label_vocab.end(), fields[0]);
    if (it == label_vocab.end()) throw ParseError("unknown label token '" + fields[0] + "'", line_no);
    data.ids.push_back(data.ids.size());
    data.labels.push_back(static_cast<int>(it - label_vocab.begin()));
    data.texts.push_back(fields[1]);
    if (expected == 3) data.texts_b.push_back(fields[2]);
  }
  if (line_no == 0) throw ParseError("empty TSV file (missing header)", 1);
  return data;
}

void write_tsv(const Dataset& data, const std::filesystem::path& path,
               const std::vector<std::string>& label_vocab) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write TSV file " + path.string());
  out << (data.is_pair() ? "label\ttext1\ttext2\n" : "label\ttext\n");
  auto clean = [](const std::string& s) {
    if (s.find_first_of("\t\n") != std::string::npos)
      throw ContractViolation("TSV text fields may not contain tabs or newlines");
    return s;
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << label_vocab.at(static_cast<std::size_t>(data.labels[i])) << '\t' << clean(data.texts[i]);
    if (data.is_pair()) out << '\t' << clean(data.texts_b[i]);
    out << '\n';
  }
}

Dataset synth_gaussian_mixture(std::size_t n, std::size_t d, std::size_t num_classes,
                               double class_sep, double label_noise, std::uint64_t seed,
                               std::size_t clusters_per_class) {
  if (num_classes < 2) throw ConfigError("gaussian mixture needs at least 2 classes");
  if (clusters_per_class == 0) throw ConfigError("gaussian mixture needs clusters_per_class > 0");
  if (clusters_per_class == 1 && d < num_classes) throw ConfigError("gaussian mixture needs d >= C");
  if (!(class_sep > 0.0)) throw ConfigError("class_sep must be > 0");
  if (!(label_noise >= 0.0 && label_noise < 0.5)) throw ConfigError("label_noise must be in [0, 0.5)");
  if (n == 0) throw ConfigError("gaussian mixture needs n > 0");
  Rng root(seed);
  Rng class_rng = root.child("class");
  Rng feature_rng = root.child("features");
  Rng noise_rng = root.child("label_noise");
  const double offset = class_sep / std::sqrt(2.0);
  Tensor means;
  if (clusters_per_class > 1) {
    Rng mean_rng = root.child("means");
    means = Tensor(num_classes * clusters_per_class, d);
    for (double& v : means.values()) v = offset * mean_rng.normal();
  }
  Dataset data;
  data.name = "synthetic";
  data.num_classes = num_classes;
  data.features = Tensor(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(class_rng.below(num_classes));
    auto row = data.features.row(i);
    for (std::size_t j = 0; j < d; ++j) row[j] = feature_rng.normal();
    if (clusters_per_class > 1) {
      const auto k = static_cast<std::size_t>(class_rng.below(clusters_per_class));
      const auto mu = means.row(y * clusters_per_class + k);
      for (std::size_t j = 0; j < d; ++j) row[j] += mu[j];
    } else {
      row[y] += offset;
    }
    int label = static_cast<int>(y);
    if (noise_rng.uniform() < label_noise) {
      const auto shift = 1 + noise_rng.below(num_classes - 1);
      label = static_cast<int>((y + shift) % num_classes);
    }
    data.ids.push_back(i);
    data.labels.push_back(label);
  }
  return data;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double dev_fraction, std::uint64_t seed) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0))
    throw ConfigError("dev_fraction must be in (0, 1)");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng(seed).child("split");
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_dev = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> dev(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_dev));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_dev), order.end());
  std::sort(dev.begin(), dev.end());
  std::sort(train.begin(), train.end());
  Dataset tr = data.subset(train);
  Dataset dv = data.subset(dev);
  tr.split = "train";
  dv.split = "dev";
  return {std::move(tr), std::move(dv)};
}

std::string dataset_manifest_json(const Dataset& data, const std::string& provenance) {
  nlohmann::ordered_json j;
  j["name"] = data.name;
  j["split"] = data.split;
  j["n"] = data.size();
  j["C"] = data.num_classes;
  j["d"] = data.feature_dim();
  j["provenance"] = provenance;
  return j.dump(2);
}

}  // namespace gatefuse
