#include "gatefuse/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gatefuse/errors.hpp"

namespace gatefuse {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

ConfigDocument::Scalar parse_scalar(const std::string& raw, std::size_t line) {
  const std::string s = trim(raw);
  if (s.empty()) throw ParseError("missing value", line);
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw ParseError("unterminated string", line);
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        const char c = s[++i];
        out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
      } else {
        out += s[i];
      }
    }
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  std::string digits;
  for (char c : s)
    if (c != '_') digits += c;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(digits, &used);
  } catch (const std::exception&) {
    throw ParseError("cannot parse value '" + s + "'", line);
  }
  if (used != digits.size()) throw ParseError("cannot parse value '" + s + "'", line);
  return v;
}

std::vector<std::string> split_array(const std::string& body, std::size_t line) {
  std::vector<std::string> parts;
  std::string cur;
  bool in_string = false;
  for (char c : body) {
    if (c == '"') in_string = !in_string;
    if (c == ',' && !in_string) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (in_string) throw ParseError("unterminated string in array", line);
  if (!trim(cur).empty()) parts.push_back(cur);
  return parts;
}

std::string kind_name(const ConfigDocument::Scalar& s) {
  if (std::holds_alternative<bool>(s)) return "boolean";
  if (std::holds_alternative<double>(s)) return "number";
  return "string";
}

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text) {
  ConfigDocument doc;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("malformed section header", line_no);
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) throw ParseError("invalid section name '" + section + "'", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ParseError("invalid key '" + key + "'", line_no);
    const std::string full = section.empty() ? key : section + "." + key;
    if (doc.values_.count(full)) throw ParseError("duplicate key '" + full + "'", line_no);
    const std::string rhs = trim(line.substr(eq + 1));
    Value v;
    v.line = line_no;
    if (!rhs.empty() && rhs.front() == '[') {
      if (rhs.back() != ']') throw ParseError("unterminated array", line_no);
      v.is_array = true;
      for (const auto& part : split_array(rhs.substr(1, rhs.size() - 2), line_no))
        v.items.push_back(parse_scalar(part, line_no));
    } else {
      v.items.push_back(parse_scalar(rhs, line_no));
    }
    doc.values_.emplace(full, std::move(v));
    doc.order_.push_back(full);
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ":" + std::to_string(e.line()) + ": " + e.what(), e.line());
  }
}

const ConfigDocument::Value* ConfigDocument::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  read_.insert(key);
  return &it->second;
}

namespace {

template <typename T>
T scalar_as(const ConfigDocument::Scalar& s, const std::string& key, const char* want) {
  if (!std::holds_alternative<T>(s))
    throw ConfigError("'" + key + "' must be a " + want + ", got a " + kind_name(s));
  return std::get<T>(s);
}

}  // namespace

std::string ConfigDocument::get_string(const std::string& key, const std::string& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->is_array) throw ConfigError("'" + key + "' must be a string, got an array");
  return scalar_as<std::string>(v->items[0], key, "string");
}

double ConfigDocument::get_double(const std::string& key, double fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->is_array) throw ConfigError("'" + key + "' must be a number, got an array");
  return scalar_as<double>(v->items[0], key, "number");
}

std::int64_t ConfigDocument::get_int(const std::string& key, std::int64_t fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  const double d = get_double(key, 0.0);
  if (d != std::floor(d) || std::abs(d) > 9.0e15) throw ConfigError("'" + key + "' must be an integer");
  return static_cast<std::int64_t>(d);
}

bool ConfigDocument::get_bool(const std::string& key, bool fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->is_array) throw ConfigError("'" + key + "' must be a boolean, got an array");
  return scalar_as<bool>(v->items[0], key, "boolean");
}

std::vector<double> ConfigDocument::get_doubles(const std::string& key, std::vector<double> fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& s : v->items) out.push_back(scalar_as<double>(s, key, "number"));
  return out;
}

std::vector<std::string> ConfigDocument::get_strings(const std::string& key,
                                                     std::vector<std::string> fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  std::vector<std::string> out;
  for (const auto& s : v->items) out.push_back(scalar_as<std::string>(s, key, "string"));
  return out;
}

std::vector<std::string> ConfigDocument::subsections(const std::string& section) const {
  std::vector<std::string> out;
  const std::string prefix = section + ".";
  for (const auto& key : order_) {
    if (key.rfind(prefix, 0) != 0) continue;
    const auto rest = key.substr(prefix.size());
    const auto dot = rest.find('.');
    if (dot == std::string::npos) continue;
    const auto name = rest.substr(0, dot);
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

void ConfigDocument::require_all_read() const {
  for (const auto& key : order_)
    if (!read_.count(key))
      throw ConfigError("unknown config key '" + key + "' (line " + std::to_string(values_.at(key).line) + ")");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::old: return "old";
    case Method::vanilla_new: return "vanilla_new";
    case Method::distill: return "distill";
    case Method::ensemble: return "ensemble";
    case Method::weighted_probs: return "weighted_probs";
    case Method::weighted_logits: return "weighted_logits";
    case Method::gated_fusion: return "gated_fusion";
  }
  return "unknown";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::old,           Method::vanilla_new,    Method::distill,
                                           Method::ensemble,      Method::weighted_probs, Method::weighted_logits,
                                           Method::gated_fusion};
  return methods;
}

Method method_from_string(const std::string& s) {
  for (Method m : all_methods())
    if (to_string(m) == s) return m;
  throw ConfigError("unknown method '" + s + "'");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (scenarios.empty()) throw ConfigError("at least one scenario is required");
  if (datasets.empty()) throw ConfigError("at least one dataset is required");
  const bool has_old = std::find(methods.begin(), methods.end(), Method::old) != methods.end();
  if (!has_old || methods.size() < 2)
    throw ConfigError("methods must include \"old\" and at least one upgrade method");
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = i + 1; j < methods.size(); ++j)
      if (methods[i] == methods[j]) throw ConfigError("method '" + to_string(methods[i]) + "' listed twice");
  hp.validate();
  if (ensemble_k == 0) throw ConfigError("ensemble_k must be >= 1");
  for (std::size_t k : ensemble_sizes)
    if (k == 0) throw ConfigError("ensemble sizes must be >= 1");
  for (double x : cache_sweep)
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("cache coverages must be in [0, 1]");
  for (double a : alpha_grid)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha grid values must be in [0, 1]");
  if (fusion_grid.size() == 0) throw ConfigError("fusion grid lists must be nonempty");
  for (double t : fusion_grid.temperature)
    if (!(t > 0.0)) throw ConfigError("grid temperatures must be > 0");
  for (double d : fusion_grid.drop_gate)
    if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("grid drop_gate values must be in [0, 1]");
  for (double l : fusion_grid.lr2)
    if (!(l >= 0.0)) throw ConfigError("grid lr2 values must be >= 0");
  std::set<std::string> names;
  for (const auto& d : datasets) {
    if (!names.insert(d.name).second) throw ConfigError("dataset '" + d.name + "' defined twice");
    if (!(d.dev_fraction > 0.0 && d.dev_fraction < 1.0))
      throw ConfigError("dataset '" + d.name + "': dev_fraction must be in (0, 1)");
    if (d.kind == DatasetSpec::Kind::synthetic && d.clusters_per_class == 1 && d.dim < d.num_classes)
      throw ConfigError("dataset '" + d.name + "': dim must be >= classes");
  }
}

namespace {

std::uint64_t as_seed(double v, const std::string& key) {
  if (v < 0 || v != std::floor(v) || v > 9.0e15) throw ConfigError("'" + key + "' must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

std::size_t as_count(std::int64_t v, const std::string& key) {
  if (v < 0) throw ConfigError("'" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

DatasetSpec parse_dataset(const ConfigDocument& doc, const std::string& name, const std::filesystem::path& base) {
  const std::string p = "dataset." + name + ".";
  DatasetSpec d;
  d.name = name;
  const std::string kind = doc.get_string(p + "kind", "synthetic");
  if (kind == "tsv") {
    d.kind = DatasetSpec::Kind::tsv;
    const std::string path = doc.get_string(p + "path", "");
    if (path.empty()) throw ConfigError("dataset '" + name + "' needs a path");
    d.path = std::filesystem::path(path).is_absolute() || base.empty() ? std::filesystem::path(path) : base / path;
    d.schema = tsv_schema_from_string(doc.get_string(p + "schema", "single"));
    d.label_vocab = doc.get_strings(p + "labels", d.label_vocab);
    d.hashed_dim = as_count(doc.get_int(p + "hashed_dim", 2048), p + "hashed_dim");
  } else if (kind == "synthetic") {
    d.kind = DatasetSpec::Kind::synthetic;
    d.n = as_count(doc.get_int(p + "n", 6000), p + "n");
    d.dim = as_count(doc.get_int(p + "dim", 16), p + "dim");
    d.num_classes = as_count(doc.get_int(p + "classes", 2), p + "classes");
    d.class_sep = doc.get_double(p + "class_sep", d.class_sep);
    d.clusters_per_class = as_count(doc.get_int(p + "clusters", 1), p + "clusters");
    d.label_noise = doc.get_double(p + "label_noise", d.label_noise);
    d.data_seed = as_seed(doc.get_double(p + "data_seed", 7), p + "data_seed");
    d.numeric.old_noise = doc.get_double(p + "old_noise", d.numeric.old_noise);
    d.numeric.new_noise = doc.get_double(p + "new_noise", d.numeric.new_noise);
  } else {
    throw ConfigError("dataset '" + name + "': kind must be tsv or synthetic");
  }
  d.dev_fraction = doc.get_double(p + "dev_fraction", d.dev_fraction);
  d.split_seed = as_seed(doc.get_double(p + "split_seed", 11), p + "split_seed");
  return d;
}

}  // namespace

ExperimentConfig parse_experiment_config(const ConfigDocument& doc, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  c.name = doc.get_string("experiment.name", c.name);
  c.scenarios.clear();
  for (const auto& s : doc.get_strings("experiment.scenarios", {"scale_up"}))
    c.scenarios.push_back(scenario_family_from_string(s));
  std::vector<std::string> method_names;
  for (Method m : all_methods()) method_names.push_back(to_string(m));
  for (const auto& m : doc.get_strings("experiment.methods", method_names)) c.methods.push_back(method_from_string(m));
  c.seeds.clear();
  for (double s : doc.get_doubles("experiment.seeds", {1, 2, 3, 4, 5})) c.seeds.push_back(as_seed(s, "experiment.seeds"));
  const std::string out = doc.get_string("experiment.output", "out");
  c.output_dir = std::filesystem::path(out);
  c.save_models = doc.get_bool("experiment.save_models", c.save_models);
  c.ensemble_k = as_count(doc.get_int("experiment.ensemble_k", 5), "experiment.ensemble_k");
  for (double k : doc.get_doubles("experiment.ensemble_sizes", {}))
    c.ensemble_sizes.push_back(static_cast<std::size_t>(as_seed(k, "experiment.ensemble_sizes")));
  c.cache_sweep = doc.get_doubles("experiment.cache_sweep", {});
  c.alpha_grid = doc.get_doubles("experiment.alpha_grid", c.alpha_grid);
  c.parity_margin = doc.get_double("experiment.parity_margin", c.parity_margin);
  c.classifier_dropout = doc.get_double("experiment.classifier_dropout", c.classifier_dropout);

  HyperParams& hp = c.hp;
  hp.lr = doc.get_double("train.lr", hp.lr);
  hp.batch_size = as_count(doc.get_int("train.batch_size", 32), "train.batch_size");
  hp.epochs = as_count(doc.get_int("train.epochs", 5), "train.epochs");
  hp.lr2 = doc.get_double("train.lr2", hp.lr2);
  hp.drop_gate = doc.get_double("train.drop_gate", hp.drop_gate);
  hp.temperature = doc.get_double("train.temperature", hp.temperature);
  hp.distill_lambda = doc.get_double("train.distill_lambda", hp.distill_lambda);
  hp.distill_temperature = doc.get_double("train.distill_temperature", hp.distill_temperature);
  hp.gate_dropout = doc.get_double("train.gate_dropout", hp.gate_dropout);

  c.fusion_grid.temperature = doc.get_doubles("grid.temperature", {hp.temperature});
  c.fusion_grid.drop_gate = doc.get_doubles("grid.drop_gate", {hp.drop_gate});
  c.fusion_grid.lr2 = doc.get_doubles("grid.lr2", {hp.lr2});

  for (const auto& name : doc.subsections("dataset")) c.datasets.push_back(parse_dataset(doc, name, base_dir));
  doc.require_all_read();
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  const auto doc = ConfigDocument::load(path);
  return parse_experiment_config(doc, path.parent_path());
}

}  // namespace gatefuse
