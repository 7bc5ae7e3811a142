#include "gatefuse/report.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "gatefuse/errors.hpp"

namespace gatefuse {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string check_field(const std::string& s) {
  if (s.find_first_of(",\n\r") != std::string::npos)
    throw ContractViolation("CSV field '" + s + "' contains a separator");
  return s;
}

double parse_double(const std::string& s, std::size_t line, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError("column '" + column + "' holds '" + s + "', not a number", line);
}

std::uint64_t parse_u64(const std::string& s, std::size_t line, const std::string& column) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError("column '" + column + "' holds '" + s + "', not an integer", line);
}

}  // namespace

const std::vector<std::string>& results_csv_columns() {
  static const std::vector<std::string> cols{
      "scenario",           "dataset",          "method",     "variant",        "seed",
      "n_examples",         "accuracy",         "negative_flip_rate", "negative_flip_count",
      "positive_flip_count", "nfr_over_error",  "fix_rate",   "new_fault_rate", "vanilla_flip_count",
      "fixed_count",        "new_fault_count",  "alpha"};
  return cols;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  const auto& cols = results_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : rows) {
    const EvalReport& e = r.report;
    out << check_field(r.scenario) << ',' << check_field(r.dataset) << ',' << check_field(r.method) << ','
        << check_field(r.variant) << ',' << e.seed << ',' << e.n_examples << ',' << num(e.accuracy) << ','
        << num(e.negative_flip_rate) << ',' << e.negative_flip_count << ',' << e.positive_flip_count << ','
        << opt_num(e.nfr_over_error) << ',' << opt_num(e.fix_rate) << ',' << opt_num(e.new_fault_rate) << ','
        << e.vanilla_flip_count << ',' << e.fixed_count << ',' << e.new_fault_count << ',' << opt_num(r.alpha)
        << '\n';
  }
  return out.str();
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << results_csv(rows);
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("results CSV is empty (missing column 'scenario')");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) pos[header[i]] = i;
  for (const auto& c : results_csv_columns())
    if (!pos.count(c)) throw ConfigError("results CSV is missing column '" + c + "'");

  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()),
                       line_no);
    auto cell = [&](const std::string& c) -> const std::string& { return f[pos.at(c)]; };
    auto opt = [&](const std::string& c) -> std::optional<double> {
      if (cell(c).empty()) return std::nullopt;
      return parse_double(cell(c), line_no, c);
    };
    ResultRow r;
    r.scenario = cell("scenario");
    r.dataset = cell("dataset");
    r.method = cell("method");
    r.variant = cell("variant");
    EvalReport& e = r.report;
    e.seed = parse_u64(cell("seed"), line_no, "seed");
    e.n_examples = parse_u64(cell("n_examples"), line_no, "n_examples");
    e.accuracy = parse_double(cell("accuracy"), line_no, "accuracy");
    e.negative_flip_rate = parse_double(cell("negative_flip_rate"), line_no, "negative_flip_rate");
    e.negative_flip_count = parse_u64(cell("negative_flip_count"), line_no, "negative_flip_count");
    e.positive_flip_count = parse_u64(cell("positive_flip_count"), line_no, "positive_flip_count");
    e.nfr_over_error = opt("nfr_over_error");
    e.fix_rate = opt("fix_rate");
    e.new_fault_rate = opt("new_fault_rate");
    e.vanilla_flip_count = parse_u64(cell("vanilla_flip_count"), line_no, "vanilla_flip_count");
    e.fixed_count = parse_u64(cell("fixed_count"), line_no, "fixed_count");
    e.new_fault_count = parse_u64(cell("new_fault_count"), line_no, "new_fault_count");
    r.alpha = opt("alpha");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_results_csv(ss.str());
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

namespace {

using Group = std::vector<EvalReport>;

std::string mean_std(const SeedAggregate& agg, const std::string& metric) {
  const auto it = agg.metrics.find(metric);
  if (it == agg.metrics.end() || it->second.count == 0) return "n/a";
  return percent(it->second.mean) + " ± " + percent(it->second.stddev);
}

std::string mean_only(const SeedAggregate& agg, const std::string& metric) {
  const auto it = agg.metrics.find(metric);
  if (it == agg.metrics.end() || it->second.count == 0) return "n/a";
  return percent(it->second.mean);
}

double mean_of(const SeedAggregate& agg, const std::string& metric) {
  const auto it = agg.metrics.find(metric);
  return it == agg.metrics.end() ? 0.0 : it->second.mean;
}

int method_rank(const std::string& m) {
  static const std::vector<std::string> order{"old", "vanilla_new", "distill", "ensemble",
                                              "weighted_probs", "weighted_logits", "gated_fusion"};
  const auto it = std::find(order.begin(), order.end(), m);
  return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

double variant_value(const std::string& v) {
  const auto eq = v.find('=');
  return eq == std::string::npos ? 0.0 : std::stod(v.substr(eq + 1));
}

}  // namespace

std::string render_markdown(const std::vector<ResultRow>& rows) {
  // (scenario, dataset) in first-appearance order.
  std::vector<std::pair<std::string, std::string>> blocks;
  for (const auto& r : rows) {
    const std::pair<std::string, std::string> key{r.scenario, r.dataset};
    if (std::find(blocks.begin(), blocks.end(), key) == blocks.end()) blocks.push_back(key);
  }
  std::ostringstream out;
  if (blocks.empty()) {
    out << "| Method | Accuracy (%) | R_NF (%) | Rel. reduction vs vanilla (%) | Fix rate (%) | New fault rate (%) |\n";
    out << "|---|---|---|---|---|---|\n";
    return out.str();
  }
  bool first = true;
  for (const auto& [scenario, dataset] : blocks) {
    std::map<std::string, Group> main;
    std::map<std::string, Group> cache;
    std::map<std::string, Group> ens;
    for (const auto& r : rows) {
      if (r.scenario != scenario || r.dataset != dataset) continue;
      if (r.variant == "main")
        main[r.method].push_back(r.report);
      else if (r.variant.rfind("cache=", 0) == 0)
        cache[r.variant].push_back(r.report);
      else if (r.variant.rfind("k=", 0) == 0)
        ens[r.variant].push_back(r.report);
    }
    if (!first) out << '\n';
    first = false;
    out << "## " << scenario << " / " << dataset << "\n\n";
    out << "| Method | Accuracy (%) | R_NF (%) | Rel. reduction vs vanilla (%) | Fix rate (%) | New fault rate (%) |\n";
    out << "|---|---|---|---|---|---|\n";
    std::vector<std::string> methods;
    for (const auto& [m, g] : main) methods.push_back(m);
    std::stable_sort(methods.begin(), methods.end(),
                     [](const std::string& a, const std::string& b) { return method_rank(a) < method_rank(b); });
    std::optional<double> vanilla_nfr;
    if (main.count("vanilla_new")) vanilla_nfr = mean_of(aggregate(main["vanilla_new"]), "negative_flip_rate");
    for (const auto& m : methods) {
      const SeedAggregate agg = aggregate(main[m]);
      std::string rel = "n/a";
      if (vanilla_nfr && m != "old") {
        const auto rr = relative_reduction(*vanilla_nfr, mean_of(agg, "negative_flip_rate"));
        if (rr) rel = percent(*rr);
      }
      const bool upgrade = m != "old";
      out << "| " << m << " | " << mean_std(agg, "accuracy") << " | " << mean_std(agg, "negative_flip_rate")
          << " | " << rel << " | " << (upgrade ? mean_only(agg, "fix_rate") : "n/a") << " | "
          << (upgrade ? mean_only(agg, "new_fault_rate") : "n/a") << " |\n";
    }
    auto sweep = [&](const std::map<std::string, Group>& groups, const char* title, const char* col) {
      if (groups.empty()) return;
      std::vector<std::string> variants;
      for (const auto& [v, g] : groups) variants.push_back(v);
      std::sort(variants.begin(), variants.end(),
                [](const std::string& a, const std::string& b) { return variant_value(a) < variant_value(b); });
      out << "\n### " << title << "\n\n| " << col << " | Accuracy (%) | R_NF (%) |\n|---|---|---|\n";
      for (const auto& v : variants) {
        const SeedAggregate agg = aggregate(groups.at(v));
        out << "| " << v.substr(v.find('=') + 1) << " | " << mean_std(agg, "accuracy") << " | "
            << mean_std(agg, "negative_flip_rate") << " |\n";
      }
    };
    sweep(cache, "Gated fusion with a partial logit cache", "Cached fraction");
    sweep(ens, "Majority-vote ensemble size", "Members");
  }
  return out.str();
}

}  // namespace gatefuse
