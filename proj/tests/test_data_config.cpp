#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "gatefuse/config.hpp"
#include "gatefuse/data.hpp"
#include "gatefuse/errors.hpp"
#include "gatefuse/report.hpp"

using namespace gatefuse;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("gatefuse_test_" + name);
  std::ofstream(path) << text;
  return path;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Tsv, LoadSingleAndPair) {
  const auto single = write_temp("single.tsv", "label\tsentence\n1\tgood film\n0\tbad film\n");
  const auto d = load_tsv(single, TsvSchema::single_sentence);
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.labels, (std::vector<int>{1, 0}));
  EXPECT_EQ(d.texts[1], "bad film");
  EXPECT_EQ(d.ids, (std::vector<ExampleId>{0, 1}));

  const auto pair = write_temp("pair.tsv", "label\tsentence1\tsentence2\n1\ta b\tc d\n");
  const auto p = load_tsv(pair, TsvSchema::sentence_pair);
  EXPECT_TRUE(p.is_pair());
  EXPECT_EQ(p.texts_b[0], "c d");
  EXPECT_NE(p.joined_text(0).find("c d"), std::string::npos);
  std::filesystem::remove(single);
  std::filesystem::remove(pair);
}

TEST(Tsv, ErrorsCarryLineNumbers) {
  const auto bad = write_temp("bad.tsv", "label\tsentence\n1\tfine\n1\ttoo\tmany\n");
  try {
    load_tsv(bad, TsvSchema::single_sentence);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  const auto label = write_temp("label.tsv", "label\tsentence\nmaybe\tfine\n");
  EXPECT_THROW(load_tsv(label, TsvSchema::single_sentence), ParseError);
  EXPECT_THROW(load_tsv("/nonexistent/file.tsv", TsvSchema::single_sentence), ConfigError);
  std::filesystem::remove(bad);
  std::filesystem::remove(label);
}

TEST(Tsv, WriteReadRoundTrip) {
  Dataset d;
  d.name = "rt";
  d.num_classes = 2;
  d.ids = {0, 1, 2};
  d.labels = {1, 0, 1};
  d.texts = {"one", "two words", "three"};
  const auto path = std::filesystem::temp_directory_path() / "gatefuse_test_rt.tsv";
  write_tsv(d, path);
  const auto back = load_tsv(path, TsvSchema::single_sentence);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.texts, d.texts);
  std::filesystem::remove(path);
}

TEST(Featurize, HashedBowProperties) {
  const auto a = featurize_hashed_bow("The cat sat", 64, 1, NgramRange::unigram);
  const auto b = featurize_hashed_bow("the   CAT sat", 64, 1, NgramRange::unigram);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(norm(a), 1.0, 1e-12);
  const auto empty = featurize_hashed_bow("", 64, 1, NgramRange::unigram);
  EXPECT_EQ(norm(empty), 0.0);
  EXPECT_NE(featurize_hashed_bow("the cat sat", 64, 2, NgramRange::unigram), a);
  EXPECT_NE(featurize_hashed_bow("the cat sat", 64, 1, NgramRange::uni_bigram), a);
}

TEST(Synthetic, DeterministicShapesAndSeparation) {
  const auto a = synth_gaussian_mixture(500, 6, 3, 4.0, 0.0, 7);
  const auto b = synth_gaussian_mixture(500, 6, 3, 4.0, 0.0, 7);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.feature_dim(), 6u);
  EXPECT_NO_THROW(a.validate());
  // Nearest-mean classification with means at class_sep/sqrt(2) e_c.
  std::size_t correct = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto row = a.features.row(i);
    correct += static_cast<int>(argmax(row.first(3))) == a.labels[i];
  }
  EXPECT_GT(static_cast<double>(correct) / 500.0, 0.85);
  EXPECT_THROW(synth_gaussian_mixture(10, 2, 3, 1.0, 0.0, 1), ConfigError);
  EXPECT_THROW(synth_gaussian_mixture(10, 4, 3, 1.0, 0.6, 1), ConfigError);
}

TEST(Synthetic, LabelNoiseRate) {
  const auto clean = synth_gaussian_mixture(4000, 4, 2, 3.0, 0.0, 3);
  const auto noisy = synth_gaussian_mixture(4000, 4, 2, 3.0, 0.2, 3);
  EXPECT_EQ(clean.features, noisy.features);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < 4000; ++i) changed += clean.labels[i] != noisy.labels[i];
  EXPECT_NEAR(static_cast<double>(changed) / 4000.0, 0.2, 0.02);
}

TEST(Synthetic, ClustersPerClass) {
  const auto d = synth_gaussian_mixture(2000, 3, 2, 3.0, 0.0, 5, 4);
  EXPECT_EQ(d.size(), 2000u);
  std::set<int> labels(d.labels.begin(), d.labels.end());
  EXPECT_EQ(labels.size(), 2u);
  EXPECT_THROW(synth_gaussian_mixture(10, 3, 2, 3.0, 0.0, 5, 0), ConfigError);
}

TEST(Split, DisjointCoverAndDeterministic) {
  const auto d = synth_gaussian_mixture(101, 4, 2, 3.0, 0.0, 7);
  const auto [train, dev] = split(d, 0.2, 11);
  EXPECT_EQ(dev.size(), 20u);
  EXPECT_EQ(train.size() + dev.size(), 101u);
  std::set<ExampleId> all(train.ids.begin(), train.ids.end());
  all.insert(dev.ids.begin(), dev.ids.end());
  EXPECT_EQ(all.size(), 101u);
  EXPECT_TRUE(std::is_sorted(dev.ids.begin(), dev.ids.end()));
  EXPECT_EQ(split(d, 0.2, 11).second.ids, dev.ids);
  EXPECT_THROW(split(d, 1.0, 11), ConfigError);
}

TEST(Views, NumericViewNoiseIsPerExample) {
  const auto d = synth_gaussian_mixture(50, 4, 2, 3.0, 0.0, 7);
  const NumericView v{0.5, 9};
  const auto full = apply_view(d, v);
  const auto [train, dev] = split(d, 0.3, 1);
  const auto part = apply_view(dev, v);
  for (std::size_t i = 0; i < dev.size(); ++i) {
    const auto pos = static_cast<std::size_t>(dev.ids[i]);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(part.features(i, j), full.features(pos, j));
  }
  EXPECT_EQ(apply_view(d, NumericView{}).features, d.features);
  EXPECT_NE(apply_view(d, NumericView{0.5, 10}).features, full.features);
  EXPECT_THROW(apply_view(d, NumericView{-1.0, 1}), ConfigError);
}

TEST(Config, ParsesSectionsArraysAndTypes) {
  const auto doc = ConfigDocument::parse(
      "# comment\n[experiment]\nname = \"x\" # trailing\nseeds = [1, 2, 3]\nflag = true\n"
      "[dataset.toy]\nkind = \"synthetic\"\nn = 100\n");
  EXPECT_EQ(doc.get_string("experiment.name", ""), "x");
  EXPECT_EQ(doc.get_doubles("experiment.seeds", {}), (std::vector<double>{1, 2, 3}));
  EXPECT_TRUE(doc.get_bool("experiment.flag", false));
  EXPECT_EQ(doc.get_int("dataset.toy.n", 0), 100);
  EXPECT_EQ(doc.subsections("dataset"), (std::vector<std::string>{"toy"}));
  EXPECT_EQ(doc.get_double("missing.key", 2.5), 2.5);
  EXPECT_THROW(doc.get_int("experiment.name", 0), ConfigError);
}

TEST(Config, ParseErrorsHaveLines) {
  try {
    ConfigDocument::parse("[a]\nx = 1\nbroken line\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(ConfigDocument::parse("[a]\nx = 1\nx = 2\n"), ParseError);
  EXPECT_THROW(ConfigDocument::parse("[a]\nx = \"open\n"), ParseError);
}

TEST(Config, ExperimentDefaultsAndUnknownKeys) {
  const auto doc = ConfigDocument::parse(
      "[experiment]\nmethods = [\"old\", \"vanilla_new\", \"gated_fusion\"]\n"
      "[dataset.toy]\nkind = \"synthetic\"\nn = 100\nclasses = 3\n");
  const auto cfg = parse_experiment_config(doc);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(cfg.hp.epochs, 5u);
  EXPECT_EQ(cfg.hp.lr, 1e-3);
  EXPECT_EQ(cfg.hp.lr2, 1e-4);
  EXPECT_EQ(cfg.hp.batch_size, 32u);
  EXPECT_EQ(cfg.hp.drop_gate, 0.5);
  EXPECT_EQ(cfg.datasets.at(0).num_classes, 3u);

  const auto typo = ConfigDocument::parse(
      "[experiment]\nmethods = [\"old\", \"vanilla_new\"]\nsedes = [1]\n[dataset.toy]\nkind = \"synthetic\"\n");
  EXPECT_THROW(parse_experiment_config(typo), ConfigError);
  const auto bad_method = ConfigDocument::parse(
      "[experiment]\nmethods = [\"old\", \"bigger_model\"]\n[dataset.toy]\nkind = \"synthetic\"\n");
  EXPECT_THROW(parse_experiment_config(bad_method), ConfigError);
  const auto no_old = ConfigDocument::parse("[experiment]\nmethods = [\"vanilla_new\"]\n[dataset.toy]\nkind = \"synthetic\"\n");
  EXPECT_THROW(parse_experiment_config(no_old), ConfigError);
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"default.toml", "smoke.toml", "synthetic.toml"}) {
    const auto path = std::filesystem::path(GATEFUSE_TEST_DATA_DIR) / "configs" / name;
    EXPECT_NO_THROW(load_experiment_config(path)) << name;
  }
}

TEST(Report, CsvRoundTripAndMissingColumn) {
  ResultRow r;
  r.scenario = "scale_up";
  r.dataset = "toy";
  r.method = "gated_fusion";
  r.report.seed = 3;
  r.report.n_examples = 10;
  r.report.accuracy = 0.1 + 0.2;
  r.report.negative_flip_rate = 1.0 / 3.0;
  r.report.negative_flip_count = 2;
  r.report.fix_rate = 0.75;
  ResultRow s = r;
  s.method = "weighted_logits";
  s.alpha = 0.7;
  s.report.fix_rate.reset();
  const std::vector<ResultRow> rows{r, s};
  EXPECT_EQ(parse_results_csv(results_csv(rows)), rows);

  const std::string text = results_csv(rows);
  const std::string header = text.substr(0, text.find('\n'));
  std::string broken = text;
  broken.replace(0, header.size(), header.substr(0, header.find(",accuracy")) + header.substr(header.find(",accuracy") + 9));
  try {
    parse_results_csv(broken);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("accuracy"), std::string::npos);
  }
}

TEST(Report, MarkdownTable) {
  std::vector<ResultRow> rows;
  const char* methods[] = {"old", "vanilla_new", "gated_fusion"};
  for (const char* m : methods)
    for (std::uint64_t seed : {1, 2}) {
      ResultRow r;
      r.scenario = "scale_up";
      r.dataset = "toy";
      r.method = m;
      r.report.seed = seed;
      r.report.accuracy = 0.9;
      r.report.negative_flip_rate = std::string(m) == "vanilla_new" ? 0.04 : std::string(m) == "old" ? 0.0 : 0.01;
      rows.push_back(r);
    }
  const auto md = render_markdown(rows);
  EXPECT_NE(md.find("## scale_up / toy"), std::string::npos);
  EXPECT_NE(md.find("| gated_fusion | 90.00 ± 0.00 | 1.00 ± 0.00 | 75.00 |"), std::string::npos) << md;
  EXPECT_EQ(percent(0.12345), "12.35");
  EXPECT_NE(render_markdown({}).find("| Method |"), std::string::npos);
}
