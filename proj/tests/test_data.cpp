#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "debias_lab/data.hpp"

using namespace debias;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("debias_lab_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

SynthConfig small_config(double strength, std::size_t n_train = 3000) {
  SynthConfig cfg;
  cfg.n_train = n_train;
  cfg.n_val = 300;
  cfg.n_test = 300;
  cfg.artifact_strength = strength;
  return cfg;
}

}  // namespace

TEST(Tokenize, LowercasesAndStripsPunctuation) {
  EXPECT_EQ(tokenize("A man, sleeping."), (std::vector<std::string>{"a", "man", "sleeping"}));
  EXPECT_EQ(tokenize("  \"Nobody\" is   here!! "), (std::vector<std::string>{"nobody", "is", "here"}));
  EXPECT_EQ(tokenize("don't"), (std::vector<std::string>{"don't"}));
  EXPECT_TRUE(tokenize("... --- !!!").empty());
  EXPECT_TRUE(tokenize("").empty());
}

TEST(Labels, ParseAndName) {
  for (Label l : kAllLabels) EXPECT_EQ(parse_label(label_name(l)), l);
  EXPECT_FALSE(parse_label("-").has_value());
  EXPECT_FALSE(parse_label("Entailment").has_value());
}

TEST(Jsonl, LoadsSkipsNoConsensusAndBlankLines) {
  const auto dir = temp_dir("load");
  const auto path = write_text(dir / "x.jsonl",
                               R"({"sentence1":"A man sleeps.","sentence2":"A person sleeps.","gold_label":"entailment"})"
                               "\n\n"
                               R"({"sentence1":"A dog runs.","sentence2":"A cat sits.","gold_label":"-"})"
                               "\n"
                               R"({"sentence1":"A dog runs.","sentence2":"Nobody runs.","gold_label":"contradiction","extra":1})"
                               "\n");
  LoadStats stats;
  const Dataset ds = load_snli_jsonl(path, Split::train, &stats);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(stats.lines, 3u);
  EXPECT_EQ(stats.skipped_no_consensus, 1u);
  EXPECT_EQ(ds.examples[0].label, Label::entailment);
  EXPECT_EQ(ds.examples[1].hypothesis, "Nobody runs.");
  EXPECT_EQ(ds.provenance, Provenance::snli_jsonl);
}

TEST(Jsonl, ErrorsNameTheLine) {
  const auto dir = temp_dir("errors");
  const auto bad_json = write_text(dir / "bad.jsonl",
                                   R"({"sentence1":"a","sentence2":"b","gold_label":"neutral"})"
                                   "\n{not json\n");
  try {
    load_snli_jsonl(bad_json, Split::train);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  const auto missing = write_text(dir / "missing.jsonl", R"({"sentence1":"a","gold_label":"neutral"})" "\n");
  EXPECT_THROW(load_snli_jsonl(missing, Split::train), Error);
  const auto unknown = write_text(dir / "unknown.jsonl",
                                  R"({"sentence1":"a","sentence2":"b","gold_label":"maybe"})" "\n");
  EXPECT_THROW(load_snli_jsonl(unknown, Split::train), Error);
  const auto empty = write_text(dir / "empty.jsonl", "\n\n");
  EXPECT_THROW(load_snli_jsonl(empty, Split::train), Error);
  EXPECT_THROW(load_snli_jsonl(dir / "absent.jsonl", Split::train), Error);
}

TEST(Jsonl, RoundTripPreservesExamples) {
  const auto corpus = generate_synthetic(small_config(0.7, 600));
  const auto dir = temp_dir("roundtrip");
  write_jsonl(corpus.train, dir / "train.jsonl");
  const Dataset back = load_snli_jsonl(dir / "train.jsonl", Split::train);
  ASSERT_EQ(back.size(), corpus.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back.examples[i], corpus.train.examples[i]);
}

TEST(Synthetic, UniformThreeHundredIsBalanced) {
  SynthConfig cfg = small_config(0.7);
  cfg.n_train = 300;
  const auto corpus = generate_synthetic(cfg);
  const auto st = dataset_stats(corpus.train);
  EXPECT_EQ(st.label_counts, (std::array<std::size_t, 3>{100, 100, 100}));
}

TEST(Synthetic, DeterministicPerSeed) {
  const auto a = generate_synthetic(small_config(0.7, 500));
  const auto b = generate_synthetic(small_config(0.7, 500));
  EXPECT_EQ(a.train.examples, b.train.examples);
  EXPECT_EQ(a.test.examples, b.test.examples);
  SynthConfig other = small_config(0.7, 500);
  other.seed = 14;
  EXPECT_NE(generate_synthetic(other).train.examples, a.train.examples);
}

TEST(Synthetic, SplitsAreDisjointInIdSpace) {
  const auto corpus = generate_synthetic(small_config(0.7, 500));
  std::set<std::string> ids;
  std::size_t total = 0;
  for (const Dataset* ds : {&corpus.train, &corpus.validation, &corpus.test}) {
    for (const auto& ex : ds->examples) ids.insert(ex.id);
    total += ds->size();
  }
  EXPECT_EQ(ids.size(), total);
}

TEST(Synthetic, FullStrengthPutsNegationInEveryContradiction) {
  const auto st = dataset_stats(generate_synthetic(small_config(1.0)).train);
  EXPECT_DOUBLE_EQ(st.negation_rate[label_index(Label::contradiction)], 1.0);
  EXPECT_DOUBLE_EQ(st.generic_rate[label_index(Label::neutral)], 1.0);
}

TEST(Synthetic, ZeroStrengthCuesIndependentOfLabel) {
  const auto st = dataset_stats(generate_synthetic(small_config(0.0, 10000)).train);
  for (std::size_t k = 0; k < all_cue_words().size(); ++k) {
    double lo = 1.0, hi = 0.0;
    for (int l = 0; l < kNumLabels; ++l) {
      lo = std::min(lo, st.cue_rates[l][k]);
      hi = std::max(hi, st.cue_rates[l][k]);
    }
    EXPECT_LT(hi - lo, 0.03) << all_cue_words()[k];
  }
  double lo = 1.0, hi = 0.0;
  for (int l = 0; l < kNumLabels; ++l) {
    lo = std::min(lo, st.negation_rate[l]);
    hi = std::max(hi, st.negation_rate[l]);
  }
  EXPECT_LT(hi - lo, 0.03);
}

TEST(Synthetic, ArtifactsConcentrateCues) {
  const auto st = dataset_stats(generate_synthetic(small_config(0.7)).train);
  const int c = label_index(Label::contradiction), n = label_index(Label::neutral),
            e = label_index(Label::entailment);
  EXPECT_GT(st.negation_rate[c], st.negation_rate[e] + 0.4);
  EXPECT_GT(st.generic_rate[n], st.generic_rate[e] + 0.4);
}

TEST(Synthetic, InvalidConfigRejected) {
  SynthConfig cfg = small_config(1.3);
  EXPECT_THROW(generate_synthetic(cfg), Error);
  cfg = small_config(0.7);
  cfg.n_test = 0;
  EXPECT_THROW(generate_synthetic(cfg), Error);
  cfg = small_config(0.7);
  cfg.lexicon.subjects.clear();
  EXPECT_THROW(generate_synthetic(cfg), Error);
}

TEST(Synthetic, MetaSidecarRoundTrips) {
  SynthConfig cfg = small_config(0.4, 400);
  cfg.background_cue_rate = 0.2;
  cfg.seed = 99;
  const auto dir = temp_dir("meta");
  write_synthetic_corpus(generate_synthetic(cfg), cfg, dir, "toy");
  for (const char* f : {"toy.train.jsonl", "toy.validation.jsonl", "toy.test.jsonl", "toy.meta.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "toy.meta.json");
  const SynthConfig back = synth_config_from_json(nlohmann::json::parse(in));
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.n_train, 400u);
  EXPECT_DOUBLE_EQ(back.artifact_strength, 0.4);
  EXPECT_DOUBLE_EQ(back.background_cue_rate, 0.2);
  EXPECT_EQ(generate_synthetic(back).train.examples, generate_synthetic(cfg).train.examples);
}
