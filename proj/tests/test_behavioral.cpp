#include <gtest/gtest.h>

#include <regex>

#include "debias_lab/behavioral.hpp"

using namespace debias;

namespace {

Lexicon person_running() {
  Lexicon lex;
  lex.subjects = {"person"};
  lex.predicates = {{"running", "sprinting", "resting", "lounging"}};
  lex.locations = {"in the park"};
  return lex;
}

}  // namespace

TEST(Suites, SizeBoundsEnforced) {
  for (Category c : kAllCategories) {
    EXPECT_THROW(gen_behavioral_suite(c, 199, 1), Error);
    EXPECT_THROW(gen_behavioral_suite(c, 501, 1), Error);
    EXPECT_EQ(gen_behavioral_suite(c, 200, 1).cases.size(), 200u);
    EXPECT_EQ(gen_behavioral_suite(c, 500, 1).cases.size(), 500u);
  }
}

TEST(Suites, DeterministicPerSeed) {
  for (Category c : kAllCategories) {
    const auto a = gen_behavioral_suite(c, 300, 9);
    const auto b = gen_behavioral_suite(c, 300, 9);
    const auto other = gen_behavioral_suite(c, 300, 10);
    EXPECT_EQ(a.cases, b.cases) << category_name(c);
    EXPECT_NE(a.cases, other.cases) << category_name(c);
  }
}

TEST(Suites, NegationPairsMatchTemplate) {
  const auto suite = gen_behavioral_suite(Category::negation_sensitivity, 200, 1, person_running());
  bool saw_running = false;
  for (const auto& c : suite.cases) {
    ASSERT_TRUE(c.base.has_value());
    EXPECT_EQ(c.base->expected, Label::entailment);
    EXPECT_EQ(c.item.expected, Label::contradiction);
    if (c.item.premise == "A person is running.") {
      saw_running = true;
      EXPECT_EQ(c.base->hypothesis, "A person is running.");
      EXPECT_EQ(c.item.hypothesis, "A person is not running.");
    }
  }
  EXPECT_TRUE(saw_running);
}

TEST(Suites, NumericCasesRespectCounts) {
  const auto suite = gen_behavioral_suite(Category::numeric_reasoning, 300, 4);
  const std::regex prem(R"(^(\d) people are .*)"), hyp(R"(^More than (\d) people are .*)");
  std::size_t ent = 0;
  for (const auto& c : suite.cases) {
    std::smatch pm, hm;
    ASSERT_TRUE(std::regex_match(c.item.premise, pm, prem)) << c.item.premise;
    ASSERT_TRUE(std::regex_match(c.item.hypothesis, hm, hyp)) << c.item.hypothesis;
    const int k = std::stoi(pm[1]), m = std::stoi(hm[1]);
    EXPECT_EQ(c.item.expected, k > m ? Label::entailment : Label::contradiction);
    ent += c.item.expected == Label::entailment;
  }
  EXPECT_EQ(ent, 150u);
}

TEST(Suites, OverlapCasesAreHighOverlapContradictions) {
  const auto suite = gen_behavioral_suite(Category::lexical_overlap_invariance, 250, 2);
  for (const auto& c : suite.cases) {
    EXPECT_EQ(c.item.expected, Label::contradiction);
    EXPECT_GE(lexical_overlap(c.item.premise, c.item.hypothesis), 0.5);
    EXPECT_FALSE(c.base.has_value());
  }
}

TEST(Suites, ParaphrasesKeepTheLabel) {
  const auto suite = gen_behavioral_suite(Category::paraphrase_robustness, 200, 3);
  for (const auto& c : suite.cases) {
    ASSERT_TRUE(c.base.has_value());
    EXPECT_EQ(c.base->expected, c.item.expected);
    EXPECT_EQ(c.base->premise, c.item.premise);
    EXPECT_NE(c.base->hypothesis, c.item.hypothesis);
  }
}

TEST(Scoring, ConstantPredictorNeverFlips) {
  for (Category c : kAllCategories) {
    const auto suite = gen_behavioral_suite(c, 200, 5);
    for (Label fixed : kAllLabels) {
      const auto s = score_suite(suite, [&](const std::string&, const std::string&) { return fixed; });
      EXPECT_GE(s.accuracy, 0.0);
      EXPECT_LE(s.accuracy, 1.0);
      if (s.flip_rate) {
        EXPECT_EQ(*s.flip_rate, 0.0);
        EXPECT_EQ(*s.consistency, 1.0);
      }
    }
  }
}

TEST(Scoring, OraclePredictorIsPerfect) {
  const auto suite = gen_behavioral_suite(Category::negation_sensitivity, 200, 5);
  const auto s = score_suite(suite, [](const std::string&, const std::string& h) {
    return h.find(" not ") != std::string::npos ? Label::contradiction : Label::entailment;
  });
  EXPECT_EQ(s.accuracy, 1.0);
  EXPECT_EQ(*s.flip_rate, 1.0);
}

TEST(Subset, SelectsNegationWithOverlap) {
  Dataset ds{Split::test,
             Provenance::snli_jsonl,
             {{"1", "A person is sleeping in a bed", "Nobody is sleeping", Label::contradiction},
              {"2", "A man cooks", "A chef prepares food", Label::entailment},
              {"3", "A man cooks", "Nobody is dancing at the beach tonight", Label::contradiction},
              {"4", "A dog is never sad", "The dog is never sad", Label::entailment}}};
  EXPECT_NEAR(lexical_overlap(ds.examples[0].premise, ds.examples[0].hypothesis), 2.0 / 3.0, 1e-15);
  const Dataset sub = select_negation_overlap_subset(ds);
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.examples[0].id, "1");
  EXPECT_EQ(sub.examples[1].id, "4");
  EXPECT_EQ(select_negation_overlap_subset(sub).examples, sub.examples);
  EXPECT_TRUE(select_negation_overlap_subset(Dataset{}).empty());
}

TEST(Categories, NamesRoundTrip) {
  for (Category c : kAllCategories) EXPECT_EQ(parse_category(category_name(c)), c);
  EXPECT_THROW(parse_category("sarcasm"), Error);
}
