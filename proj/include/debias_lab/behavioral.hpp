#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "debias_lab/data.hpp"
#include "debias_lab/error.hpp"
#include "debias_lab/model.hpp"
#include "debias_lab/rng.hpp"
#include "debias_lab/tokenize.hpp"
#include "debias_lab/vocab.hpp"

namespace debias {

enum class Category { negation_sensitivity, paraphrase_robustness, lexical_overlap_invariance, numeric_reasoning };

inline constexpr std::array<Category, 4> kAllCategories = {
    Category::negation_sensitivity, Category::paraphrase_robustness,
    Category::lexical_overlap_invariance, Category::numeric_reasoning};

inline std::string_view category_name(Category c) {
  switch (c) {
    case Category::negation_sensitivity: return "negation_sensitivity";
    case Category::paraphrase_robustness: return "paraphrase_robustness";
    case Category::lexical_overlap_invariance: return "lexical_overlap_invariance";
    case Category::numeric_reasoning: return "numeric_reasoning";
  }
  return "?";
}

inline Category parse_category(std::string_view name) {
  for (Category c : kAllCategories) {
    if (category_name(c) == name) return c;
  }
  throw Error("unknown behavioral category: " + std::string(name));
}

inline constexpr std::size_t kMinSuiteSize = 200;
inline constexpr std::size_t kMaxSuiteSize = 500;

struct BehavioralItem {
  std::string premise;
  std::string hypothesis;
  Label expected = Label::entailment;

  bool operator==(const BehavioralItem&) const = default;
};

struct BehavioralCase {
  BehavioralItem item;
  std::optional<BehavioralItem> base;  // unperturbed counterpart for paired categories

  bool operator==(const BehavioralCase&) const = default;
};

struct BehavioralSuite {
  Category category = Category::negation_sensitivity;
  std::uint64_t seed = 0;
  std::vector<BehavioralCase> cases;
};

namespace detail {

inline std::string sentence(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s + ".";
}

inline void check_lexicon(const Lexicon& lex) {
  if (lex.subjects.empty() || lex.predicates.empty() || lex.locations.empty()) {
    throw Error("behavioral suites need non-empty subject, predicate and location pools");
  }
}

}  // namespace detail

// Templated perturbation suite. A pure function of (category, n, seed, lexicon).
inline BehavioralSuite gen_behavioral_suite(Category category, std::size_t n, std::uint64_t seed,
                                            const Lexicon& lex = default_lexicon()) {
  if (n < kMinSuiteSize || n > kMaxSuiteSize) {
    throw Error("behavioral suite size must be in [" + std::to_string(kMinSuiteSize) + ", " +
                std::to_string(kMaxSuiteSize) + "], got " + std::to_string(n));
  }
  detail::check_lexicon(lex);
  Rng rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(category)));
  BehavioralSuite suite{category, seed, {}};
  suite.cases.reserve(n);
  const std::span<const std::string> subjects(lex.subjects);
  const std::span<const std::string> locations(lex.locations);

  for (std::size_t i = 0; i < n; ++i) {
    const std::string& subj = rng.pick(subjects);
    const PredicatePair& pair = lex.predicates[rng.index(lex.predicates.size())];
    const int side = static_cast<int>(rng.index(2));
    const std::string& pred = side == 0 ? pair.first : pair.second;
    const std::string& pred_syn = side == 0 ? pair.first_synonym : pair.second_synonym;
    const std::string& anto = side == 0 ? pair.second : pair.first;
    const std::string& anto_syn = side == 0 ? pair.second_synonym : pair.first_synonym;
    BehavioralCase c;

    switch (category) {
      case Category::negation_sensitivity: {
        const std::string premise = detail::sentence("a " + subj + " is " + pred);
        c.base = BehavioralItem{premise, premise, Label::entailment};
        c.item = {premise, detail::sentence("a " + subj + " is not " + pred), Label::contradiction};
        break;
      }
      case Category::paraphrase_robustness: {
        const std::string premise =
            detail::sentence("a " + subj + " is " + pred + " " + rng.pick(locations));
        if (i % 2 == 0) {
          c.base = BehavioralItem{premise, detail::sentence("the " + subj + " is " + pred), Label::entailment};
          c.item = {premise, detail::sentence("the " + subj + " is " + pred_syn), Label::entailment};
        } else {
          c.base = BehavioralItem{premise, detail::sentence("the " + subj + " is " + anto),
                                  Label::contradiction};
          c.item = {premise, detail::sentence("the " + subj + " is " + anto_syn), Label::contradiction};
        }
        break;
      }
      case Category::lexical_overlap_invariance: {
        const std::string& loc = rng.pick(locations);
        c.item = {detail::sentence("a " + subj + " is " + pred + " " + loc),
                  detail::sentence("a " + subj + " is " + anto + " " + loc), Label::contradiction};
        break;
      }
      case Category::numeric_reasoning: {
        // "5 people ..." entails "more than 2 people ..." and contradicts "more than 7".
        const std::size_t k = 2 + rng.index(8);  // 2..9
        std::size_t m;
        Label expected;
        if (i % 2 == 0) {
          m = 1 + rng.index(k - 1);  // 1..k-1
          expected = Label::entailment;
        } else {
          m = k + rng.index(10 - k);  // k..9
          expected = Label::contradiction;
        }
        c.item = {detail::sentence(std::to_string(k) + " people are " + pred + " " + rng.pick(locations)),
                  detail::sentence("more than " + std::to_string(m) + " people are " + pred), expected};
        break;
      }
    }
    suite.cases.push_back(std::move(c));
  }
  return suite;
}

struct BehavioralScore {
  Category category = Category::negation_sensitivity;
  std::size_t n = 0;
  double accuracy = 0.0;  // over perturbed items
  // Paired categories only: fraction of pairs where the prediction changed and
  // the perturbed prediction is the expected label.
  std::optional<double> flip_rate;
  // Paired categories only: fraction of pairs whose prediction did not change.
  std::optional<double> consistency;
};

// Any classifier mapping (premise, hypothesis) to a label.
template <typename Predictor>
BehavioralScore score_suite(const BehavioralSuite& suite, Predictor&& predict_label) {
  BehavioralScore s{suite.category, suite.cases.size(), 0.0, std::nullopt, std::nullopt};
  if (suite.cases.empty()) return s;
  std::size_t correct = 0, pairs = 0, flips = 0, same = 0;
  for (const auto& c : suite.cases) {
    const Label got = predict_label(c.item.premise, c.item.hypothesis);
    correct += got == c.item.expected;
    if (c.base) {
      const Label base_got = predict_label(c.base->premise, c.base->hypothesis);
      ++pairs;
      flips += got != base_got && got == c.item.expected;
      same += got == base_got;
    }
  }
  s.accuracy = static_cast<double>(correct) / static_cast<double>(suite.cases.size());
  if (pairs > 0) {
    s.flip_rate = static_cast<double>(flips) / static_cast<double>(pairs);
    s.consistency = static_cast<double>(same) / static_cast<double>(pairs);
  }
  return s;
}

inline std::vector<BehavioralScore> run_behavioral(const ModelParams& model, const Vocabulary& vocab,
                                                   std::span<const BehavioralSuite> suites) {
  if (model.dims.variant != Variant::full) throw Error("run_behavioral expects a full model");
  auto predict_label = [&](const std::string& premise, const std::string& hypothesis) {
    const Example ex{"", premise, hypothesis, Label::entailment};
    return predict(encode_example(ex, vocab), model).argmax();
  };
  std::vector<BehavioralScore> out;
  out.reserve(suites.size());
  for (const auto& suite : suites) out.push_back(score_suite(suite, predict_label));
  return out;
}

// Hypothesis token-set overlap with the premise: |P ∩ H| / |H|.
inline double lexical_overlap(std::string_view premise, std::string_view hypothesis) {
  const auto p = tokenize(premise);
  const auto h = tokenize(hypothesis);
  const std::set<std::string> ps(p.begin(), p.end()), hs(h.begin(), h.end());
  if (hs.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : hs) shared += ps.count(t);
  return static_cast<double>(shared) / static_cast<double>(hs.size());
}

inline const std::vector<std::string>& subset_negation_words() {
  static const std::vector<std::string> words = {"not", "nobody", "never"};
  return words;
}

inline bool is_negation_overlap(const Example& ex, double min_overlap = 0.5) {
  const auto h = tokenize(ex.hypothesis);
  bool cue = false;
  for (const auto& t : h) {
    for (const auto& w : subset_negation_words()) cue = cue || t == w;
  }
  return cue && lexical_overlap(ex.premise, ex.hypothesis) >= min_overlap;
}

inline Dataset select_negation_overlap_subset(const Dataset& ds) {
  std::vector<Example> kept;
  for (const auto& ex : ds.examples) {
    if (is_negation_overlap(ex)) kept.push_back(ex);
  }
  return ds.with_examples(std::move(kept));
}

}  // namespace debias
