#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "debias_lab/error.hpp"
#include "debias_lab/rng.hpp"
#include "debias_lab/tokenize.hpp"

namespace debias {

enum class Label : int { entailment = 0, contradiction = 1, neutral = 2 };

inline constexpr int kNumLabels = 3;
inline constexpr std::array<Label, kNumLabels> kAllLabels = {
    Label::entailment, Label::contradiction, Label::neutral};

inline std::string_view label_name(Label label) {
  switch (label) {
    case Label::entailment: return "entailment";
    case Label::contradiction: return "contradiction";
    case Label::neutral: return "neutral";
  }
  return "?";
}

inline std::optional<Label> parse_label(std::string_view name) {
  for (Label l : kAllLabels) {
    if (label_name(l) == name) return l;
  }
  return std::nullopt;
}

inline int label_index(Label label) { return static_cast<int>(label); }

enum class Split { train, validation, test };

inline std::string_view split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

enum class Provenance { snli_jsonl, synthetic };

struct Example {
  std::string id;
  std::string premise;
  std::string hypothesis;
  Label label = Label::entailment;

  friend bool operator==(const Example&, const Example&) = default;
};

struct Dataset {
  Split split = Split::train;
  Provenance provenance = Provenance::synthetic;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }

  // Same split/provenance with a subset of the examples.
  Dataset with_examples(std::vector<Example> subset) const {
    return Dataset{split, provenance, std::move(subset)};
  }
};

// Cue lexicons: the hypothesis-side words the hypothesis-only model latches
// onto (negation for contradiction, generic words for neutral).
inline const std::vector<std::string>& negation_cues() {
  static const std::vector<std::string> cues = {"not", "nobody", "no", "never"};
  return cues;
}

inline const std::vector<std::string>& generic_cues() {
  static const std::vector<std::string> cues = {"person", "something", "outside"};
  return cues;
}

inline const std::vector<std::string>& all_cue_words() {
  static const std::vector<std::string> cues = [] {
    std::vector<std::string> all = negation_cues();
    all.insert(all.end(), generic_cues().begin(), generic_cues().end());
    return all;
  }();
  return cues;
}

// ---------------------------------------------------------------------------
// SNLI JSONL

struct LoadStats {
  std::size_t lines = 0;          // non-blank lines read
  std::size_t skipped_no_consensus = 0;  // gold_label == "-"
};

inline Dataset load_snli_jsonl(const std::filesystem::path& path, Split split,
                               LoadStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path.string());

  Dataset ds{split, Provenance::snli_jsonl, {}};
  LoadStats local;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    ++local.lines;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    auto field = [&](const char* key) -> std::string {
      auto it = obj.find(key);
      if (!obj.is_object() || it == obj.end() || !it->is_string()) {
        throw Error(path.string() + ":" + std::to_string(line_no) + ": missing string field '" +
                    key + "'");
      }
      return it->get<std::string>();
    };
    const std::string gold = field("gold_label");
    if (gold == "-") {
      ++local.skipped_no_consensus;
      continue;
    }
    auto label = parse_label(gold);
    if (!label) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": unknown gold_label '" + gold +
                  "'");
    }
    ds.examples.push_back(Example{std::string(split_name(split)) + "-" + std::to_string(line_no),
                                  field("sentence1"), field("sentence2"), *label});
  }
  if (local.lines == 0) throw Error("empty corpus file: " + path.string());
  if (stats) *stats = local;
  return ds;
}

inline void write_jsonl(const Dataset& ds, std::ostream& out) {
  for (const Example& ex : ds.examples) {
    nlohmann::ordered_json obj;
    obj["sentence1"] = ex.premise;
    obj["sentence2"] = ex.hypothesis;
    obj["gold_label"] = label_name(ex.label);
    out << obj.dump() << '\n';
  }
}

inline void write_jsonl(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_jsonl(ds, out);
  if (!out) throw Error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Synthetic corpus

// A predicate pair holds two mutually exclusive predicates, each with a
// synonym: {first, first_synonym, second, second_synonym}.
struct PredicatePair {
  std::string first, first_synonym, second, second_synonym;
};

struct Lexicon {
  std::vector<std::string> subjects;
  std::vector<PredicatePair> predicates;
  std::vector<std::string> locations;
};

inline Lexicon default_lexicon() {
  Lexicon lex;
  lex.subjects = {"man",      "woman",   "boy",       "girl",     "child",     "teenager",
                  "worker",   "chef",    "doctor",    "nurse",    "teacher",   "student",
                  "farmer",   "artist",  "musician",  "dancer",   "singer",    "athlete",
                  "runner",   "driver",  "pilot",     "soldier",  "officer",   "clerk",
                  "baker",    "painter", "writer",    "reader",   "tourist",   "traveler",
                  "player",   "golfer",  "swimmer",   "climber",  "surfer",    "skater",
                  "cyclist",  "fisherman", "gardener", "mechanic", "carpenter", "plumber",
                  "lawyer",   "judge",   "banker",    "waiter",   "waitress",  "cashier",
                  "guard",    "vendor"};
  lex.predicates = {
      {"happy", "cheerful", "sad", "gloomy"},
      {"awake", "alert", "asleep", "sleeping"},
      {"sitting", "seated", "standing", "upright"},
      {"laughing", "giggling", "crying", "weeping"},
      {"hot", "warm", "cold", "chilly"},
      {"wet", "soaked", "dry", "parched"},
      {"young", "youthful", "old", "elderly"},
      {"tall", "towering", "short", "small"},
      {"full", "satisfied", "hungry", "starving"},
      {"clean", "tidy", "dirty", "filthy"},
      {"loud", "noisy", "quiet", "silent"},
      {"rich", "wealthy", "poor", "broke"},
      {"strong", "powerful", "weak", "feeble"},
      {"busy", "working", "idle", "lazy"},
      {"calm", "relaxed", "angry", "furious"},
      {"healthy", "well", "sick", "ill"},
      {"smiling", "grinning", "frowning", "scowling"},
      {"winning", "victorious", "losing", "defeated"},
      {"arriving", "coming", "leaving", "departing"},
      {"running", "sprinting", "resting", "lounging"},
      {"early", "punctual", "late", "tardy"},
      {"brave", "bold", "scared", "afraid"},
      {"friendly", "kind", "hostile", "mean"},
      {"fast", "quick", "slow", "sluggish"},
      {"dressed", "clothed", "naked", "nude"},
  };
  lex.locations = {
      "in the park",      "at the beach",     "on a bench",      "near a building",
      "in the kitchen",   "on the street",    "in a cafe",       "at the station",
      "in the office",    "on a boat",        "in the garden",   "at the market",
      "in a library",     "on the stage",     "in the snow",     "by the river",
      "at the airport",   "in a classroom",   "on a bridge",     "in the forest",
      "at the zoo",       "in a museum",      "at the hospital", "near the church",
      "in the stadium",   "at the mall",      "in a restaurant", "in the bakery",
      "on a farm",        "in a field",       "in the desert",   "on the mountain",
      "by the lake",      "at the harbor",    "in the subway",   "on a bus",
      "on the train",     "in a hotel",       "at the gym",      "by the pool",
      "in the theater",   "in a factory",     "at the school",   "in the square",
      "in an alley",      "in the courtyard", "on a balcony",    "on the rooftop",
      "in a tent",        "in a cabin"};
  return lex;
}

struct SynthConfig {
  std::size_t n_train = 10000;
  std::size_t n_val = 1000;
  std::size_t n_test = 2000;
  // Probability that a contradiction hypothesis is forced to carry a negation
  // cue and a neutral hypothesis a generic cue.
  double artifact_strength = 0.7;
  // Label-independent rate at which any hypothesis uses a meaning-preserving
  // negated or generic phrasing. Keeps cue words present in every class.
  double background_cue_rate = 0.2;
  // Probability that a hypothesis repeats the premise location.
  double location_rate = 0.5;
  // Entailment hypotheses also get an annotator habit: with probability
  // artifact_strength they name the premise subject ("the chef ...") where
  // other hypotheses say "someone".
  bool entailment_artifacts = true;
  // Label-independent rate of "the {subject}" phrasing.
  double specific_subject_rate = 0.0;
  // Artifact-injected hypotheses never repeat the location.
  bool terse_injection = true;
  // "outside" / "about something" neutral rewrites keep the premise predicate,
  // so only the added detail makes them neutral.
  bool detail_keeps_predicate = true;
  Lexicon lexicon = default_lexicon();
  std::uint64_t seed = 13;
};

inline void validate(const SynthConfig& cfg) {
  if (cfg.n_train == 0 || cfg.n_val == 0 || cfg.n_test == 0) {
    throw Error("synthetic split sizes must be positive");
  }
  if (!(cfg.artifact_strength >= 0.0 && cfg.artifact_strength <= 1.0)) {
    throw Error("artifact_strength must lie in [0, 1]");
  }
  if (!(cfg.background_cue_rate >= 0.0 && cfg.background_cue_rate <= 1.0)) {
    throw Error("background_cue_rate must lie in [0, 1]");
  }
  if (!(cfg.location_rate >= 0.0 && cfg.location_rate <= 1.0)) {
    throw Error("location_rate must lie in [0, 1]");
  }
  if (!(cfg.specific_subject_rate >= 0.0 && cfg.specific_subject_rate <= 1.0)) {
    throw Error("specific_subject_rate must lie in [0, 1]");
  }
  if (cfg.lexicon.subjects.empty()) throw Error("empty lexicon pool: subjects");
  if (cfg.lexicon.locations.empty()) throw Error("empty lexicon pool: locations");
  if (cfg.lexicon.predicates.size() < 2) {
    throw Error("empty lexicon pool: predicates (need at least two pairs)");
  }
}

namespace detail {

// Picks the surface word for one side of a predicate pair.
inline const std::string& predicate_word(const PredicatePair& p, int side, bool synonym) {
  if (side == 0) return synonym ? p.first_synonym : p.first;
  return synonym ? p.second_synonym : p.second;
}

inline Example make_synthetic_example(const SynthConfig& cfg, Label label, std::string id,
                                      Rng& rng) {
  const Lexicon& lex = cfg.lexicon;
  const std::string& subject = lex.subjects[rng.index(lex.subjects.size())];
  const std::string& location = lex.locations[rng.index(lex.locations.size())];
  const std::size_t pair = rng.index(lex.predicates.size());
  const int side = static_cast<int>(rng.index(2));

  std::string premise;
  const std::string& premise_pred =
      predicate_word(lex.predicates[pair], side, rng.bernoulli(0.5));
  if (rng.bernoulli(0.5)) {
    premise = "A " + subject + " is " + premise_pred + " " + location + ".";
  } else {
    premise = "A " + subject + " " + location + " is " + premise_pred + ".";
  }

  const bool injected = (label != Label::entailment || cfg.entailment_artifacts) &&
                        rng.bernoulli(cfg.artifact_strength);
  const bool neg = (label == Label::contradiction && injected) ||
                   rng.bernoulli(cfg.background_cue_rate);
  const bool generic = (label == Label::neutral && injected) ||
                       rng.bernoulli(cfg.background_cue_rate);

  // Meaning of the hypothesis predicate relative to the premise: same side,
  // opposite side, or a different pair altogether (neutral).
  std::size_t hyp_pair = pair;
  int hyp_side = side;
  switch (label) {
    case Label::entailment: hyp_side = neg ? 1 - side : side; break;
    case Label::contradiction: hyp_side = neg ? side : 1 - side; break;
    case Label::neutral:
      hyp_pair = rng.index(lex.predicates.size() - 1);
      if (hyp_pair >= pair) ++hyp_pair;
      hyp_side = static_cast<int>(rng.index(2));
      break;
  }

  // Generic cue realization: annotator-style neutral injections use any of
  // the generic words; everything else uses the hypernym subject.
  enum class GenericForm { none, person_subject, outside_suffix, something_suffix };
  GenericForm gform = GenericForm::none;
  if (generic) {
    gform = GenericForm::person_subject;
    if (label == Label::neutral && injected) {
      const std::size_t k = rng.index(3);
      gform = k == 0 ? GenericForm::person_subject
                     : (k == 1 ? GenericForm::outside_suffix : GenericForm::something_suffix);
    }
  }

  // Detail rewrites keep the premise predicate; the added detail is what
  // makes them neutral.
  if (cfg.detail_keeps_predicate &&
      (gform == GenericForm::outside_suffix || gform == GenericForm::something_suffix)) {
    hyp_pair = pair;
    hyp_side = side;
  }
  const std::string& hyp_pred =
      predicate_word(lex.predicates[hyp_pair], hyp_side, rng.bernoulli(0.5));

  std::string subject_phrase;
  if (gform == GenericForm::person_subject) {
    subject_phrase = "a person";
  } else {
    const bool specific = (label == Label::entailment && injected) ||
                          rng.bernoulli(cfg.specific_subject_rate);
    subject_phrase = specific ? "the " + subject : "someone";
  }

  std::string negation;
  if (neg) {
    static const std::vector<std::string> kBackground = {"not", "never"};
    const auto& pool = (label == Label::contradiction && injected) ? negation_cues() : kBackground;
    negation = pool[rng.index(pool.size())];
  }

  std::string hypothesis;
  if (negation == "nobody") {
    hypothesis = gform == GenericForm::person_subject ? "no person is " + hyp_pred
                                                      : "nobody is " + hyp_pred;
  } else if (negation == "no") {
    hypothesis = (gform == GenericForm::person_subject ? std::string("no person") : std::string("no one")) +
                 " is " + hyp_pred;
  } else if (!negation.empty()) {
    hypothesis = subject_phrase + " is " + negation + " " + hyp_pred;
  } else {
    hypothesis = subject_phrase + " is " + hyp_pred;
  }

  if (gform == GenericForm::outside_suffix) {
    hypothesis += " outside";
  } else if (gform == GenericForm::something_suffix) {
    hypothesis += " about something";
  } else if (!(injected && cfg.terse_injection) && rng.bernoulli(cfg.location_rate)) {
    hypothesis += " " + location;
  }
  hypothesis[0] = static_cast<char>(hypothesis[0] - 'a' + 'A');
  hypothesis += ".";

  return Example{std::move(id), std::move(premise), std::move(hypothesis), label};
}

inline Dataset generate_split(const SynthConfig& cfg, Split split, std::size_t n,
                              std::uint64_t stream) {
  Rng rng(derive_seed(cfg.seed, stream));
  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = kAllLabels[i % kNumLabels];
  rng.shuffle(std::span<Label>(labels));

  Dataset ds{split, Provenance::synthetic, {}};
  ds.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.examples.push_back(make_synthetic_example(
        cfg, labels[i], std::string(split_name(split)) + "-" + std::to_string(i + 1), rng));
  }
  return ds;
}

}  // namespace detail

struct SyntheticCorpus {
  Dataset train, validation, test;
};

// Pure function of the config. Class counts per split differ by at most one;
// ids follow "<split>-<1-based index>", matching what the JSONL loader
// assigns when the split is written out and read back.
inline SyntheticCorpus generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  return SyntheticCorpus{detail::generate_split(cfg, Split::train, cfg.n_train, 0),
                         detail::generate_split(cfg, Split::validation, cfg.n_val, 1),
                         detail::generate_split(cfg, Split::test, cfg.n_test, 2)};
}

inline nlohmann::ordered_json to_json(const SynthConfig& cfg) {
  nlohmann::ordered_json j;
  j["n_train"] = cfg.n_train;
  j["n_val"] = cfg.n_val;
  j["n_test"] = cfg.n_test;
  j["artifact_strength"] = cfg.artifact_strength;
  j["background_cue_rate"] = cfg.background_cue_rate;
  j["location_rate"] = cfg.location_rate;
  j["entailment_artifacts"] = cfg.entailment_artifacts;
  j["specific_subject_rate"] = cfg.specific_subject_rate;
  j["terse_injection"] = cfg.terse_injection;
  j["detail_keeps_predicate"] = cfg.detail_keeps_predicate;
  j["seed"] = cfg.seed;
  auto& lex = j["lexicon"];
  lex["subjects"] = cfg.lexicon.subjects;
  lex["locations"] = cfg.lexicon.locations;
  lex["predicates"] = nlohmann::ordered_json::array();
  for (const auto& p : cfg.lexicon.predicates) {
    lex["predicates"].push_back({p.first, p.first_synonym, p.second, p.second_synonym});
  }
  return j;
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig cfg;
  cfg.n_train = j.at("n_train").get<std::size_t>();
  cfg.n_val = j.at("n_val").get<std::size_t>();
  cfg.n_test = j.at("n_test").get<std::size_t>();
  cfg.artifact_strength = j.at("artifact_strength").get<double>();
  cfg.background_cue_rate = j.at("background_cue_rate").get<double>();
  cfg.location_rate = j.value("location_rate", cfg.location_rate);
  cfg.entailment_artifacts = j.value("entailment_artifacts", cfg.entailment_artifacts);
  cfg.specific_subject_rate = j.value("specific_subject_rate", cfg.specific_subject_rate);
  cfg.terse_injection = j.value("terse_injection", cfg.terse_injection);
  cfg.detail_keeps_predicate = j.value("detail_keeps_predicate", cfg.detail_keeps_predicate);
  cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("lexicon")) {
    const auto& lex = j.at("lexicon");
    cfg.lexicon.subjects = lex.at("subjects").get<std::vector<std::string>>();
    cfg.lexicon.locations = lex.at("locations").get<std::vector<std::string>>();
    cfg.lexicon.predicates.clear();
    for (const auto& p : lex.at("predicates")) {
      const auto words = p.get<std::vector<std::string>>();
      if (words.size() != 4) throw Error("predicate pair must list four words");
      cfg.lexicon.predicates.push_back({words[0], words[1], words[2], words[3]});
    }
  }
  return cfg;
}

// Writes <dir>/<name>.{train,validation,test}.jsonl and <dir>/<name>.meta.json.
inline void write_synthetic_corpus(const SyntheticCorpus& corpus, const SynthConfig& cfg,
                                   const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  for (const Dataset* ds : {&corpus.train, &corpus.validation, &corpus.test}) {
    write_jsonl(*ds, dir / (name + "." + std::string(split_name(ds->split)) + ".jsonl"));
  }
  std::ofstream meta(dir / (name + ".meta.json"), std::ios::binary);
  if (!meta) throw Error("cannot write meta sidecar in " + dir.string());
  meta << to_json(cfg).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Summary statistics

struct DatasetStats {
  std::array<std::size_t, kNumLabels> label_counts{};
  double mean_premise_tokens = 0.0;
  double mean_hypothesis_tokens = 0.0;
  // cue_rates[label][k]: fraction of that label's hypotheses containing
  // all_cue_words()[k].
  std::array<std::vector<double>, kNumLabels> cue_rates;
  // Fraction of each label's hypotheses containing any negation / generic cue.
  std::array<double, kNumLabels> negation_rate{};
  std::array<double, kNumLabels> generic_rate{};
};

inline bool contains_any(const std::vector<std::string>& tokens,
                         const std::vector<std::string>& words) {
  for (const auto& t : tokens) {
    for (const auto& w : words) {
      if (t == w) return true;
    }
  }
  return false;
}

inline DatasetStats dataset_stats(const Dataset& ds) {
  const auto& cues = all_cue_words();
  DatasetStats s;
  for (auto& r : s.cue_rates) r.assign(cues.size(), 0.0);
  double premise_tokens = 0.0, hyp_tokens = 0.0;
  for (const Example& ex : ds.examples) {
    const int li = label_index(ex.label);
    ++s.label_counts[li];
    const auto p = tokenize(ex.premise);
    const auto h = tokenize(ex.hypothesis);
    premise_tokens += static_cast<double>(p.size());
    hyp_tokens += static_cast<double>(h.size());
    const std::set<std::string> hset(h.begin(), h.end());
    for (std::size_t k = 0; k < cues.size(); ++k) {
      if (hset.count(cues[k])) s.cue_rates[li][k] += 1.0;
    }
    if (contains_any(h, negation_cues())) s.negation_rate[li] += 1.0;
    if (contains_any(h, generic_cues())) s.generic_rate[li] += 1.0;
  }
  if (!ds.empty()) {
    s.mean_premise_tokens = premise_tokens / static_cast<double>(ds.size());
    s.mean_hypothesis_tokens = hyp_tokens / static_cast<double>(ds.size());
  }
  for (int li = 0; li < kNumLabels; ++li) {
    const double n = static_cast<double>(s.label_counts[li]);
    if (n == 0.0) continue;
    for (double& r : s.cue_rates[li]) r /= n;
    s.negation_rate[li] /= n;
    s.generic_rate[li] /= n;
  }
  return s;
}

}  // namespace debias
