#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "debias_lab/behavioral.hpp"
#include "debias_lab/checkpoint.hpp"
#include "debias_lab/data.hpp"
#include "debias_lab/error.hpp"
#include "debias_lab/experiment.hpp"
#include "debias_lab/poe.hpp"
#include "debias_lab/probe.hpp"
#include "debias_lab/report.hpp"
#include "debias_lab/vocab.hpp"

// Command implementations behind the debias_lab binary. Every command writes
// config.lock.json next to its outputs; run_command(read_lock(path)) repeats it.
namespace debias {

namespace fs = std::filesystem;

struct CommandResult {
  std::vector<fs::path> written;
  std::string summary;
};

namespace detail {

inline Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "validation" || name == "val") return Split::validation;
  if (name == "test") return Split::test;
  throw Error("unknown split: " + name);
}

inline Dataset load_split(const DataSource& src, Split split, std::ostream& log) {
  if (src.synth) {
    // Generation is cheap; regenerate rather than cache.
    SyntheticCorpus corpus = generate_synthetic(*src.synth);
    switch (split) {
      case Split::train: return std::move(corpus.train);
      case Split::validation: return std::move(corpus.validation);
      case Split::test: return std::move(corpus.test);
    }
  }
  const std::string& path = split == Split::train        ? src.train_path
                            : split == Split::validation ? src.val_path
                                                         : src.test_path;
  if (path.empty()) throw Error("no " + std::string(split_name(split)) + " file given");
  if (!fs::exists(path)) throw Error("data file not found: " + path);
  LoadStats stats;
  Dataset ds = load_snli_jsonl(path, split, &stats);
  log << "loaded " << ds.size() << " " << split_name(split) << " examples from " << path << " ("
      << stats.skipped_no_consensus << " skipped without gold consensus)\n";
  return ds;
}

inline SyntheticCorpus load_all(const DataSource& src, std::ostream& log) {
  if (src.synth) return generate_synthetic(*src.synth);
  return SyntheticCorpus{load_split(src, Split::train, log), load_split(src, Split::validation, log),
                         load_split(src, Split::test, log)};
}

inline std::string tag(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.run_id + "_seed" + std::to_string(seed);
}

struct LoadedRun {
  Vocabulary vocab;
  std::optional<LoadedCheckpoint> main;
  std::optional<LoadedCheckpoint> bias;
  double main_wall_seconds = 0.0;
};

inline LoadedRun load_run(const ExperimentConfig& cfg, bool need_main, bool need_bias) {
  if (cfg.run_dir.empty() && cfg.model_dir.empty() && cfg.bias_dir.empty()) {
    throw Error("no trained run given (use --run or --model)");
  }
  const fs::path run = cfg.run_dir;
  fs::path vocab_path;
  if (!cfg.run_dir.empty()) {
    vocab_path = run / "vocab.txt";
  } else {
    vocab_path = fs::path(cfg.model_dir.empty() ? cfg.bias_dir : cfg.model_dir).parent_path() / "vocab.txt";
  }
  if (!fs::exists(vocab_path)) throw Error("vocabulary not found: " + vocab_path.string());
  LoadedRun out{Vocabulary::load(vocab_path), std::nullopt, std::nullopt, 0.0};
  auto load = [&](const std::string& override_dir, const char* sub) {
    const fs::path dir = override_dir.empty() ? run / sub : fs::path(override_dir);
    LoadedCheckpoint ck = load_checkpoint(dir);
    if (ck.info.vocab_hash != out.vocab.fingerprint()) {
      throw Error("checkpoint " + dir.string() + " was trained with a different vocabulary");
    }
    return ck;
  };
  if (need_main) out.main = load(cfg.model_dir, "main");
  if (need_bias) out.bias = load(cfg.bias_dir, "bias");
  if (!cfg.run_dir.empty()) {
    std::ifstream t(run / "timing.csv");
    std::string line;
    while (std::getline(t, line)) {
      if (line.rfind("main,", 0) == 0) out.main_wall_seconds = std::stod(line.substr(5));
    }
  }
  return out;
}

inline void finish(const ExperimentConfig& cfg, CommandResult& r) {
  const fs::path lock = fs::path(cfg.out_dir) / "config.lock.json";
  write_lock(cfg, lock);
  r.written.push_back(lock);
}

}  // namespace detail

// Fills in data sources that were left implicit (eval/behave/probe reuse the
// training run's data) so the lock file is self-contained.
inline ExperimentConfig resolve(ExperimentConfig cfg) {
  const bool has_data = cfg.data.synth || !cfg.data.train_path.empty() || !cfg.data.val_path.empty() ||
                        !cfg.data.test_path.empty();
  if (!has_data && !cfg.run_dir.empty()) {
    const fs::path lock = fs::path(cfg.run_dir) / "config.lock.json";
    if (fs::exists(lock)) cfg.data = read_lock(lock).data;
  }
  const bool still_none = !cfg.data.synth && cfg.data.train_path.empty() && cfg.data.val_path.empty() &&
                          cfg.data.test_path.empty();
  if (still_none) cfg.data.synth = SynthConfig{};
  return cfg;
}

inline CommandResult run_gen_data(const ExperimentConfig& cfg, std::ostream& log) {
  if (!cfg.data.synth) throw Error("gen-data needs a synthetic configuration");
  const SyntheticCorpus corpus = generate_synthetic(*cfg.data.synth);
  write_synthetic_corpus(corpus, *cfg.data.synth, cfg.out_dir, cfg.corpus_name);
  CommandResult r;
  for (const char* part : {"train.jsonl", "validation.jsonl", "test.jsonl", "meta.json"}) {
    r.written.push_back(fs::path(cfg.out_dir) / (cfg.corpus_name + "." + part));
  }
  const DatasetStats st = dataset_stats(corpus.train);
  std::ostringstream s;
  s << "wrote " << corpus.train.size() << "/" << corpus.validation.size() << "/" << corpus.test.size()
    << " examples to " << cfg.out_dir << "\n";
  for (Label l : kAllLabels) {
    s << "  " << label_name(l) << ": negation cue " << pct(st.negation_rate[label_index(l)])
      << ", generic cue " << pct(st.generic_rate[label_index(l)]) << "\n";
  }
  r.summary = s.str();
  log << r.summary;
  detail::finish(cfg, r);
  return r;
}

inline CommandResult run_train(const ExperimentConfig& cfg, std::ostream& log) {
  const Dataset train_set = detail::load_split(cfg.data, Split::train, log);
  const Dataset val_set = detail::load_split(cfg.data, Split::validation, log);
  const Vocabulary vocab = build_vocab(train_set, cfg.data.vocab_min_count);
  log << "vocabulary: " << vocab.size() << " ids\n";
  const TrainResult res = train(train_set, val_set, vocab, cfg.train);

  const fs::path out = cfg.out_dir;
  CommandResult r;
  fs::create_directories(out);
  vocab.save(out / "vocab.txt");
  r.written.push_back(out / "vocab.txt");
  save_checkpoint(out / "main", res.main.params, {vocab.fingerprint(), cfg.train.seed, res.main.optimizer.t},
                  &res.main.optimizer);
  save_checkpoint(out / "bias", res.bias.params, {vocab.fingerprint(), cfg.train.seed, res.bias.optimizer.t},
                  &res.bias.optimizer);
  r.written.push_back(out / "main");
  r.written.push_back(out / "bias");
  write_file(out / "history.csv", [&](std::ostream& o) { write_history_csv(res.history, o); });
  write_file(out / "bias_history.csv", [&](std::ostream& o) { write_history_csv(res.bias_history, o); });
  r.written.push_back(out / "history.csv");
  r.written.push_back(out / "bias_history.csv");
  if (cfg.train.mode == TrainMode::poe) {
    write_file(out / "weights.csv", [&](std::ostream& o) { write_weights_csv(res.weights, o); });
    r.written.push_back(out / "weights.csv");
  }
  write_file(out / "timing.csv", [&](std::ostream& o) {
    o << "stage,wall_seconds\n";
    o << "main," << fmt_num(res.main_wall_seconds) << '\n';
    o << "total," << fmt_num(res.wall_seconds) << '\n';
  });
  r.written.push_back(out / "timing.csv");

  std::ostringstream s;
  s << "mode " << mode_name(cfg.train.mode) << ", lambda " << cfg.train.lambda << ", seed " << cfg.train.seed
    << "\n";
  for (const auto& h : res.history) {
    s << "  epoch " << h.epoch << ": loss " << h.train_loss << ", val acc " << pct(h.val_acc)
      << ", val bias agreement " << pct(h.val_bias_agreement) << "\n";
  }
  s << "main checksum " << hex64(res.main.params.checksum()) << "\n";
  s << "bias checksum " << hex64(res.bias.params.checksum()) << "\n";
  r.summary = s.str();
  write_file(out / "summary.txt", [&](std::ostream& o) { o << r.summary; });
  r.written.push_back(out / "summary.txt");
  log << r.summary;
  detail::finish(cfg, r);
  return r;
}

inline CommandResult run_eval(const ExperimentConfig& cfg, std::ostream& log) {
  const detail::LoadedRun run = detail::load_run(cfg, true, true);
  Dataset ds = detail::load_split(cfg.data, detail::parse_split(cfg.split), log);
  if (cfg.subset == "negation-overlap") {
    ds = select_negation_overlap_subset(ds);
    log << "negation-overlap subset: " << ds.size() << " examples\n";
    if (ds.empty()) throw Error("negation-overlap subset is empty");
  } else if (!cfg.subset.empty()) {
    throw Error("unknown subset: " + cfg.subset);
  }
  std::vector<BehavioralSuite> suites;
  if (cfg.behavioral) {
    for (Category c : cfg.categories) suites.push_back(gen_behavioral_suite(c, cfg.suite_size, cfg.suite_seed));
  }
  const RunReport rep =
      evaluate(run.main->params, run.bias->params, run.vocab, ds, suites, run.main_wall_seconds);
  const fs::path out = cfg.out_dir;
  const std::string t = detail::tag(cfg, run.main->info.seed);
  CommandResult r;
  write_file(out / ("report_" + t + ".csv"), [&](std::ostream& o) { write_report_csv(rep, o); });
  write_file(out / ("calibration_" + t + ".csv"), [&](std::ostream& o) { write_calibration_csv(rep.calibration, o); });
  r.written.push_back(out / ("report_" + t + ".csv"));
  r.written.push_back(out / ("calibration_" + t + ".csv"));
  if (!rep.behavioral.empty()) {
    write_file(out / ("behavioral_" + t + ".csv"), [&](std::ostream& o) { write_behavioral_csv(rep.behavioral, o); });
    r.written.push_back(out / ("behavioral_" + t + ".csv"));
  }
  r.summary = summary_text(rep, "evaluation " + t + " (" + cfg.split +
                                    (cfg.subset.empty() ? "" : ", " + cfg.subset) + ")");
  write_file(out / ("summary_" + t + ".txt"), [&](std::ostream& o) { o << r.summary; });
  r.written.push_back(out / ("summary_" + t + ".txt"));
  log << r.summary;
  detail::finish(cfg, r);
  return r;
}

inline CommandResult run_sweep(const ExperimentConfig& cfg, std::ostream& log) {
  const SyntheticCorpus corpus = detail::load_all(cfg.data, log);
  const Vocabulary vocab = build_vocab(corpus.train, cfg.data.vocab_min_count);
  const auto rows = sweep_lambda(corpus, vocab, cfg.train, cfg.lambdas, cfg.seeds);
  const fs::path out = cfg.out_dir;
  CommandResult r;
  write_file(out / "sweep.csv", [&](std::ostream& o) { write_sweep_csv(rows, o); });
  write_file(out / "sweep_seeds.csv", [&](std::ostream& o) {
    o << "lambda,seed,accuracy,bias_agreement\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        o << fmt_num(row.lambda) << ',' << cfg.seeds[i] << ',' << fmt_num(row.seed_accuracy[i]) << ','
          << fmt_num(row.seed_bias_agreement[i]) << '\n';
      }
    }
  });
  r.written.push_back(out / "sweep.csv");
  r.written.push_back(out / "sweep_seeds.csv");
  std::ostringstream s;
  s << "lambda sweep over " << cfg.seeds.size() << " seed(s)\n";
  for (const auto& row : rows) {
    s << "  lambda " << row.lambda << ": accuracy " << pct(row.accuracy) << ", bias agreement "
      << pct(row.bias_agreement) << "\n";
  }
  r.summary = s.str();
  log << r.summary;
  detail::finish(cfg, r);
  return r;
}

inline void write_suites_jsonl(std::span<const BehavioralSuite> suites, std::ostream& out) {
  for (const auto& suite : suites) {
    for (const auto& c : suite.cases) {
      nlohmann::ordered_json j;
      j["category"] = category_name(suite.category);
      j["premise"] = c.item.premise;
      j["hypothesis"] = c.item.hypothesis;
      j["expected"] = label_name(c.item.expected);
      if (c.base) {
        j["base_premise"] = c.base->premise;
        j["base_hypothesis"] = c.base->hypothesis;
        j["base_expected"] = label_name(c.base->expected);
      }
      out << j.dump() << '\n';
    }
  }
}

inline CommandResult run_behave(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.categories.empty()) throw Error("no behavioral categories selected");
  const detail::LoadedRun run = detail::load_run(cfg, true, false);
  std::vector<BehavioralSuite> suites;
  for (Category c : cfg.categories) suites.push_back(gen_behavioral_suite(c, cfg.suite_size, cfg.suite_seed));
  const auto scores = run_behavioral(run.main->params, run.vocab, suites);
  const fs::path out = cfg.out_dir;
  const std::string t = detail::tag(cfg, run.main->info.seed);
  CommandResult r;
  write_file(out / ("behavioral_" + t + ".csv"), [&](std::ostream& o) { write_behavioral_csv(scores, o); });
  write_file(out / "suites.jsonl", [&](std::ostream& o) { write_suites_jsonl(suites, o); });
  r.written.push_back(out / ("behavioral_" + t + ".csv"));
  r.written.push_back(out / "suites.jsonl");
  RunReport rep;
  rep.behavioral = scores;
  std::ostringstream s;
  s << "behavioral suites (" << cfg.suite_size << " cases each, suite seed " << cfg.suite_seed << ")\n";
  for (const auto& sc : scores) {
    s << "  " << category_name(sc.category) << ": accuracy " << pct(sc.accuracy);
    if (sc.flip_rate) s << ", flip-rate " << pct(*sc.flip_rate);
    if (sc.consistency) s << ", consistency " << pct(*sc.consistency);
    s << "\n";
  }
  r.summary = s.str();
  write_file(out / ("behavioral_" + t + ".txt"), [&](std::ostream& o) { o << r.summary; });
  r.written.push_back(out / ("behavioral_" + t + ".txt"));
  log << r.summary;
  detail::finish(cfg, r);
  return r;
}

inline CommandResult run_probe(const ExperimentConfig& cfg, std::ostream& log) {
  const detail::LoadedRun run = detail::load_run(cfg, false, true);
  const Dataset ds = detail::load_split(cfg.data, detail::parse_split(cfg.probe_split), log);
  const ProbeReport rep = probe_artifacts(run.bias->params, run.vocab, ds, cfg.probe);
  const fs::path out = cfg.out_dir;
  const std::string t = detail::tag(cfg, run.bias->info.seed);
  CommandResult r;
  write_file(out / ("probe_" + t + ".csv"), [&](std::ostream& o) { write_probe_csv(rep, o); });
  r.written.push_back(out / ("probe_" + t + ".csv"));
  r.summary = probe_summary_text(rep);
  write_file(out / ("probe_" + t + ".txt"), [&](std::ostream& o) { o << r.summary; });
  r.written.push_back(out / ("probe_" + t + ".txt"));
  log << r.summary;
  detail::finish(cfg, r);
  return r;
}

inline CommandResult run_command(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.command == "gen-data") return run_gen_data(cfg, log);
  if (cfg.command == "train") return run_train(cfg, log);
  if (cfg.command == "eval") return run_eval(cfg, log);
  if (cfg.command == "sweep") return run_sweep(cfg, log);
  if (cfg.command == "behave") return run_behave(cfg, log);
  if (cfg.command == "probe") return run_probe(cfg, log);
  throw Error("unknown command: " + cfg.command);
}

}  // namespace debias
