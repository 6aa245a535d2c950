// debias_lab: command-line front end.
//
//   debias_lab gen-data --n-train 10000 --artifact-strength 0.7 --seed 13 --out data/
//   debias_lab train --mode poe --lambda 1.5 --out runs/poe
//   debias_lab eval --run runs/poe --subset negation-overlap
//   debias_lab sweep --lambdas 0,0.5,1.0,1.5,2.0 --seeds 1,2,3
//   debias_lab behave --run runs/poe --category negation_sensitivity
//   debias_lab probe --run runs/poe
//   debias_lab rerun runs/poe/config.lock.json --out runs/poe-again

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "debias_lab/commands.hpp"

namespace {

using namespace debias;

struct DataFlags {
  SynthConfig synth;
  std::string train_file, val_file, test_file;
  std::size_t min_count = 1;
};

void add_synth_flags(CLI::App* cmd, SynthConfig& s, bool seed_is_data_seed) {
  cmd->add_option("--n-train", s.n_train, "synthetic train size")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--n-val", s.n_val, "synthetic validation size")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--n-test", s.n_test, "synthetic test size")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--artifact-strength", s.artifact_strength, "cue injection probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--background-cue-rate", s.background_cue_rate, "label-independent cue rate")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--location-rate", s.location_rate, "hypothesis location rate")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  if (!seed_is_data_seed) {
    cmd->add_option("--data-seed", s.seed, "synthetic corpus seed")->capture_default_str();
  }
}

void add_data_flags(CLI::App* cmd, DataFlags& d) {
  add_synth_flags(cmd, d.synth, false);
  cmd->add_option("--train-file", d.train_file, "SNLI-format JSONL train split");
  cmd->add_option("--val-file", d.val_file, "SNLI-format JSONL validation split");
  cmd->add_option("--test-file", d.test_file, "SNLI-format JSONL test split");
  cmd->add_option("--vocab-min-count", d.min_count, "minimum token count")->check(CLI::PositiveNumber)->capture_default_str();
}

// With no JSONL paths the synthetic flags define the data. For commands that
// read a trained run, untouched synthetic flags mean "reuse the run's data".
DataSource to_source(const DataFlags& d, CLI::App* cmd, bool inherit_from_run) {
  DataSource src;
  src.vocab_min_count = d.min_count;
  if (!d.train_file.empty() || !d.val_file.empty() || !d.test_file.empty()) {
    src.train_path = d.train_file;
    src.val_path = d.val_file;
    src.test_path = d.test_file;
    return src;
  }
  bool touched = false;
  for (const char* f : {"--n-train", "--n-val", "--n-test", "--artifact-strength", "--background-cue-rate",
                        "--location-rate", "--data-seed"}) {
    touched = touched || cmd->count(f) > 0;
  }
  if (!inherit_from_run || touched) src.synth = d.synth;
  return src;
}

void add_train_flags(CLI::App* cmd, TrainConfig& t, std::string& mode) {
  cmd->add_option("--mode", mode, "standard or poe")->check(CLI::IsMember({"standard", "poe"}))->capture_default_str();
  cmd->add_option("--lambda", t.lambda, "PoE exponent")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--epsilon", t.epsilon, "PoE weight stabilizer")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--weight-cap", t.weight_cap, "raw weight cap")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--epochs", t.epochs, "training epochs")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size, "micro-batch size")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--grad-accum", t.grad_accum, "micro-batches per update")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--lr", t.optimizer.lr, "AdamW learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--weight-decay", t.optimizer.weight_decay, "AdamW decoupled weight decay")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--d-embed", t.d_embed, "embedding width")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--d-hidden", t.d_hidden, "hidden width")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--bias-epochs", t.bias_epochs, "bias model epochs (0: same as --epochs)")->capture_default_str();
  cmd->add_option("--bias-lr", t.bias_lr, "bias model learning rate (0: same as --lr)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

void add_run_flags(CLI::App* cmd, ExperimentConfig& c) {
  cmd->add_option("--run", c.run_dir, "output directory of a train command");
  cmd->add_option("--model", c.model_dir, "main checkpoint directory (default <run>/main)");
  cmd->add_option("--bias-model", c.bias_dir, "bias checkpoint directory (default <run>/bias)");
  cmd->add_option("--run-id", c.run_id, "tag used in output file names")->capture_default_str();
}

std::string resolve_out(const std::string& flag_value, const std::string& fallback) {
  if (const char* env = std::getenv("DEBIAS_LAB_OUT"); env && *env) return env;
  return flag_value.empty() ? fallback : flag_value;
}

int run(const ExperimentConfig& cfg) {
  try {
    const CommandResult r = run_command(cfg, std::cerr);
    for (const auto& p : r.written) std::cout << p.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Artifact-aware NLI training lab: hypothesis-only bias model, PoE reweighting, evaluation"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  DataFlags data;
  std::string mode = "poe";
  std::string out;
  std::uint64_t seed = 1;
  std::vector<double> lambdas = cfg.lambdas;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> categories;
  std::string lock_path;

  auto* gen = app.add_subcommand("gen-data", "write a synthetic corpus as JSONL plus meta");
  add_synth_flags(gen, data.synth, true);
  gen->add_option("--seed", data.synth.seed, "corpus seed")->capture_default_str();
  gen->add_option("--name", cfg.corpus_name, "file name prefix")->capture_default_str();
  gen->add_option("--out", out, "output directory");

  auto* trn = app.add_subcommand("train", "train the bias model, compute weights, train the main model");
  add_data_flags(trn, data);
  add_train_flags(trn, cfg.train, mode);
  trn->add_option("--seed", seed, "training seed")->capture_default_str();
  trn->add_option("--out", out, "output directory");

  auto* evl = app.add_subcommand("eval", "accuracy, macro-F1, bias agreement and calibration");
  add_data_flags(evl, data);
  add_run_flags(evl, cfg);
  evl->add_option("--split", cfg.split, "split to evaluate")
      ->check(CLI::IsMember({"train", "validation", "test"}))
      ->capture_default_str();
  evl->add_option("--subset", cfg.subset, "restrict to a subset")->check(CLI::IsMember({"negation-overlap"}));
  evl->add_flag("--behavioral", cfg.behavioral, "also run the behavioral suites");
  evl->add_option("--suite-size", cfg.suite_size, "cases per behavioral suite")
      ->check(CLI::Range(kMinSuiteSize, kMaxSuiteSize))
      ->capture_default_str();
  evl->add_option("--suite-seed", cfg.suite_seed, "behavioral suite seed")->capture_default_str();
  evl->add_option("--out", out, "output directory");

  auto* swp = app.add_subcommand("sweep", "lambda ablation over shared seeds");
  add_data_flags(swp, data);
  add_train_flags(swp, cfg.train, mode);
  swp->add_option("--lambdas", lambdas, "comma-separated lambda values")->delimiter(',')->capture_default_str();
  swp->add_option("--seeds", seeds, "comma-separated seeds")->delimiter(',');
  swp->add_option("--seed", seed, "single seed when --seeds is absent")->capture_default_str();
  swp->add_option("--out", out, "output directory");

  auto* beh = app.add_subcommand("behave", "behavioral test suites");
  add_run_flags(beh, cfg);
  beh->add_option("--category", categories, "suite category (repeatable; default all)")
      ->check(CLI::IsMember({"negation_sensitivity", "paraphrase_robustness", "lexical_overlap_invariance",
                             "numeric_reasoning"}));
  beh->add_option("--n", cfg.suite_size, "cases per suite")
      ->check(CLI::Range(kMinSuiteSize, kMaxSuiteSize))
      ->capture_default_str();
  beh->add_option("--seed", cfg.suite_seed, "suite seed")->capture_default_str();
  beh->add_option("--out", out, "output directory");

  auto* prb = app.add_subcommand("probe", "logistic-regression probe of bias-model confidence");
  add_data_flags(prb, data);
  add_run_flags(prb, cfg);
  prb->add_option("--split", cfg.probe_split, "split to probe")
      ->check(CLI::IsMember({"train", "validation", "test"}))
      ->capture_default_str();
  prb->add_option("--threshold", cfg.probe.threshold, "high-confidence threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  prb->add_option("--iterations", cfg.probe.iterations, "gradient-descent iterations")->capture_default_str();
  prb->add_option("--probe-lr", cfg.probe.lr, "probe learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  prb->add_option("--l2", cfg.probe.l2, "L2 penalty")->check(CLI::NonNegativeNumber)->capture_default_str();
  prb->add_option("--top-k", cfg.probe.top_k, "features listed per label")->capture_default_str();
  prb->add_option("--seed", cfg.probe.seed, "train/test split seed")->capture_default_str();
  prb->add_option("--out", out, "output directory");

  auto* rer = app.add_subcommand("rerun", "repeat a command from its config.lock.json");
  rer->add_option("lock", lock_path, "lock file")->required()->check(CLI::ExistingFile);
  rer->add_option("--out", out, "output directory (default: the locked one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (rer->parsed()) {
      ExperimentConfig locked = read_lock(lock_path);
      locked.out_dir = resolve_out(out, locked.out_dir);
      return run(locked);
    }

    CLI::App* cmd = app.get_subcommands().front();
    cfg.command = cmd->get_name();
    cfg.out_dir = resolve_out(out, "runs/" + cfg.command);
    cfg.train.mode = parse_mode(mode);
    cfg.train.seed = seed;
    const bool reads_run = cmd == evl || cmd == beh || cmd == prb;
    cfg.data = to_source(data, cmd, reads_run);
    if (cmd == gen) cfg.data.synth = data.synth;
    if (cmd == swp) {
      cfg.lambdas = checked_lambdas(lambdas);
      cfg.seeds = seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
    }
    if (cmd == beh && !categories.empty()) {
      cfg.categories.clear();
      for (const auto& c : categories) cfg.categories.push_back(parse_category(c));
    }
    if (cmd == gen) validate(*cfg.data.synth);
    if (cmd == trn || cmd == swp) validate(cfg.train);
    return run(resolve(cfg));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
