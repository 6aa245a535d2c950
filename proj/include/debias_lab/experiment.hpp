#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "debias_lab/behavioral.hpp"
#include "debias_lab/data.hpp"
#include "debias_lab/error.hpp"
#include "debias_lab/poe.hpp"
#include "debias_lab/probe.hpp"

namespace debias {

inline constexpr const char* kLockFormat = "debias-lab-lock/1";

// Where examples come from: either an in-memory synthetic corpus or JSONL files.
struct DataSource {
  std::optional<SynthConfig> synth;
  std::string train_path, val_path, test_path;
  std::size_t vocab_min_count = 1;

  bool is_synthetic() const { return synth.has_value(); }
};

// Fully resolved settings of one command. Fields a command does not use keep
// their defaults and are still written to the lock file.
struct ExperimentConfig {
  std::string command;
  std::string out_dir = "runs";
  std::string run_id = "run";
  DataSource data;
  TrainConfig train;
  // sweep
  std::vector<double> lambdas = {0.0, 0.5, 1.0, 1.5, 2.0};
  std::vector<std::uint64_t> seeds = {1};
  // gen-data
  std::string corpus_name = "synth";
  // eval / behave / probe
  std::string run_dir;     // output of a train command: vocab.txt, main/, bias/
  std::string model_dir;   // overrides <run_dir>/main
  std::string bias_dir;    // overrides <run_dir>/bias
  std::string split = "test";
  std::string subset;      // "" or "negation-overlap"
  bool behavioral = false;
  std::vector<Category> categories = {kAllCategories.begin(), kAllCategories.end()};
  std::size_t suite_size = 300;
  std::uint64_t suite_seed = 7;
  ProbeConfig probe;
  std::string probe_split = "train";
};

inline nlohmann::ordered_json to_json(const AdamWHyper& h) {
  return {{"lr", h.lr}, {"beta1", h.beta1}, {"beta2", h.beta2}, {"eps", h.eps},
          {"weight_decay", h.weight_decay}};
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = mode_name(c.mode);
  j["lambda"] = c.lambda;
  j["epsilon"] = c.epsilon;
  j["weight_cap"] = c.weight_cap;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["grad_accum"] = c.grad_accum;
  j["optimizer"] = to_json(c.optimizer);
  j["d_embed"] = c.d_embed;
  j["d_hidden"] = c.d_hidden;
  j["bias_epochs"] = c.bias_epochs;
  j["bias_lr"] = c.bias_lr;
  j["seed"] = c.seed;
  return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.lambda = j.at("lambda").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.weight_cap = j.at("weight_cap").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.grad_accum = j.at("grad_accum").get<std::size_t>();
  const auto& o = j.at("optimizer");
  c.optimizer = {o.at("lr").get<double>(), o.at("beta1").get<double>(), o.at("beta2").get<double>(),
                 o.at("eps").get<double>(), o.at("weight_decay").get<double>()};
  c.d_embed = j.at("d_embed").get<std::size_t>();
  c.d_hidden = j.at("d_hidden").get<std::size_t>();
  c.bias_epochs = j.at("bias_epochs").get<std::size_t>();
  c.bias_lr = j.at("bias_lr").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline nlohmann::ordered_json to_json(const ProbeConfig& p) {
  return {{"threshold", p.threshold}, {"iterations", p.iterations}, {"lr", p.lr},
          {"l2", p.l2},               {"train_fraction", p.train_fraction},
          {"top_k", p.top_k},         {"seed", p.seed}};
}

inline ProbeConfig probe_config_from_json(const nlohmann::json& j) {
  ProbeConfig p;
  p.threshold = j.at("threshold").get<double>();
  p.iterations = j.at("iterations").get<std::size_t>();
  p.lr = j.at("lr").get<double>();
  p.l2 = j.at("l2").get<double>();
  p.train_fraction = j.at("train_fraction").get<double>();
  p.top_k = j.at("top_k").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

inline nlohmann::ordered_json to_json(const DataSource& d) {
  nlohmann::ordered_json j;
  if (d.synth) {
    j["kind"] = "synthetic";
    j["synthetic"] = to_json(*d.synth);
  } else {
    j["kind"] = "jsonl";
    j["train"] = d.train_path;
    j["validation"] = d.val_path;
    j["test"] = d.test_path;
  }
  j["vocab_min_count"] = d.vocab_min_count;
  return j;
}

inline DataSource data_source_from_json(const nlohmann::json& j) {
  DataSource d;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "synthetic") {
    d.synth = synth_config_from_json(j.at("synthetic"));
  } else if (kind == "jsonl") {
    d.train_path = j.value("train", "");
    d.val_path = j.value("validation", "");
    d.test_path = j.value("test", "");
  } else {
    throw Error("unknown data source kind: " + kind);
  }
  d.vocab_min_count = j.value("vocab_min_count", std::size_t{1});
  return d;
}

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["format"] = kLockFormat;
  j["command"] = c.command;
  j["out_dir"] = c.out_dir;
  j["run_id"] = c.run_id;
  j["data"] = to_json(c.data);
  j["train"] = to_json(c.train);
  j["lambdas"] = c.lambdas;
  j["seeds"] = c.seeds;
  j["corpus_name"] = c.corpus_name;
  j["run_dir"] = c.run_dir;
  j["model_dir"] = c.model_dir;
  j["bias_dir"] = c.bias_dir;
  j["split"] = c.split;
  j["subset"] = c.subset;
  j["behavioral"] = c.behavioral;
  auto& cats = j["categories"];
  cats = nlohmann::ordered_json::array();
  for (Category cat : c.categories) cats.push_back(category_name(cat));
  j["suite_size"] = c.suite_size;
  j["suite_seed"] = c.suite_seed;
  j["probe"] = to_json(c.probe);
  j["probe_split"] = c.probe_split;
  return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kLockFormat) throw Error("not a debias-lab lock file");
  ExperimentConfig c;
  c.command = j.at("command").get<std::string>();
  c.out_dir = j.at("out_dir").get<std::string>();
  c.run_id = j.at("run_id").get<std::string>();
  c.data = data_source_from_json(j.at("data"));
  c.train = train_config_from_json(j.at("train"));
  c.lambdas = j.at("lambdas").get<std::vector<double>>();
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.corpus_name = j.at("corpus_name").get<std::string>();
  c.run_dir = j.at("run_dir").get<std::string>();
  c.model_dir = j.at("model_dir").get<std::string>();
  c.bias_dir = j.at("bias_dir").get<std::string>();
  c.split = j.at("split").get<std::string>();
  c.subset = j.at("subset").get<std::string>();
  c.behavioral = j.at("behavioral").get<bool>();
  c.categories.clear();
  for (const auto& name : j.at("categories")) c.categories.push_back(parse_category(name.get<std::string>()));
  c.suite_size = j.at("suite_size").get<std::size_t>();
  c.suite_seed = j.at("suite_seed").get<std::uint64_t>();
  c.probe = probe_config_from_json(j.at("probe"));
  c.probe_split = j.at("probe_split").get<std::string>();
  return c;
}

inline void write_lock(const ExperimentConfig& c, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write lock file " + path.string());
  out << to_json(c).dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

inline ExperimentConfig read_lock(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lock file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed lock file " + path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

}  // namespace debias
