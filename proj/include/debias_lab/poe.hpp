#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "debias_lab/data.hpp"
#include "debias_lab/error.hpp"
#include "debias_lab/metrics.hpp"
#include "debias_lab/model.hpp"
#include "debias_lab/optim.hpp"
#include "debias_lab/rng.hpp"
#include "debias_lab/vocab.hpp"

namespace debias {

// Confidence of the bias model: its largest class probability.
inline double bias_confidence(const LabelDist& dist) { return dist.max(); }

// Raw example weight 1 / (confidence^lambda + epsilon).
inline double poe_weight(double confidence, double lambda, double epsilon) {
  if (!(confidence > 0.0)) throw Error("poe_weight: confidence must be positive");
  if (!(lambda >= 0.0)) throw Error("poe_weight: lambda must be non-negative");
  if (!(epsilon >= 0.0)) throw Error("poe_weight: epsilon must be non-negative");
  return 1.0 / (std::pow(confidence, lambda) + epsilon);
}

// Per-batch scale factors s_i = w_i / mean(w). Identical raw weights yield
// exactly 1.0 so the weighted objective reduces bit-for-bit to the plain one.
inline std::vector<double> normalized_batch_weights(std::span<const double> raw) {
  if (raw.empty()) throw Error("normalized_batch_weights: empty batch");
  for (double w : raw) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error("normalized_batch_weights: weights must be positive");
  }
  std::vector<double> s(raw.size(), 1.0);
  if (std::all_of(raw.begin(), raw.end(), [&](double w) { return w == raw[0]; })) return s;
  const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) s[i] = raw[i] / mean;
  return s;
}

// Mean of s_i * loss_i.
inline double weighted_loss(std::span<const double> losses, std::span<const double> scales) {
  if (losses.size() != scales.size()) throw Error("weighted_loss: length mismatch");
  if (losses.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) total += scales[i] * losses[i];
  return total / static_cast<double>(losses.size());
}

struct WeightEntry {
  std::string id;
  double confidence = 0.0;
  double raw_weight = 0.0;
};

struct WeightTable {
  double lambda = 0.0;
  double epsilon = 0.0;
  std::vector<WeightEntry> entries;  // aligned with the dataset's example order
};

// One frozen forward pass of the hypothesis-only model per example. Tokens
// outside the vocabulary were already mapped to UNK by encoding.
inline WeightTable compute_weights_offline(const ModelParams& bias, const Dataset& ds,
                                           std::span<const EncodedExample> encoded, double lambda,
                                           double epsilon) {
  if (bias.dims.variant != Variant::hypothesis_only) {
    throw Error("compute_weights_offline: bias model must be hypothesis-only");
  }
  if (encoded.size() != ds.size()) throw Error("compute_weights_offline: encoding size mismatch");
  WeightTable table{lambda, epsilon, {}};
  table.entries.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double conf = bias_confidence(predict(encoded[i], bias));
    table.entries.push_back({ds.examples[i].id, conf, poe_weight(conf, lambda, epsilon)});
  }
  return table;
}

inline WeightTable compute_weights_offline(const ModelParams& bias, const Dataset& ds,
                                           const Vocabulary& vocab, double lambda, double epsilon) {
  const auto enc = encode_dataset(ds, vocab);
  return compute_weights_offline(bias, ds, enc, lambda, epsilon);
}

enum class TrainMode { standard, poe };

inline std::string_view mode_name(TrainMode m) { return m == TrainMode::standard ? "standard" : "poe"; }

inline TrainMode parse_mode(std::string_view name) {
  if (name == "standard") return TrainMode::standard;
  if (name == "poe") return TrainMode::poe;
  throw Error("unknown training mode: " + std::string(name));
}

struct TrainConfig {
  TrainMode mode = TrainMode::poe;
  double lambda = 1.5;
  double epsilon = 1e-4;
  double weight_cap = 10.0;
  std::size_t epochs = 2;
  std::size_t batch_size = 64;
  std::size_t grad_accum = 4;
  AdamWHyper optimizer;
  std::size_t d_embed = 64;
  std::size_t d_hidden = 128;
  // Stage-1 overrides; zero means "same as the main model".
  std::size_t bias_epochs = 0;
  double bias_lr = 0.0;
  std::uint64_t seed = 1;

  std::size_t stage1_epochs() const { return bias_epochs ? bias_epochs : epochs; }
  AdamWHyper stage1_optimizer() const {
    AdamWHyper h = optimizer;
    if (bias_lr > 0.0) h.lr = bias_lr;
    return h;
  }
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.epochs == 0) throw Error("epochs must be at least 1");
  if (cfg.batch_size == 0) throw Error("batch_size must be at least 1");
  if (cfg.grad_accum == 0) throw Error("grad_accum must be at least 1");
  if (!(cfg.lambda >= 0.0)) throw Error("lambda must be non-negative");
  if (!(cfg.epsilon >= 0.0)) throw Error("epsilon must be non-negative");
  if (!(cfg.weight_cap > 0.0)) throw Error("weight_cap must be positive");
  if (!(cfg.optimizer.lr > 0.0)) throw Error("learning rate must be positive");
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_acc = 0.0;
  double val_bias_agreement = 0.0;
};

struct TrainedModel {
  ModelParams params;
  OptimState optimizer;
};

// Stochastic training over shuffled micro-batches with gradient accumulation.
// `scale_for(batch_indices)` returns the per-example loss scales of a
// micro-batch; `on_epoch(epoch, mean_loss)` runs after each epoch.
inline void run_training(TrainedModel& model, std::span<const EncodedExample> data,
                         std::size_t epochs, std::size_t batch_size, std::size_t grad_accum,
                         Rng& shuffle_rng,
                         const std::function<std::vector<double>(std::span<const std::size_t>)>& scale_for,
                         const std::function<void(std::size_t, double)>& on_epoch) {
  if (data.empty()) throw Error("training set is empty");
  std::vector<std::size_t> order(data.size());
  std::vector<const EncodedExample*> batch;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    const std::size_t n_micro = (order.size() + batch_size - 1) / batch_size;
    double loss_sum = 0.0;
    std::size_t micro = 0;
    while (micro < n_micro) {
      const std::size_t group = std::min(grad_accum, n_micro - micro);
      GradAccumulator acc(model.params.dims, group);
      for (std::size_t g = 0; g < group; ++g, ++micro) {
        const std::size_t lo = micro * batch_size;
        const std::size_t hi = std::min(lo + batch_size, order.size());
        std::span<const std::size_t> idx(order.data() + lo, hi - lo);
        batch.clear();
        for (std::size_t i : idx) batch.push_back(&data[i]);
        const std::vector<double> scales = scale_for(idx);
        BackwardResult r;
        try {
          r = backward(std::span<const EncodedExample* const>(batch), model.params, scales);
        } catch (const Error& e) {
          throw Error("training diverged at step " + std::to_string(model.optimizer.t + 1) + ": " +
                      e.what());
        }
        loss_sum += r.loss;
        acc.add(r.grads);
      }
      try {
        adamw_step(model.params, acc.flush(), model.optimizer);
      } catch (const Error& e) {
        throw Error("training diverged at step " + std::to_string(model.optimizer.t) + ": " +
                    e.what());
      }
    }
    on_epoch(epoch, loss_sum / static_cast<double>(n_micro));
  }
}

struct BiasStage {
  TrainedModel model;
  std::vector<EpochRecord> history;
};

// Stage 1: hypothesis-only model with unweighted cross-entropy.
inline BiasStage train_bias_model(std::span<const EncodedExample> train,
                                  std::span<const EncodedExample> val, std::size_t vocab_size,
                                  const TrainConfig& cfg) {
  validate(cfg);
  BiasStage stage;
  stage.model.params = init_params(vocab_size, cfg.d_embed, cfg.d_hidden, Variant::hypothesis_only,
                                   derive_seed(cfg.seed, 1));
  stage.model.optimizer = OptimState(stage.model.params.dims, cfg.stage1_optimizer());
  Rng shuffle(derive_seed(cfg.seed, 2));
  std::vector<Label> val_gold;
  for (const auto& ex : val) val_gold.push_back(ex.label);
  run_training(
      stage.model, train, cfg.stage1_epochs(), cfg.batch_size, cfg.grad_accum, shuffle,
      [](std::span<const std::size_t> idx) { return std::vector<double>(idx.size(), 1.0); },
      [&](std::size_t epoch, double loss) {
        EpochRecord rec{epoch, loss, 0.0, 1.0};
        if (!val.empty()) rec.val_acc = accuracy(argmax_all(predict_all(val, stage.model.params)), val_gold);
        stage.history.push_back(rec);
      });
  return stage;
}

struct MainStage {
  TrainedModel model;
  std::vector<EpochRecord> history;
  double wall_seconds = 0.0;
};

// Stage 3: full model; each example's loss is scaled by its batch-normalized,
// capped raw weight (poe) or by 1 (standard). The bias model stays frozen.
inline MainStage train_main_model(std::span<const EncodedExample> train,
                                  std::span<const EncodedExample> val, std::size_t vocab_size,
                                  const WeightTable& weights, const ModelParams& bias,
                                  const TrainConfig& cfg) {
  validate(cfg);
  if (cfg.mode == TrainMode::poe && weights.entries.size() != train.size()) {
    throw Error("weight table does not match the training set");
  }
  const auto start = std::chrono::steady_clock::now();
  MainStage stage;
  stage.model.params =
      init_params(vocab_size, cfg.d_embed, cfg.d_hidden, Variant::full, derive_seed(cfg.seed, 3));
  stage.model.optimizer = OptimState(stage.model.params.dims, cfg.optimizer);
  Rng shuffle(derive_seed(cfg.seed, 4));

  std::vector<Label> val_gold;
  for (const auto& ex : val) val_gold.push_back(ex.label);
  const std::vector<Label> val_bias = argmax_all(predict_all(val, bias));

  std::vector<double> raw;
  run_training(
      stage.model, train, cfg.epochs, cfg.batch_size, cfg.grad_accum, shuffle,
      [&](std::span<const std::size_t> idx) {
        if (cfg.mode == TrainMode::standard) return std::vector<double>(idx.size(), 1.0);
        raw.clear();
        for (std::size_t i : idx) raw.push_back(std::min(weights.entries[i].raw_weight, cfg.weight_cap));
        return normalized_batch_weights(raw);
      },
      [&](std::size_t epoch, double loss) {
        EpochRecord rec{epoch, loss, 0.0, 0.0};
        if (!val.empty()) {
          const auto preds = argmax_all(predict_all(val, stage.model.params));
          rec.val_acc = accuracy(preds, val_gold);
          rec.val_bias_agreement = bias_agreement(preds, val_bias);
        }
        stage.history.push_back(rec);
      });
  stage.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stage;
}

struct TrainResult {
  TrainedModel main;
  TrainedModel bias;
  WeightTable weights;
  std::vector<EpochRecord> history;       // main model, one row per epoch
  std::vector<EpochRecord> bias_history;  // stage 1
  std::uint64_t bias_checksum_before = 0;
  std::uint64_t bias_checksum_after = 0;
  double wall_seconds = 0.0;       // all stages
  double main_wall_seconds = 0.0;  // stage 3 only
};

// Full pipeline: bias model, offline weights, then the main model.
inline TrainResult train(const Dataset& train_set, const Dataset& val_set, const Vocabulary& vocab,
                         const TrainConfig& cfg) {
  validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  const auto enc_train = encode_dataset(train_set, vocab);
  const auto enc_val = encode_dataset(val_set, vocab);

  TrainResult out;
  BiasStage stage1 = train_bias_model(enc_train, enc_val, vocab.size(), cfg);
  out.bias = std::move(stage1.model);
  out.bias_history = std::move(stage1.history);

  out.weights = compute_weights_offline(out.bias.params, train_set, enc_train, cfg.lambda, cfg.epsilon);
  out.bias_checksum_before = out.bias.params.checksum();

  MainStage stage3 = train_main_model(enc_train, enc_val, vocab.size(), out.weights,
                                      out.bias.params, cfg);
  out.bias_checksum_after = out.bias.params.checksum();
  if (out.bias_checksum_after != out.bias_checksum_before) {
    throw Error("bias model changed during main-model training");
  }
  out.main = std::move(stage3.model);
  out.history = std::move(stage3.history);
  out.main_wall_seconds = stage3.wall_seconds;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// ---------------------------------------------------------------------------
// Lambda ablation

struct SweepRow {
  double lambda = 0.0;
  double accuracy = 0.0;        // mean over seeds, test split
  double bias_agreement = 0.0;  // mean over seeds, test split
  double wall_seconds = 0.0;    // mean main-model training time
  std::vector<double> seed_accuracy;
  std::vector<double> seed_bias_agreement;
};

inline std::vector<double> checked_lambdas(std::vector<double> lambdas) {
  if (lambdas.size() < 2) throw Error("lambda sweep needs at least two values");
  std::sort(lambdas.begin(), lambdas.end());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] >= 0.0)) throw Error("lambda values must be non-negative");
    if (i > 0 && lambdas[i] == lambdas[i - 1]) {
      throw Error("duplicate lambda value " + std::to_string(lambdas[i]));
    }
  }
  return lambdas;
}

// One train+eval per (lambda, seed). Stage 1 depends only on the seed, so the
// bias model and its confidences are computed once per seed and shared by all
// lambdas. Rows come back sorted by lambda.
inline std::vector<SweepRow> sweep_lambda(const SyntheticCorpus& corpus, const Vocabulary& vocab,
                                          const TrainConfig& base, std::vector<double> lambdas,
                                          std::span<const std::uint64_t> seeds) {
  lambdas = checked_lambdas(std::move(lambdas));
  if (seeds.empty()) throw Error("lambda sweep needs at least one seed");
  const auto enc_train = encode_dataset(corpus.train, vocab);
  const auto enc_val = encode_dataset(corpus.validation, vocab);
  const auto enc_test = encode_dataset(corpus.test, vocab);
  const auto test_gold = gold_labels(corpus.test);

  std::vector<SweepRow> rows(lambdas.size());
  for (std::size_t li = 0; li < lambdas.size(); ++li) rows[li].lambda = lambdas[li];
  for (std::uint64_t seed : seeds) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    cfg.mode = TrainMode::poe;
    const BiasStage stage1 = train_bias_model(enc_train, enc_val, vocab.size(), cfg);
    const auto bias_test = argmax_all(predict_all(enc_test, stage1.model.params));
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
      cfg.lambda = lambdas[li];
      try {
        const WeightTable table = compute_weights_offline(stage1.model.params, corpus.train, enc_train,
                                                          cfg.lambda, cfg.epsilon);
        const MainStage stage3 =
            train_main_model(enc_train, enc_val, vocab.size(), table, stage1.model.params, cfg);
        const auto preds = argmax_all(predict_all(enc_test, stage3.model.params));
        rows[li].seed_accuracy.push_back(accuracy(preds, test_gold));
        rows[li].seed_bias_agreement.push_back(bias_agreement(preds, bias_test));
        rows[li].wall_seconds += stage3.wall_seconds;
      } catch (const Error& e) {
        throw Error("lambda " + std::to_string(cfg.lambda) + ": " + e.what());
      }
    }
  }
  const double n = static_cast<double>(seeds.size());
  for (auto& row : rows) {
    row.accuracy = std::accumulate(row.seed_accuracy.begin(), row.seed_accuracy.end(), 0.0) / n;
    row.bias_agreement =
        std::accumulate(row.seed_bias_agreement.begin(), row.seed_bias_agreement.end(), 0.0) / n;
    row.wall_seconds /= n;
  }
  return rows;
}

}  // namespace debias
