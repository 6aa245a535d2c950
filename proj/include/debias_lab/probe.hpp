#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "debias_lab/data.hpp"
#include "debias_lab/error.hpp"
#include "debias_lab/model.hpp"
#include "debias_lab/rng.hpp"
#include "debias_lab/tokenize.hpp"
#include "debias_lab/vocab.hpp"

namespace debias {

struct ProbeConfig {
  double threshold = 0.70;
  std::size_t iterations = 500;
  double lr = 0.1;
  double l2 = 1e-4;
  double train_fraction = 0.8;
  std::size_t top_k = 10;
  std::uint64_t seed = 0;
};

struct ProbeFeature {
  std::string token;
  double weight = 0.0;
  double mean_confidence = 0.0;  // average bias confidence over hypotheses containing the token
  std::size_t count = 0;
};

struct ProbeReport {
  double accuracy = 0.0;  // held-out
  double train_accuracy = 0.0;
  std::size_t n_train = 0, n_test = 0;
  double positive_rate = 0.0;  // share of hypotheses above the threshold
  double negation_flag_weight = 0.0;
  double intercept = 0.0;
  // Indexed by label. Positive-weight unigrams only, descending weight.
  std::array<std::vector<ProbeFeature>, kNumLabels> top_features;
};

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

// Fits the probe to given per-example bias confidences. Features: presence of
// each hypothesis unigram plus one flag for any negation cue.
inline ProbeReport probe_from_confidences(const Dataset& ds, std::span<const double> confidences,
                                          const ProbeConfig& cfg = {}) {
  if (ds.size() != confidences.size()) throw Error("probe: one confidence per example required");
  if (ds.size() < 2) throw Error("probe: need at least two examples");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw Error("probe: train_fraction must be in (0, 1)");
  }
  const std::size_t n = ds.size();

  std::vector<std::vector<std::string>> toks(n);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) {
    toks[i] = tokenize(ds.examples[i].hypothesis);
    std::sort(toks[i].begin(), toks[i].end());
    toks[i].erase(std::unique(toks[i].begin(), toks[i].end()), toks[i].end());
    for (const auto& t : toks[i]) index.emplace(t, 0);
  }
  std::vector<std::string> names;
  for (auto& [tok, id] : index) {
    id = names.size();
    names.push_back(tok);
  }
  const std::size_t neg_flag = names.size();
  const std::size_t n_feat = names.size() + 1;

  std::vector<std::vector<std::size_t>> x(n);
  std::vector<double> y(n);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool neg = false;
    for (const auto& t : toks[i]) {
      x[i].push_back(index.at(t));
      for (const auto& c : negation_cues()) neg = neg || t == c;
    }
    if (neg) x[i].push_back(neg_flag);
    y[i] = confidences[i] > cfg.threshold ? 1.0 : 0.0;
    positives += y[i] > 0.5;
  }
  if (positives == 0 || positives == n) {
    throw Error("probe: target has a single class (every confidence is " +
                std::string(positives == 0 ? "<=" : ">") + " the threshold)");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, 200));
  rng.shuffle(std::span<std::size_t>(order));
  const std::size_t n_train =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(cfg.train_fraction * n)), 1, n - 1);
  const std::span<const std::size_t> train_idx(order.data(), n_train);
  const std::span<const std::size_t> test_idx(order.data() + n_train, n - n_train);

  std::vector<double> w(n_feat, 0.0), grad(n_feat);
  double b = 0.0;
  auto logit = [&](std::size_t i) {
    double z = b;
    for (std::size_t f : x[i]) z += w[f];
    return z;
  };
  const double inv_n = 1.0 / static_cast<double>(n_train);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i : train_idx) {
      const double r = detail::sigmoid(logit(i)) - y[i];
      for (std::size_t f : x[i]) grad[f] += r;
      gb += r;
    }
    for (std::size_t f = 0; f < n_feat; ++f) w[f] -= cfg.lr * (grad[f] * inv_n + cfg.l2 * w[f]);
    b -= cfg.lr * gb * inv_n;
  }

  auto acc = [&](std::span<const std::size_t> idx) {
    std::size_t hit = 0;
    for (std::size_t i : idx) hit += (logit(i) > 0.0) == (y[i] > 0.5);
    return static_cast<double>(hit) / static_cast<double>(idx.size());
  };

  ProbeReport rep;
  rep.accuracy = acc(test_idx);
  rep.train_accuracy = acc(train_idx);
  rep.n_train = train_idx.size();
  rep.n_test = test_idx.size();
  rep.positive_rate = static_cast<double>(positives) / static_cast<double>(n);
  rep.negation_flag_weight = w[neg_flag];
  rep.intercept = b;

  // Each unigram is listed under the label where it occurs most often
  // relative to that label's size.
  std::array<std::size_t, kNumLabels> label_total{};
  std::vector<std::array<std::size_t, kNumLabels>> per_label(names.size());
  std::vector<double> conf_sum(names.size(), 0.0);
  std::vector<std::size_t> occurrences(names.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = label_index(ds.examples[i].label);
    ++label_total[l];
    for (const auto& t : toks[i]) {
      const std::size_t f = index.at(t);
      ++per_label[f][l];
      conf_sum[f] += confidences[i];
      ++occurrences[f];
    }
  }
  for (std::size_t f = 0; f < names.size(); ++f) {
    if (w[f] <= 0.0) continue;
    int best = -1;
    double best_rate = -1.0;
    for (int l = 0; l < kNumLabels; ++l) {
      if (label_total[l] == 0) continue;
      const double rate = static_cast<double>(per_label[f][l]) / static_cast<double>(label_total[l]);
      if (rate > best_rate) {
        best_rate = rate;
        best = l;
      }
    }
    rep.top_features[best].push_back(
        {names[f], w[f], conf_sum[f] / static_cast<double>(occurrences[f]), occurrences[f]});
  }
  for (auto& list : rep.top_features) {
    std::stable_sort(list.begin(), list.end(),
                     [](const ProbeFeature& a, const ProbeFeature& b) { return a.weight > b.weight; });
    if (list.size() > cfg.top_k) list.resize(cfg.top_k);
  }
  return rep;
}

inline ProbeReport probe_artifacts(const ModelParams& bias, const Vocabulary& vocab, const Dataset& ds,
                                   const ProbeConfig& cfg = {}) {
  if (bias.dims.variant != Variant::hypothesis_only) {
    throw Error("probe_artifacts expects a hypothesis-only bias model");
  }
  std::vector<double> conf;
  conf.reserve(ds.size());
  for (const auto& ex : ds.examples) conf.push_back(predict(encode_example(ex, vocab), bias).max());
  return probe_from_confidences(ds, conf, cfg);
}

}  // namespace debias
