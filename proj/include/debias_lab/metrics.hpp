#pragma once

#include <algorithm>
#include <array>
#include <span>
#include <vector>

#include "debias_lab/data.hpp"
#include "debias_lab/error.hpp"
#include "debias_lab/model.hpp"

namespace debias {

namespace detail {
inline void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                std::to_string(b) + ")");
  }
  if (a == 0) throw Error(std::string(what) + ": empty input");
}
}  // namespace detail

inline std::vector<Label> argmax_all(std::span<const LabelDist> dists) {
  std::vector<Label> out;
  out.reserve(dists.size());
  for (const auto& d : dists) out.push_back(d.argmax());
  return out;
}

inline std::vector<Label> gold_labels(const Dataset& ds) {
  std::vector<Label> out;
  out.reserve(ds.size());
  for (const auto& ex : ds.examples) out.push_back(ex.label);
  return out;
}

inline double accuracy(std::span<const Label> predictions, std::span<const Label> golds) {
  detail::check_lengths(predictions.size(), golds.size(), "accuracy");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) correct += predictions[i] == golds[i];
  return static_cast<double>(correct) / static_cast<double>(golds.size());
}

struct MacroF1 {
  double value = 0.0;
  std::array<double, kNumLabels> per_class{};
  // Classes absent from both predictions and golds; they count as F1 = 0.
  std::array<bool, kNumLabels> absent{};
};

inline MacroF1 macro_f1_detail(std::span<const Label> predictions, std::span<const Label> golds) {
  detail::check_lengths(predictions.size(), golds.size(), "macro_f1");
  std::array<std::size_t, kNumLabels> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const int p = label_index(predictions[i]), g = label_index(golds[i]);
    if (p == g) {
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  MacroF1 r;
  double sum = 0.0;
  for (int c = 0; c < kNumLabels; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    r.absent[c] = denom == 0;
    r.per_class[c] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    sum += r.per_class[c];
  }
  r.value = sum / kNumLabels;
  return r;
}

inline double macro_f1(std::span<const Label> predictions, std::span<const Label> golds) {
  return macro_f1_detail(predictions, golds).value;
}

// Fraction of positions where the main and bias models predict the same label.
inline double bias_agreement(std::span<const Label> main_predictions,
                             std::span<const Label> bias_predictions) {
  detail::check_lengths(main_predictions.size(), bias_predictions.size(), "bias_agreement");
  std::size_t same = 0;
  for (std::size_t i = 0; i < main_predictions.size(); ++i) {
    same += main_predictions[i] == bias_predictions[i];
  }
  return static_cast<double>(same) / static_cast<double>(main_predictions.size());
}

struct CalibrationBucket {
  double lo = 0.0, hi = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

// Equal-width buckets over [1/3, 1]; every bucket is reported, empty ones with
// zero count. Confidences below 1/3 land in the first bucket.
inline std::vector<CalibrationBucket> calibration_report(std::span<const double> confidences,
                                                         const std::vector<bool>& correct,
                                                         std::size_t n_buckets = 10) {
  if (confidences.size() != correct.size()) throw Error("calibration_report: length mismatch");
  if (n_buckets == 0) throw Error("calibration_report: need at least one bucket");
  const double lo = 1.0 / 3.0, width = (1.0 - lo) / static_cast<double>(n_buckets);
  std::vector<CalibrationBucket> buckets(n_buckets);
  std::vector<double> conf_sum(n_buckets, 0.0), hits(n_buckets, 0.0);
  for (std::size_t b = 0; b < n_buckets; ++b) {
    buckets[b].lo = lo + width * static_cast<double>(b);
    buckets[b].hi = b + 1 == n_buckets ? 1.0 : lo + width * static_cast<double>(b + 1);
  }
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double pos = (confidences[i] - lo) / width;
    std::size_t b = pos <= 0.0 ? 0 : static_cast<std::size_t>(pos);
    b = std::min(b, n_buckets - 1);
    ++buckets[b].count;
    conf_sum[b] += confidences[i];
    hits[b] += correct[i] ? 1.0 : 0.0;
  }
  for (std::size_t b = 0; b < n_buckets; ++b) {
    if (buckets[b].count == 0) continue;
    const double n = static_cast<double>(buckets[b].count);
    buckets[b].mean_confidence = conf_sum[b] / n;
    buckets[b].accuracy = hits[b] / n;
  }
  return buckets;
}

}  // namespace debias
