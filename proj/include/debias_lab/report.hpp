#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "debias_lab/behavioral.hpp"
#include "debias_lab/data.hpp"
#include "debias_lab/error.hpp"
#include "debias_lab/metrics.hpp"
#include "debias_lab/model.hpp"
#include "debias_lab/poe.hpp"
#include "debias_lab/probe.hpp"
#include "debias_lab/vocab.hpp"

namespace debias {

struct RunReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double bias_agreement = 0.0;
  std::vector<CalibrationBucket> calibration;
  std::vector<BehavioralScore> behavioral;
  double wall_seconds = 0.0;
};

// Scores `main` on `ds`; bias agreement is measured against `bias`, which may
// be any model variant (including `main` itself).
inline RunReport evaluate(const ModelParams& main, const ModelParams& bias, const Vocabulary& vocab,
                          const Dataset& ds, std::span<const BehavioralSuite> suites = {},
                          double wall_seconds = 0.0) {
  if (ds.empty()) throw Error("cannot evaluate on an empty dataset");
  const auto enc = encode_dataset(ds, vocab);
  const auto dists = predict_all(enc, main);
  const auto preds = argmax_all(dists);
  const auto golds = gold_labels(ds);
  const auto bias_preds = argmax_all(predict_all(enc, bias));

  RunReport r;
  r.n = ds.size();
  r.accuracy = accuracy(preds, golds);
  r.macro_f1 = macro_f1(preds, golds);
  r.bias_agreement = bias_agreement(preds, bias_preds);
  std::vector<double> conf;
  std::vector<bool> correct;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    conf.push_back(dists[i].max());
    correct.push_back(preds[i] == golds[i]);
  }
  r.calibration = calibration_report(conf, correct);
  if (!suites.empty()) r.behavioral = run_behavioral(main, vocab, suites);
  r.wall_seconds = wall_seconds;
  return r;
}

// Shortest round-trip decimal form, so CSVs are stable across runs.
inline std::string fmt_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s(buf);
  for (int prec = 1; prec < 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return buf;
  }
  return s;
}

inline void write_report_csv(const RunReport& r, std::ostream& out) {
  out << "metric,value\n";
  out << "n," << r.n << '\n';
  out << "accuracy," << fmt_num(r.accuracy) << '\n';
  out << "macro_f1," << fmt_num(r.macro_f1) << '\n';
  out << "bias_agreement," << fmt_num(r.bias_agreement) << '\n';
  out << "wall_seconds," << fmt_num(r.wall_seconds) << '\n';
}

inline void write_calibration_csv(std::span<const CalibrationBucket> buckets, std::ostream& out) {
  out << "bucket_lo,bucket_hi,count,mean_confidence,accuracy\n";
  for (const auto& b : buckets) {
    out << fmt_num(b.lo) << ',' << fmt_num(b.hi) << ',' << b.count << ',' << fmt_num(b.mean_confidence)
        << ',' << fmt_num(b.accuracy) << '\n';
  }
}

inline void write_behavioral_csv(std::span<const BehavioralScore> scores, std::ostream& out) {
  out << "category,n,accuracy,flip_rate,consistency\n";
  for (const auto& s : scores) {
    out << category_name(s.category) << ',' << s.n << ',' << fmt_num(s.accuracy) << ','
        << (s.flip_rate ? fmt_num(*s.flip_rate) : "") << ','
        << (s.consistency ? fmt_num(*s.consistency) : "") << '\n';
  }
}

inline void write_weights_csv(const WeightTable& table, std::ostream& out) {
  out << "id,confidence,raw_weight\n";
  for (const auto& e : table.entries) {
    out << e.id << ',' << fmt_num(e.confidence) << ',' << fmt_num(e.raw_weight) << '\n';
  }
}

inline void write_history_csv(std::span<const EpochRecord> history, std::ostream& out) {
  out << "epoch,train_loss,val_acc,val_bias_agreement\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << fmt_num(h.train_loss) << ',' << fmt_num(h.val_acc) << ','
        << fmt_num(h.val_bias_agreement) << '\n';
  }
}

inline void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out) {
  out << "lambda,accuracy,bias_agreement,wall_seconds\n";
  for (const auto& r : rows) {
    out << fmt_num(r.lambda) << ',' << fmt_num(r.accuracy) << ',' << fmt_num(r.bias_agreement) << ','
        << fmt_num(r.wall_seconds) << '\n';
  }
}

inline void write_probe_csv(const ProbeReport& p, std::ostream& out) {
  out << "label,rank,token,weight,mean_confidence,count\n";
  for (int l = 0; l < kNumLabels; ++l) {
    const auto& list = p.top_features[l];
    for (std::size_t k = 0; k < list.size(); ++k) {
      out << label_name(static_cast<Label>(l)) << ',' << k + 1 << ',' << list[k].token << ','
          << fmt_num(list[k].weight) << ',' << fmt_num(list[k].mean_confidence) << ',' << list[k].count
          << '\n';
    }
  }
}

inline std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * x);
  return buf;
}

inline std::string summary_text(const RunReport& r, std::string_view title) {
  std::ostringstream out;
  out << title << '\n';
  out << "  examples        " << r.n << '\n';
  out << "  accuracy        " << pct(r.accuracy) << '\n';
  out << "  macro-F1        " << pct(r.macro_f1) << '\n';
  out << "  bias agreement  " << pct(r.bias_agreement) << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f s", r.wall_seconds);
  out << "  time            " << buf << '\n';
  if (!r.calibration.empty()) {
    out << "  calibration (confidence bucket: count, mean confidence, accuracy)\n";
    for (const auto& b : r.calibration) {
      std::snprintf(buf, sizeof buf, "    [%.3f, %.3f): %6zu  %.3f  %.3f\n", b.lo, b.hi, b.count,
                    b.mean_confidence, b.accuracy);
      out << buf;
    }
  }
  for (const auto& s : r.behavioral) {
    out << "  " << category_name(s.category) << ": accuracy " << pct(s.accuracy);
    if (s.flip_rate) out << ", flip-rate " << pct(*s.flip_rate);
    if (s.consistency) out << ", consistency " << pct(*s.consistency);
    out << '\n';
  }
  return out.str();
}

inline std::string probe_summary_text(const ProbeReport& p) {
  std::ostringstream out;
  out << "probe accuracy " << pct(p.accuracy) << " (held-out " << p.n_test << ", train " << p.n_train
      << ", high-confidence share " << pct(p.positive_rate) << ")\n";
  char buf[96];
  for (int l = 0; l < kNumLabels; ++l) {
    out << label_name(static_cast<Label>(l)) << ":\n";
    for (const auto& f : p.top_features[l]) {
      std::snprintf(buf, sizeof buf, "  %-14s weight %7.3f  avg confidence %.3f\n", f.token.c_str(),
                    f.weight, f.mean_confidence);
      out << buf;
    }
  }
  return out.str();
}

// Writes via a callback into `path`, failing loudly if the stream breaks.
template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  fn(out);
  out.flush();
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace debias
