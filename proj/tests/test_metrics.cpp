#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "debias_lab/metrics.hpp"
#include "debias_lab/rng.hpp"

using namespace debias;

namespace {

std::vector<Label> labels(std::initializer_list<int> xs) {
  std::vector<Label> out;
  for (int x : xs) out.push_back(static_cast<Label>(x));
  return out;
}

}  // namespace

TEST(Accuracy, Examples) {
  EXPECT_DOUBLE_EQ(accuracy(labels({0, 1, 2}), labels({0, 1, 2})), 1.0);
  std::vector<Label> p(20, Label::entailment), g(20, Label::neutral);
  for (int i = 0; i < 9; ++i) g[i] = Label::entailment;
  EXPECT_DOUBLE_EQ(accuracy(p, g), 0.45);
  EXPECT_THROW(accuracy(std::vector<Label>{}, std::vector<Label>{}), Error);
  EXPECT_THROW(accuracy(labels({0}), labels({0, 1})), Error);
}

TEST(MacroF1, Examples) {
  EXPECT_DOUBLE_EQ(macro_f1(labels({0, 1, 2}), labels({0, 1, 2})), 1.0);
  EXPECT_DOUBLE_EQ(macro_f1(labels({1, 0}), labels({0, 1})), 0.0);
  // F1 per class: entailment 1, contradiction 2/3, neutral 0.
  EXPECT_NEAR(macro_f1(labels({0, 0, 1, 1}), labels({0, 0, 1, 2})), 5.0 / 9.0, 1e-15);
}

TEST(MacroF1, AbsentClassIsFlagged) {
  const auto r = macro_f1_detail(labels({0, 1}), labels({0, 1}));
  EXPECT_TRUE(r.absent[2]);
  EXPECT_FALSE(r.absent[0]);
  EXPECT_NEAR(r.value, 2.0 / 3.0, 1e-15);
}

TEST(MacroF1, EqualsAccuracyOnDiagonalConfusion) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<Label> g(30 + rng.index(50));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<Label>(i < 3 ? i : rng.index(3));
    EXPECT_DOUBLE_EQ(macro_f1(g, g), accuracy(g, g));
  }
}

TEST(BiasAgreement, Examples) {
  const auto x = labels({0, 2, 1, 1});
  EXPECT_DOUBLE_EQ(bias_agreement(x, x), 1.0);
  EXPECT_DOUBLE_EQ(bias_agreement(labels({0, 1}), labels({1, 2})), 0.0);
  std::vector<Label> a(2000, Label::neutral), b(2000, Label::entailment);
  for (int i = 0; i < 997; ++i) b[i] = Label::neutral;
  EXPECT_DOUBLE_EQ(bias_agreement(a, b), 0.4985);
  EXPECT_THROW(bias_agreement(labels({0}), labels({0, 1})), Error);
}

// Brute-force re-derivation from a full confusion matrix, kept independent of
// the library code paths.
TEST(Metrics, AgreeWithBruteForceOnRandomVectors) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(200);
    std::vector<Label> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<Label>(rng.index(3));
      g[i] = static_cast<Label>(rng.index(3));
    }
    long conf[3][3] = {};
    long same = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ++conf[static_cast<int>(g[i])][static_cast<int>(p[i])];
      same += p[i] == g[i];
    }
    const double acc = static_cast<double>(conf[0][0] + conf[1][1] + conf[2][2]) / static_cast<double>(n);
    double f1_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      const long tp = conf[c][c];
      const long fp = conf[0][c] + conf[1][c] + conf[2][c] - tp;
      const long fn = conf[c][0] + conf[c][1] + conf[c][2] - tp;
      f1_sum += (2 * tp + fp + fn) == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    }
    EXPECT_EQ(accuracy(p, g), acc);
    EXPECT_EQ(macro_f1(p, g), f1_sum / 3.0);
    EXPECT_EQ(bias_agreement(p, g), static_cast<double>(same) / static_cast<double>(n));
  }
}

TEST(Calibration, AllConfidentAndCorrectFillsTopBucket) {
  const std::vector<double> conf(50, 1.0);
  const std::vector<bool> ok(50, true);
  const auto b = calibration_report(conf, ok);
  ASSERT_EQ(b.size(), 10u);
  EXPECT_EQ(b.back().count, 50u);
  EXPECT_DOUBLE_EQ(b.back().accuracy, 1.0);
  for (std::size_t i = 0; i + 1 < b.size(); ++i) EXPECT_EQ(b[i].count, 0u);
}

TEST(Calibration, PerfectlyCalibratedInputHasSmallGaps) {
  Rng rng(77);
  std::vector<double> conf;
  std::vector<bool> ok;
  for (int i = 0; i < 200000; ++i) {
    const double c = rng.uniform(1.0 / 3.0, 1.0);
    conf.push_back(c);
    ok.push_back(rng.bernoulli(c));
  }
  const auto buckets = calibration_report(conf, ok);
  std::size_t total = 0;
  for (const auto& b : buckets) {
    total += b.count;
    ASSERT_GT(b.count, 0u);
    EXPECT_LT(std::abs(b.accuracy - b.mean_confidence), 0.02);
    EXPECT_GE(b.mean_confidence, b.lo);
    EXPECT_LE(b.mean_confidence, b.hi);
  }
  EXPECT_EQ(total, conf.size());
}

TEST(Calibration, LengthMismatchRejected) {
  EXPECT_THROW(calibration_report(std::vector<double>{0.5}, std::vector<bool>{}), Error);
}
