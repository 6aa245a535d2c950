#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "debias_lab/model.hpp"
#include "debias_lab/optim.hpp"
#include "debias_lab/rng.hpp"

using namespace debias;

namespace {

std::vector<EncodedExample> random_batch(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<EncodedExample> batch(n);
  for (auto& ex : batch) {
    for (int i = 0; i < 4; ++i) ex.premise.push_back(static_cast<TokenId>(rng.index(vocab)));
    for (int i = 0; i < 3; ++i) ex.hypothesis.push_back(static_cast<TokenId>(rng.index(vocab)));
    ex.label = static_cast<Label>(rng.index(3));
  }
  return batch;
}

}  // namespace

TEST(AdamW, FirstStepMovesByLearningRate) {
  // With bias correction, m_hat / sqrt(v_hat) = g / |g| on step one.
  auto params = init_params(6, 2, 3, Variant::full, 1);
  const ModelParams before = params;
  Gradients g(params.dims);
  g.fill(0.5);
  g.w1[0] = -2.0;
  OptimState st(params.dims, AdamWHyper{1e-3, 0.9, 0.999, 1e-8, 0.0});
  adamw_step(params, g, st);
  EXPECT_EQ(st.t, 1u);
  EXPECT_NEAR(params.embedding[0] - before.embedding[0], -1e-3, 1e-10);
  EXPECT_NEAR(params.w1[0] - before.w1[0], 1e-3, 1e-10);
}

TEST(AdamW, DecoupledWeightDecay) {
  auto params = init_params(6, 2, 3, Variant::full, 1);
  params.fill(2.0);
  const Gradients zero(params.dims);
  OptimState st(params.dims, AdamWHyper{0.1, 0.9, 0.999, 1e-8, 0.01});
  adamw_step(params, zero, st);
  // Zero gradient: only the decay term acts, p <- p - lr * wd * p.
  for (double x : params.w1) EXPECT_DOUBLE_EQ(x, 2.0 - 0.1 * 0.01 * 2.0);
}

TEST(AdamW, MatchesScalarReference) {
  auto params = init_params(5, 2, 2, Variant::hypothesis_only, 3);
  const double p0 = params.b1[1];
  AdamWHyper h{0.01, 0.8, 0.9, 1e-6, 0.05};
  OptimState st(params.dims, h);
  double p = p0, m = 0.0, v = 0.0;
  const double grads[] = {0.3, -0.1, 0.7, 0.0, -0.4};
  for (int t = 1; t <= 5; ++t) {
    Gradients g(params.dims);
    g.b1[1] = grads[t - 1];
    adamw_step(params, g, st);
    m = h.beta1 * m + (1 - h.beta1) * grads[t - 1];
    v = h.beta2 * v + (1 - h.beta2) * grads[t - 1] * grads[t - 1];
    const double mh = m / (1 - std::pow(h.beta1, t)), vh = v / (1 - std::pow(h.beta2, t));
    p = p - h.lr * mh / (std::sqrt(vh) + h.eps) - h.lr * h.weight_decay * p;
    EXPECT_NEAR(params.b1[1], p, 1e-15) << "step " << t;
  }
}

TEST(AdamW, RejectsNonFiniteAndShapeMismatch) {
  auto params = init_params(6, 2, 3, Variant::full, 1);
  OptimState st(params.dims, {});
  Gradients g(params.dims);
  g.b1[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(adamw_step(params, g, st), Error);
  const Gradients wrong(ModelDims{7, 2, 3, Variant::full});
  EXPECT_THROW(adamw_step(params, wrong, st), Error);
}

TEST(GradAccumulator, FourMicroBatchesEqualFusedBatch) {
  Rng rng(12);
  const auto params = init_params(20, 4, 5, Variant::full, 12);
  const auto batch = random_batch(16, 20, rng);
  std::vector<double> scales(16);
  for (double& s : scales) s = rng.uniform(0.1, 3.0);

  const auto fused = backward(std::span<const EncodedExample>(batch), params, scales).grads;
  GradAccumulator acc(params.dims, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_FALSE(acc.ready());
    const std::span<const EncodedExample> micro(batch.data() + 4 * k, 4);
    acc.add(backward(micro, params, std::span<const double>(scales.data() + 4 * k, 4)).grads);
  }
  ASSERT_TRUE(acc.ready());
  const Gradients avg = acc.flush();
  const auto a = avg.blocks(), b = fused.blocks();
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].size(); ++i) worst = std::max(worst, std::abs(a[k][i] - b[k][i]));
  }
  EXPECT_LT(worst, 1e-12);
  EXPECT_EQ(acc.count(), 0u);
}

TEST(GradAccumulator, EarlyFlushAndOverfillThrow) {
  const ModelDims d{5, 2, 2, Variant::full};
  GradAccumulator acc(d, 2);
  acc.add(Gradients(d));
  EXPECT_THROW(acc.flush(), Error);
  acc.add(Gradients(d));
  EXPECT_THROW(acc.add(Gradients(d)), Error);
  EXPECT_NO_THROW(acc.flush());
  EXPECT_THROW(GradAccumulator(d, 0), Error);
}

TEST(GradAccumulator, SingleStepIsIdentity) {
  const ModelDims d{5, 2, 2, Variant::full};
  Gradients g(d);
  g.fill(0.37);
  GradAccumulator acc(d, 1);
  acc.add(g);
  EXPECT_EQ(acc.flush(), g);
}
