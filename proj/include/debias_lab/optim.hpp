#pragma once

#include <cmath>
#include <cstdint>

#include "debias_lab/error.hpp"
#include "debias_lab/model.hpp"

namespace debias {

struct AdamWHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct OptimState {
  ParamBlocks m;
  ParamBlocks v;
  std::uint64_t t = 0;
  AdamWHyper hyper;

  OptimState() = default;
  OptimState(const ModelDims& dims, AdamWHyper h) : m(dims), v(dims), hyper(h) {}
};

// One AdamW update with bias correction and decoupled weight decay:
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p
inline void adamw_step(ModelParams& params, const Gradients& grads, OptimState& state) {
  if (!(grads.dims == params.dims) || !(state.m.dims == params.dims)) {
    throw Error("adamw_step: shape mismatch between parameters, gradients and state");
  }
  if (auto bad = grads.first_non_finite_block(); !bad.empty()) {
    throw Error("adamw_step: non-finite gradient in block " + bad);
  }
  const AdamWHyper& h = state.hyper;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);

  auto p_blocks = params.blocks();
  const auto g_blocks = grads.blocks();
  auto m_blocks = state.m.blocks();
  auto v_blocks = state.v.blocks();
  for (std::size_t b = 0; b < p_blocks.size(); ++b) {
    auto p = p_blocks[b];
    const auto g = g_blocks[b];
    auto m = m_blocks[b];
    auto v = v_blocks[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] = p[i] - h.lr * (m_hat / (std::sqrt(v_hat) + h.eps)) - h.lr * h.weight_decay * p[i];
    }
  }
  if (auto bad = params.first_non_finite_block(); !bad.empty()) {
    throw Error("adamw_step: non-finite parameter in block " + bad + " at step " +
                std::to_string(state.t));
  }
}

// Averages k micro-batch gradients. With equal-sized micro-batches the result
// equals the gradient of the concatenated batch.
class GradAccumulator {
 public:
  GradAccumulator(const ModelDims& dims, std::size_t k) : buffer_(dims), k_(k) {
    if (k == 0) throw Error("gradient accumulation needs k >= 1");
  }

  void add(const Gradients& micro) {
    if (count_ >= k_) throw Error("gradient accumulator already holds k micro-batches");
    buffer_.add(micro);
    ++count_;
  }

  bool ready() const { return count_ == k_; }
  std::size_t count() const { return count_; }
  std::size_t k() const { return k_; }

  // Returns the averaged gradient and resets the buffer.
  Gradients flush() {
    if (count_ != k_) {
      throw Error("gradient accumulator flushed after " + std::to_string(count_) + " of " +
                  std::to_string(k_) + " micro-batches");
    }
    Gradients out = std::move(buffer_);
    if (k_ > 1) out.scale(1.0 / static_cast<double>(k_));
    buffer_ = Gradients(out.dims);
    count_ = 0;
    return out;
  }

 private:
  Gradients buffer_;
  std::size_t k_;
  std::size_t count_ = 0;
};

}  // namespace debias
