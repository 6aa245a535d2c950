#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "debias_lab/data.hpp"
#include "debias_lab/error.hpp"
#include "debias_lab/hash.hpp"
#include "debias_lab/rng.hpp"
#include "debias_lab/vocab.hpp"

namespace debias {

enum class Variant { full, hypothesis_only };

inline std::string_view variant_name(Variant v) {
  return v == Variant::full ? "full" : "hypothesis_only";
}

inline Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::full;
  if (name == "hypothesis_only") return Variant::hypothesis_only;
  throw Error("unknown model variant: " + std::string(name));
}

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t d_embed = 64;
  std::size_t d_hidden = 128;
  Variant variant = Variant::full;

  // Width of the feature vector fed to the hidden layer.
  std::size_t d_feat() const { return variant == Variant::full ? 4 * d_embed : d_embed; }

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Storage shared by parameters, gradients and optimizer moments. Matrices are
// row-major: embedding [vocab][d_embed], w1 [d_feat][d_hidden],
// out [3][d_hidden].
struct ParamBlocks {
  ModelDims dims;
  std::vector<double> embedding;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> out;
  std::vector<double> out_bias;

  static constexpr std::array<std::string_view, 5> kBlockNames = {"E", "W1", "b1", "U", "c"};

  ParamBlocks() = default;
  explicit ParamBlocks(const ModelDims& d)
      : dims(d),
        embedding(d.vocab_size * d.d_embed, 0.0),
        w1(d.d_feat() * d.d_hidden, 0.0),
        b1(d.d_hidden, 0.0),
        out(kNumLabels * d.d_hidden, 0.0),
        out_bias(kNumLabels, 0.0) {}

  // Fixed block order (E, W1, b1, U, c) used by checkpoints and checksums.
  std::array<std::span<double>, 5> blocks() {
    return {embedding, w1, b1, out, out_bias};
  }
  std::array<std::span<const double>, 5> blocks() const {
    return {embedding, w1, b1, out, out_bias};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto b : blocks()) n += b.size();
    return n;
  }

  void fill(double value) {
    for (auto b : blocks()) std::fill(b.begin(), b.end(), value);
  }

  std::uint64_t checksum() const {
    Fnv1a h;
    for (auto b : blocks()) h.update(b);
    return h.digest();
  }

  // Name of the first block holding a NaN/Inf, or empty when all finite.
  std::string first_non_finite_block() const {
    const auto bs = blocks();
    for (std::size_t i = 0; i < bs.size(); ++i) {
      for (double x : bs[i]) {
        if (!std::isfinite(x)) return std::string(kBlockNames[i]);
      }
    }
    return {};
  }

  friend bool operator==(const ParamBlocks&, const ParamBlocks&) = default;
};

struct ModelParams : ParamBlocks {
  using ParamBlocks::ParamBlocks;
};

struct Gradients : ParamBlocks {
  using ParamBlocks::ParamBlocks;

  void scale(double k) {
    for (auto b : blocks()) {
      for (double& x : b) x *= k;
    }
  }

  void add(const Gradients& other) {
    auto dst = blocks();
    const auto src = other.blocks();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      for (std::size_t j = 0; j < dst[i].size(); ++j) dst[i][j] += src[i][j];
    }
  }
};

// Embeddings and weights uniform in [-0.1, 0.1], biases zero.
inline ModelParams init_params(std::size_t vocab_size, std::size_t d_embed, std::size_t d_hidden,
                               Variant variant, std::uint64_t seed) {
  if (vocab_size == 0 || d_embed == 0 || d_hidden == 0) {
    throw Error("model dimensions must be positive");
  }
  ModelParams p(ModelDims{vocab_size, d_embed, d_hidden, variant});
  Rng rng(seed);
  for (std::vector<double>* block : {&p.embedding, &p.w1, &p.out}) {
    for (double& x : *block) x = rng.uniform(-0.1, 0.1);
  }
  return p;
}

struct LabelDist {
  std::array<double, kNumLabels> p{};

  double operator[](std::size_t i) const { return p[i]; }

  double max() const { return *std::max_element(p.begin(), p.end()); }

  // Ties resolve to the lowest label index.
  Label argmax() const {
    return static_cast<Label>(std::max_element(p.begin(), p.end()) - p.begin());
  }
};

inline LabelDist softmax(std::span<const double, kNumLabels> logits) {
  for (double r : logits) {
    if (!std::isfinite(r)) throw Error("softmax: non-finite logit");
  }
  const double m = std::max({logits[0], logits[1], logits[2]});
  LabelDist d;
  double z = 0.0;
  for (int j = 0; j < kNumLabels; ++j) {
    d.p[j] = std::exp(logits[j] - m);
    z += d.p[j];
  }
  for (double& x : d.p) x /= z;
  return d;
}

inline LabelDist softmax(const std::array<double, kNumLabels>& logits) {
  return softmax(std::span<const double, kNumLabels>(logits));
}

inline constexpr double kLogClamp = 1e-12;

inline double cross_entropy(const LabelDist& dist, Label label) {
  return -std::log(std::max(dist.p[static_cast<std::size_t>(label)], kLogClamp));
}

namespace detail {

// Mean of embedding rows; an empty sequence pools to zero.
inline void mean_pool(const ModelParams& params, std::span<const TokenId> ids,
                      std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (ids.empty()) return;
  const std::size_t d = params.dims.d_embed;
  for (TokenId id : ids) {
    const double* row = params.embedding.data() + static_cast<std::size_t>(id) * d;
    for (std::size_t k = 0; k < d; ++k) out[k] += row[k];
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (double& x : out) x *= inv;
}

}  // namespace detail

// Interaction feature concat(u, v, |u - v|, u * v) of the pooled premise (u)
// and hypothesis (v).
inline std::vector<double> encode_pair(std::span<const TokenId> premise,
                                       std::span<const TokenId> hypothesis,
                                       const ModelParams& params) {
  if (params.dims.variant != Variant::full) throw Error("encode_pair requires the full variant");
  const std::size_t d = params.dims.d_embed;
  std::vector<double> feat(4 * d);
  std::span<double> u(feat.data(), d), v(feat.data() + d, d);
  detail::mean_pool(params, premise, u);
  detail::mean_pool(params, hypothesis, v);
  for (std::size_t k = 0; k < d; ++k) {
    feat[2 * d + k] = std::abs(u[k] - v[k]);
    feat[3 * d + k] = u[k] * v[k];
  }
  return feat;
}

struct Activations {
  std::vector<double> features;  // pooled input to the hidden layer
  std::vector<double> hidden;    // tanh outputs
  std::array<double, kNumLabels> logits{};
  LabelDist dist;
};

inline Activations forward(const EncodedExample& ex, const ModelParams& params) {
  const ModelDims& dims = params.dims;
  Activations act;
  if (dims.variant == Variant::full) {
    act.features = encode_pair(ex.premise, ex.hypothesis, params);
  } else {
    act.features.assign(dims.d_embed, 0.0);
    detail::mean_pool(params, ex.hypothesis, act.features);
  }
  const std::size_t df = dims.d_feat(), dh = dims.d_hidden;
  act.hidden.assign(params.b1.begin(), params.b1.end());
  for (std::size_t i = 0; i < df; ++i) {
    const double f = act.features[i];
    if (f == 0.0) continue;
    const double* row = params.w1.data() + i * dh;
    for (std::size_t j = 0; j < dh; ++j) act.hidden[j] += f * row[j];
  }
  for (double& h : act.hidden) h = std::tanh(h);
  for (int c = 0; c < kNumLabels; ++c) {
    const double* row = params.out.data() + static_cast<std::size_t>(c) * dh;
    double r = params.out_bias[c];
    for (std::size_t j = 0; j < dh; ++j) r += row[j] * act.hidden[j];
    act.logits[c] = r;
  }
  act.dist = softmax(act.logits);
  return act;
}

inline LabelDist predict(const EncodedExample& ex, const ModelParams& params) {
  return forward(ex, params).dist;
}

inline std::vector<LabelDist> predict_all(std::span<const EncodedExample> data,
                                          const ModelParams& params) {
  std::vector<LabelDist> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(predict(ex, params));
  return out;
}

struct BackwardResult {
  double loss = 0.0;  // (1/N) sum_i s_i * loss_i
  Gradients grads;
};

// Analytic gradient of the scaled mean cross-entropy over a batch.
inline BackwardResult backward(std::span<const EncodedExample* const> batch,
                               const ModelParams& params, std::span<const double> scales) {
  if (scales.size() != batch.size()) throw Error("backward: one scale factor per example required");
  for (double s : scales) {
    if (!(s >= 0.0)) throw Error("backward: scale factors must be non-negative");
  }
  const ModelDims& dims = params.dims;
  const std::size_t de = dims.d_embed, df = dims.d_feat(), dh = dims.d_hidden;
  BackwardResult res{0.0, Gradients(dims)};
  Gradients& g = res.grads;
  if (batch.empty()) return res;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  std::vector<double> d_hidden(dh), d_feat(df), d_u(de), d_v(de);
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (scales[b] == 0.0) continue;
    const EncodedExample& ex = *batch[b];
    const Activations act = forward(ex, params);
    const double coef = scales[b] * inv_n;
    loss_sum += scales[b] * cross_entropy(act.dist, ex.label);

    std::array<double, kNumLabels> d_logits{};
    for (int c = 0; c < kNumLabels; ++c) {
      d_logits[c] = coef * (act.dist.p[c] - (c == label_index(ex.label) ? 1.0 : 0.0));
    }
    std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
    for (int c = 0; c < kNumLabels; ++c) {
      g.out_bias[c] += d_logits[c];
      double* grow = g.out.data() + static_cast<std::size_t>(c) * dh;
      const double* wrow = params.out.data() + static_cast<std::size_t>(c) * dh;
      for (std::size_t j = 0; j < dh; ++j) {
        grow[j] += d_logits[c] * act.hidden[j];
        d_hidden[j] += d_logits[c] * wrow[j];
      }
    }
    for (std::size_t j = 0; j < dh; ++j) {
      d_hidden[j] *= 1.0 - act.hidden[j] * act.hidden[j];
      g.b1[j] += d_hidden[j];
    }
    for (std::size_t i = 0; i < df; ++i) {
      const double f = act.features[i];
      double* grow = g.w1.data() + i * dh;
      const double* wrow = params.w1.data() + i * dh;
      double acc = 0.0;
      for (std::size_t j = 0; j < dh; ++j) {
        grow[j] += f * d_hidden[j];
        acc += wrow[j] * d_hidden[j];
      }
      d_feat[i] = acc;
    }

    if (dims.variant == Variant::full) {
      const double* u = act.features.data();
      const double* v = act.features.data() + de;
      for (std::size_t k = 0; k < de; ++k) {
        const double diff = u[k] - v[k];
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        const double d_abs = d_feat[2 * de + k], d_prod = d_feat[3 * de + k];
        d_u[k] = d_feat[k] + sign * d_abs + v[k] * d_prod;
        d_v[k] = d_feat[de + k] - sign * d_abs + u[k] * d_prod;
      }
      if (!ex.premise.empty()) {
        const double inv = 1.0 / static_cast<double>(ex.premise.size());
        for (TokenId id : ex.premise) {
          double* row = g.embedding.data() + static_cast<std::size_t>(id) * de;
          for (std::size_t k = 0; k < de; ++k) row[k] += d_u[k] * inv;
        }
      }
    } else {
      std::copy(d_feat.begin(), d_feat.begin() + static_cast<std::ptrdiff_t>(de), d_v.begin());
    }
    if (!ex.hypothesis.empty()) {
      const double inv = 1.0 / static_cast<double>(ex.hypothesis.size());
      for (TokenId id : ex.hypothesis) {
        double* row = g.embedding.data() + static_cast<std::size_t>(id) * de;
        for (std::size_t k = 0; k < de; ++k) row[k] += d_v[k] * inv;
      }
    }
  }
  res.loss = loss_sum * inv_n;
  if (!std::isfinite(res.loss)) throw Error("backward: non-finite loss");
  if (auto bad = g.first_non_finite_block(); !bad.empty()) {
    throw Error("backward: non-finite gradient in parameter block " + bad);
  }
  return res;
}

inline BackwardResult backward(std::span<const EncodedExample> batch, const ModelParams& params,
                               std::span<const double> scales) {
  std::vector<const EncodedExample*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& ex : batch) ptrs.push_back(&ex);
  return backward(std::span<const EncodedExample* const>(ptrs), params, scales);
}

// (1/N) sum_i s_i * loss_i from forward passes alone; the finite-difference
// reference for backward().
inline double mean_loss(std::span<const EncodedExample> batch, const ModelParams& params,
                        std::span<const double> scales) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total += scales[i] * cross_entropy(predict(batch[i], params), batch[i].label);
  }
  return batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
}

}  // namespace debias
