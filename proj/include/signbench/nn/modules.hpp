#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "signbench/core/error.hpp"
#include "signbench/core/rng.hpp"
#include "signbench/core/tensor.hpp"

namespace signbench {

// Ordered parameter registry. Iteration order is creation order, which keeps
// optimizer updates and checkpoints deterministic.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed = 0) : rng_(seed) {}

  // Uniform in +-sqrt(1/fan_in).
  Tensor weight(const std::string& name, Shape shape, int64_t fan_in) {
    double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (double& v : t.values()) v = rng_.uniform(-bound, bound);
    add(name, t);
    return t;
  }

  Tensor constant(const std::string& name, Shape shape, double value) {
    Tensor t = Tensor::full(std::move(shape), value, true);
    add(name, t);
    return t;
  }

  Tensor bias(const std::string& name, Shape shape) { return constant(name, std::move(shape), 0.0); }

  void add(const std::string& name, const Tensor& t) {
    for (const auto& [n, _] : entries_)
      if (n == name) throw ContractError("duplicate parameter name: " + name);
    entries_.emplace_back(name, t);
  }

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

  Tensor find(const std::string& name) const {
    for (const auto& [n, t] : entries_)
      if (n == name) return t;
    throw ContractError("unknown parameter: " + name);
  }

  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    out.reserve(entries_.size());
    for (const auto& [_, t] : entries_) out.push_back(t);
    return out;
  }

  void zero_grads() {
    for (auto& [_, t] : entries_) t.zero_grad();
  }

  // Trainable set control; names are matched by prefix.
  void set_all_trainable(bool trainable) {
    for (auto& [_, t] : entries_) t.set_requires_grad(trainable);
  }

  void set_trainable_by_prefix(const std::vector<std::string>& prefixes) {
    for (auto& [n, t] : entries_) {
      bool on = false;
      for (const std::string& p : prefixes)
        if (n.rfind(p, 0) == 0) on = true;
      t.set_requires_grad(on);
    }
  }

  Rng& rng() { return rng_; }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  Rng rng_;
};

struct Linear {
  Tensor w;  // in x out
  Tensor b;  // out, undefined when bias disabled
  bool has_bias = true;

  Linear() = default;
  Linear(ParamStore& ps, const std::string& prefix, int64_t in, int64_t out, bool bias = true)
      : has_bias(bias) {
    w = ps.weight(prefix + ".w", {in, out}, in);
    if (bias) b = ps.bias(prefix + ".b", {out});
  }

  Tensor forward(Tape& t, const Tensor& x) const {
    Tensor y = t.matmul(x, w);
    if (has_bias) y = t.add(y, b);
    return y;
  }
};

struct LayerNorm {
  Tensor gamma, beta;

  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& prefix, int64_t dim) {
    gamma = ps.constant(prefix + ".gamma", {dim}, 1.0);
    beta = ps.bias(prefix + ".beta", {dim});
  }

  Tensor forward(Tape& t, const Tensor& x) const {
    return t.add(t.mul(t.layer_norm(x), gamma), beta);
  }
};

struct AttentionResult {
  Tensor out;      // Tq x D
  Tensor weights;  // heads x Tq x Tk, rows sum to 1
};

// Scaled dot-product attention over pre-projected q/k/v. `causal` masks
// future keys (needs Tq == Tk).
inline AttentionResult scaled_dot_attention(Tape& t, const Tensor& q, const Tensor& k,
                                            const Tensor& v, int heads, bool causal = false) {
  int64_t D = q.dim(1);
  if (D % heads != 0)
    throw ConfigError("attention: width " + std::to_string(D) + " not divisible by " +
                      std::to_string(heads) + " heads");
  int64_t dh = D / heads;
  int64_t Tq = q.dim(0), Tk = k.dim(0);
  Tensor mask;
  if (causal) {
    if (Tq != Tk) throw ShapeError("causal attention requires square score matrix");
    mask = Tensor::zeros({Tq, Tk});
    for (int64_t i = 0; i < Tq; ++i)
      for (int64_t j = i + 1; j < Tk; ++j) mask.values()[i * Tk + j] = -1e30;
  }
  std::vector<Tensor> outs, attns;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    Tensor qh = t.slice(q, 1, h * dh, dh);
    Tensor kh = t.slice(k, 1, h * dh, dh);
    Tensor vh = t.slice(v, 1, h * dh, dh);
    Tensor scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt);
    if (causal) scores = t.add(scores, mask);
    Tensor attn = t.softmax(scores);
    outs.push_back(t.matmul(attn, vh));
    attns.push_back(t.reshape(attn, {1, Tq, Tk}));
  }
  AttentionResult r;
  r.out = heads == 1 ? outs[0] : t.concat(outs, 1);
  r.weights = heads == 1 ? attns[0] : t.concat(attns, 0);
  return r;
}

struct MultiHeadSelfAttention {
  Linear wq, wk, wv, wo;
  int heads = 8;

  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(ParamStore& ps, const std::string& prefix, int64_t dim, int heads_in)
      : heads(heads_in) {
    wq = Linear(ps, prefix + ".q", dim, dim);
    wk = Linear(ps, prefix + ".k", dim, dim);
    wv = Linear(ps, prefix + ".v", dim, dim);
    wo = Linear(ps, prefix + ".o", dim, dim);
  }

  AttentionResult forward(Tape& t, const Tensor& x) const {
    AttentionResult r = scaled_dot_attention(t, wq.forward(t, x), wk.forward(t, x),
                                             wv.forward(t, x), heads);
    r.out = wo.forward(t, r.out);
    return r;
  }
};

}  // namespace signbench
