#pragma once

#include <string>
#include <vector>

#include "signbench/core/tensor.hpp"
#include "signbench/nn/modules.hpp"

namespace signbench {

struct ConformerConfig {
  int64_t in_dim = 1536;
  int64_t hidden = 512;  // C'
  int blocks = 4;
  int heads = 8;
  int ff_multiplier = 4;
  int conv_expansion = 2;
  int64_t conv_kernel = 5;
  // Pooling weights renormalized to sum 1 before the weighted sum; with the
  // flag off, the raw mean attention is applied and temporal averaging
  // follows (the alternative reading of the pooling order).
  bool renormalize_pool = true;
};

// One Conformer block: half-step feed-forward, self-attention, convolution
// module, half-step feed-forward, final normalization.
struct ConformerBlock {
  LayerNorm ln_ff1, ln_attn, ln_conv, ln_ff2, ln_out, ln_mid;
  Linear ff1_a, ff1_b, ff2_a, ff2_b;
  MultiHeadSelfAttention attn;
  Linear conv_in, conv_out;
  Tensor conv_kernel, conv_bias;
  int64_t hidden = 0, kernel = 5;
  int expansion = 2;

  ConformerBlock() = default;
  ConformerBlock(ParamStore& ps, const std::string& prefix, const ConformerConfig& cfg)
      : hidden(cfg.hidden), kernel(cfg.conv_kernel), expansion(cfg.conv_expansion) {
    int64_t ff = cfg.hidden * cfg.ff_multiplier;
    ln_ff1 = LayerNorm(ps, prefix + ".ln_ff1", cfg.hidden);
    ff1_a = Linear(ps, prefix + ".ff1_a", cfg.hidden, ff);
    ff1_b = Linear(ps, prefix + ".ff1_b", ff, cfg.hidden);
    ln_attn = LayerNorm(ps, prefix + ".ln_attn", cfg.hidden);
    attn = MultiHeadSelfAttention(ps, prefix + ".attn", cfg.hidden, cfg.heads);
    ln_conv = LayerNorm(ps, prefix + ".ln_conv", cfg.hidden);
    int64_t ce = cfg.hidden * cfg.conv_expansion;
    conv_in = Linear(ps, prefix + ".conv_in", cfg.hidden, 2 * ce);
    conv_kernel = ps.weight(prefix + ".conv_dw", {cfg.conv_kernel, ce}, cfg.conv_kernel);
    conv_bias = ps.bias(prefix + ".conv_dwb", {ce});
    ln_mid = LayerNorm(ps, prefix + ".ln_mid", ce);
    conv_out = Linear(ps, prefix + ".conv_out", ce, cfg.hidden);
    ln_ff2 = LayerNorm(ps, prefix + ".ln_ff2", cfg.hidden);
    ff2_a = Linear(ps, prefix + ".ff2_a", cfg.hidden, ff);
    ff2_b = Linear(ps, prefix + ".ff2_b", ff, cfg.hidden);
    ln_out = LayerNorm(ps, prefix + ".ln_out", cfg.hidden);
  }

  // Returns the block output plus this block's attention map (heads x T x T).
  std::pair<Tensor, Tensor> forward(Tape& t, const Tensor& x_in) const {
    Tensor x = x_in;
    x = t.add(x, t.scale(ff(t, ln_ff1.forward(t, x), ff1_a, ff1_b), 0.5));
    AttentionResult ar = attn.forward(t, ln_attn.forward(t, x));
    x = t.add(x, ar.out);
    x = t.add(x, conv_module(t, ln_conv.forward(t, x)));
    x = t.add(x, t.scale(ff(t, ln_ff2.forward(t, x), ff2_a, ff2_b), 0.5));
    x = ln_out.forward(t, x);
    return {x, ar.weights};
  }

 private:
  static Tensor ff(Tape& t, const Tensor& x, const Linear& a, const Linear& b) {
    return b.forward(t, t.silu(a.forward(t, x)));
  }

  Tensor conv_module(Tape& t, const Tensor& x) const {
    int64_t ce = hidden * expansion;
    Tensor y = conv_in.forward(t, x);
    Tensor gate_a = t.slice(y, 1, 0, ce);
    Tensor gate_b = t.slice(y, 1, ce, ce);
    Tensor glu = t.mul(gate_a, t.sigmoid(gate_b));
    Tensor conv = t.add(t.conv1d_depthwise(glu, conv_kernel, Pad::kSame), conv_bias);
    return conv_out.forward(t, t.silu(ln_mid.forward(t, conv)));
  }
};

struct ConformerOutput {
  Tensor hidden;                 // T x C'
  Tensor pooled;                 // C'
  std::vector<Tensor> attention; // one heads x T x T map per block
};

// Input projection, N Conformer blocks, and attentive pooling: the mean
// attention map across all blocks weights the final block's output.
struct ConformerEncoder {
  ConformerConfig cfg;
  Linear fc1;
  std::vector<ConformerBlock> blocks;

  ConformerEncoder() = default;
  ConformerEncoder(ParamStore& ps, const std::string& prefix, const ConformerConfig& cfg_in)
      : cfg(cfg_in) {
    fc1 = Linear(ps, prefix + ".fc1", cfg.in_dim, cfg.hidden);
    for (int i = 0; i < cfg.blocks; ++i)
      blocks.emplace_back(ps, prefix + ".block" + std::to_string(i), cfg);
  }

  ConformerOutput forward(Tape& t, const Tensor& x_in) const {
    if (x_in.rank() != 2 || x_in.dim(1) != cfg.in_dim)
      throw ShapeError("conformer: expected [T x " + std::to_string(cfg.in_dim) + "], got " +
                       shape_str(x_in.shape()));
    ConformerOutput out;
    Tensor x = fc1.forward(t, x_in);
    for (const ConformerBlock& b : blocks) {
      auto [y, attn] = b.forward(t, x);
      x = y;
      out.attention.push_back(attn);
    }
    out.hidden = x;
    out.pooled = attentive_pool(t, out.hidden, out.attention, cfg.renormalize_pool);
    return out;
  }

  // Key weights: mean over blocks, heads, and query positions of the
  // attention each key receives; then a weighted temporal sum of the final
  // hidden states. With renormalize=true the weights sum to 1, so uniform
  // attention reduces to the plain temporal mean.
  static Tensor attentive_pool(Tape& t, const Tensor& hidden,
                               const std::vector<Tensor>& attention, bool renormalize = true) {
    if (attention.empty()) throw ContractError("attentive_pool: no attention maps");
    int64_t T = hidden.dim(0);
    Tensor acc;
    int64_t total_rows = 0;
    for (const Tensor& a : attention) {
      // a: heads x Tq x Tk -> sum over heads and queries -> Tk
      Tensor per_key = t.sum_axis(t.sum_axis(a, 0), 0);
      acc = acc.defined() ? t.add(acc, per_key) : per_key;
      total_rows += a.dim(0) * a.dim(1);
    }
    Tensor w = t.scale(acc, 1.0 / static_cast<double>(total_rows));
    if (renormalize) w = t.div(w, t.sum_all(w));
    Tensor pooled = t.matmul(t.reshape(w, {1, T}), hidden);
    if (!renormalize) pooled = t.scale(pooled, 1.0 / static_cast<double>(T));
    return t.reshape(pooled, {hidden.dim(1)});
  }
};

}  // namespace signbench
