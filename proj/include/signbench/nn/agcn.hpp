#pragma once

#include <string>
#include <vector>

#include "signbench/core/tensor.hpp"
#include "signbench/data/topology.hpp"
#include "signbench/nn/modules.hpp"

namespace signbench {

// Row-normalized skeleton adjacency with self-loops: rows sum to 1.
inline Tensor skeleton_adjacency(const EdgeList& edges, int64_t joints) {
  Tensor a = Tensor::zeros({joints, joints});
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= joints || j >= joints)
      throw ShapeError("skeleton edge (" + std::to_string(i) + "," + std::to_string(j) +
                       ") outside " + std::to_string(joints) + " joints");
    a.values()[i * joints + j] = 1.0;
    a.values()[j * joints + i] = 1.0;
  }
  for (int64_t i = 0; i < joints; ++i) a.values()[i * joints + i] = 1.0;
  for (int64_t i = 0; i < joints; ++i) {
    double row = 0.0;
    for (int64_t j = 0; j < joints; ++j) row += a.values()[i * joints + j];
    for (int64_t j = 0; j < joints; ++j) a.values()[i * joints + j] /= row;
  }
  return a;
}

// Squeeze-and-excitation channel gate with bottleneck reduction 4.
struct SEBlock {
  Linear fc1, fc2;

  SEBlock() = default;
  SEBlock(ParamStore& ps, const std::string& prefix, int64_t channels) {
    int64_t mid = std::max<int64_t>(1, channels / 4);
    fc1 = Linear(ps, prefix + ".fc1", channels, mid);
    fc2 = Linear(ps, prefix + ".fc2", mid, channels);
  }

  // x: F x J x C. Squeeze averages over frames and joints.
  Tensor forward(Tape& t, const Tensor& x) const {
    int64_t C = x.dim(2);
    Tensor flat = t.reshape(x, {x.dim(0) * x.dim(1), C});
    Tensor squeeze = t.reshape(t.mean_axis(flat, 0), {1, C});
    Tensor gate = t.sigmoid(fc2.forward(t, t.relu(fc1.forward(t, squeeze))));
    return t.mul(x, t.reshape(gate, {C}));
  }
};

// Adaptive graph convolution layer: spatial mix through (A + B), a channel
// map, temporal depthwise convolution (kernel 7), SE recalibration, and
// activation, with a residual when the channel counts match. A is the fixed
// skeleton adjacency; B is learnable.
struct AGCNLayer {
  Tensor adjacency;  // fixed, not trainable
  Tensor b_adj;
  Linear channel_map;
  Tensor temporal_kernel, temporal_bias;
  SEBlock se;
  bool use_se = true;
  int64_t joints = 0, in_channels = 0, out_channels = 0;

  AGCNLayer() = default;
  AGCNLayer(ParamStore& ps, const std::string& prefix, Tensor adjacency_in, int64_t c_in,
            int64_t c_out, int64_t temporal_k = 7, bool use_se_in = true)
      : adjacency(std::move(adjacency_in)),
        use_se(use_se_in),
        joints(adjacency.dim(0)),
        in_channels(c_in),
        out_channels(c_out) {
    b_adj = ps.weight(prefix + ".B", {joints, joints}, joints);
    channel_map = Linear(ps, prefix + ".map", c_in, c_out);
    temporal_kernel = ps.weight(prefix + ".tconv", {temporal_k, c_out}, temporal_k);
    temporal_bias = ps.bias(prefix + ".tconvb", {c_out});
    if (use_se) se = SEBlock(ps, prefix + ".se", c_out);
  }

  // x: F x J x C_in -> F x J x C_out
  Tensor forward(Tape& t, const Tensor& x) const {
    if (x.rank() != 3 || x.dim(1) != joints || x.dim(2) != in_channels)
      throw ShapeError("agcn: expected [F x " + std::to_string(joints) + " x " +
                       std::to_string(in_channels) + "], got " + shape_str(x.shape()));
    int64_t F = x.dim(0);
    // spatial: (A + B) . x, batched over frames via a joints-major layout
    Tensor xj = t.reshape(t.swap01(x), {joints, F * in_channels});
    Tensor mixed = t.matmul(t.add(adjacency, b_adj), xj);
    Tensor spatial = t.swap01(t.reshape(mixed, {joints, F, in_channels}));
    Tensor mapped = t.reshape(
        channel_map.forward(t, t.reshape(spatial, {F * joints, in_channels})),
        {F, joints, out_channels});
    // temporal depthwise conv shares one kernel across joints
    Tensor seq = t.reshape(mapped, {F, joints * out_channels});
    std::vector<Tensor> tiled(static_cast<size_t>(joints), temporal_kernel);
    Tensor kernel = joints == 1 ? temporal_kernel : t.concat(tiled, 1);
    Tensor conv = t.reshape(t.conv1d_depthwise(seq, kernel, Pad::kSame), {F, joints, out_channels});
    Tensor y = t.add(conv, temporal_bias);
    if (use_se) y = se.forward(t, y);
    y = t.relu(y);
    if (in_channels == out_channels) y = t.add(y, x);
    return y;
  }
};

// Articulator-specific encoder: fc1 into C_in channels, a 4-layer AGCN with
// channel schedule C_in -> 2C -> 2C -> 3C -> 6C, then joint aggregation by
// reshaping to F x (J * 6C) and a learnable projection to 6C (no pooling
// over joints).
struct ArticulatorEncoder {
  Linear fc1;
  std::vector<AGCNLayer> layers;
  Linear fc2;
  int64_t joints = 0, c_in = 0, out_dim = 0;

  ArticulatorEncoder() = default;
  ArticulatorEncoder(ParamStore& ps, const std::string& prefix, const EdgeList& edges,
                     int64_t joints_in, int64_t c_in_channels, int64_t temporal_k = 7)
      : joints(joints_in), c_in(c_in_channels), out_dim(6 * c_in_channels) {
    if (c_in % 2 != 0)
      throw ConfigError("articulator encoder: C_in must be even for the x1.5 step, got " +
                        std::to_string(c_in));
    fc1 = Linear(ps, prefix + ".fc1", 3, c_in);
    Tensor a = skeleton_adjacency(edges, joints);
    // progressive widths per the x[2, 1, 1.5, 2] schedule
    int64_t c1 = 2 * c_in, c2 = 2 * c_in, c3 = 3 * c_in, c4 = 6 * c_in;
    layers.emplace_back(ps, prefix + ".agcn1", a, c_in, c1, temporal_k);
    layers.emplace_back(ps, prefix + ".agcn2", a, c1, c2, temporal_k);
    layers.emplace_back(ps, prefix + ".agcn3", a, c2, c3, temporal_k);
    layers.emplace_back(ps, prefix + ".agcn4", a, c3, c4, temporal_k);
    fc2 = Linear(ps, prefix + ".fc2", joints * c4, out_dim);
  }

  // x: F x J x 3 -> F x 6C
  Tensor forward(Tape& t, const Tensor& x) const {
    int64_t F = x.dim(0);
    Tensor h = t.reshape(fc1.forward(t, t.reshape(x, {F * joints, 3})), {F, joints, c_in});
    for (const AGCNLayer& layer : layers) h = layer.forward(t, h);
    return fc2.forward(t, t.reshape(h, {F, joints * 6 * c_in}));
  }
};

}  // namespace signbench
