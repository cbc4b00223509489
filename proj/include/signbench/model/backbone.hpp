#pragma once

#include <string>
#include <vector>

#include "signbench/core/rng.hpp"
#include "signbench/core/tensor.hpp"
#include "signbench/data/keypoints.hpp"
#include "signbench/data/lipfeatures.hpp"
#include "signbench/data/topology.hpp"
#include "signbench/model/windowing.hpp"
#include "signbench/nn/agcn.hpp"
#include "signbench/nn/conformer.hpp"

namespace signbench {

struct BackboneConfig {
  int64_t agcn_c_in = 64;  // per-articulator channels; features are 6x this
  int64_t temporal_kernel = 7;
  int64_t conformer_hidden = 512;  // C'
  int conformer_blocks = 4;
  int conformer_heads = 8;
  int ff_multiplier = 4;
  int conv_expansion = 2;
  int64_t conv_kernel = 5;
  int64_t lip_dim = 768;  // frozen lip-reader output width
  int64_t dense_window = 24;
  int64_t dense_stride = 2;
  int64_t window_frames = 500;  // full input length for dense extraction
  bool renormalize_pool = true;

  int64_t articulator_dim() const { return 6 * agcn_c_in; }
  int64_t concat_dim() const { return 4 * articulator_dim(); }

  ConformerConfig conformer(int64_t in_dim) const {
    ConformerConfig c;
    c.in_dim = in_dim;
    c.hidden = conformer_hidden;
    c.blocks = conformer_blocks;
    c.heads = conformer_heads;
    c.ff_multiplier = ff_multiplier;
    c.conv_expansion = conv_expansion;
    c.conv_kernel = conv_kernel;
    c.renormalize_pool = renormalize_pool;
    return c;
  }
};

// Per-articulator joint tensors split out of a (normalized) clip.
struct ArticulatorGroups {
  Tensor face;   // F x 128 x 3
  Tensor body;   // F x 33 x 3
  Tensor left;   // F x 21 x 3
  Tensor right;  // F x 21 x 3
};

inline Tensor clip_group_tensor(const KeypointClip& clip, int64_t begin, int64_t end) {
  int64_t J = end - begin;
  Tensor t = Tensor::zeros({clip.frames, J, 3});
  for (int64_t f = 0; f < clip.frames; ++f)
    for (int64_t j = 0; j < J; ++j)
      for (int c = 0; c < 3; ++c) t.values()[(f * J + j) * 3 + c] = clip.at(f, begin + j, c);
  return t;
}

// Disjoint groups covering all 203 joints, in the fixed index ranges.
inline ArticulatorGroups split_articulators(const KeypointClip& clip) {
  ArticulatorGroups g;
  g.face = clip_group_tensor(clip, kFaceBegin, kFaceEnd);
  g.body = clip_group_tensor(clip, kBodyBegin, kBodyEnd);
  g.left = clip_group_tensor(clip, kLeftHandBegin, kLeftHandEnd);
  g.right = clip_group_tensor(clip, kRightHandBegin, kRightHandEnd);
  return g;
}

// Mirrors x so the right hand matches the left-hand graph before the shared
// hand encoder; y and z are untouched.
inline Tensor flip_hand_x(const Tensor& group) {
  Tensor out = Tensor::from(group.values(), group.shape());
  for (int64_t i = 0; i < out.numel(); i += 3) out.values()[i] = -out.values()[i];
  return out;
}

// Training-time articulator dropout: k drawn uniformly from {0, 1, 2}, then k
// distinct streams are zero-filled. Never more than two of the four streams.
inline std::vector<Tensor> mask_articulators(const std::vector<Tensor>& streams, Rng& rng) {
  if (streams.size() != 4) throw ContractError("mask_articulators: expected 4 streams");
  int k = static_cast<int>(rng.below(3));
  std::vector<size_t> order = rng.permutation(4);
  std::vector<Tensor> out = streams;
  for (int i = 0; i < k; ++i) out[order[static_cast<size_t>(i)]] =
      Tensor::zeros(streams[order[static_cast<size_t>(i)]].shape());
  return out;
}

struct PoseBackboneOutput {
  Tensor pooled;  // f_p, C'
  Tensor hidden;  // T x C' (final Conformer states)
  // pre-masking articulator features for the auxiliary loss, F x C each
  Tensor face_feat, body_feat, left_feat, right_feat;
};

// Pose path: articulator encoders (hands share weights; right hand flipped),
// optional masking, channel concat to F x 4C, Conformer, attentive pooling.
struct PoseBackbone {
  BackboneConfig cfg;
  ArticulatorEncoder face_enc, body_enc, hand_enc;
  ConformerEncoder conformer;

  PoseBackbone() = default;
  PoseBackbone(ParamStore& ps, const std::string& prefix, const BackboneConfig& cfg_in,
               const SkeletonTopology& topo, int64_t face_joints = 128, int64_t body_joints = 33,
               int64_t hand_joints = 21)
      : cfg(cfg_in) {
    face_enc = ArticulatorEncoder(ps, prefix + ".face", topo.face, face_joints, cfg.agcn_c_in,
                                  cfg.temporal_kernel);
    body_enc = ArticulatorEncoder(ps, prefix + ".body", topo.body, body_joints, cfg.agcn_c_in,
                                  cfg.temporal_kernel);
    hand_enc = ArticulatorEncoder(ps, prefix + ".hand", topo.left_hand, hand_joints,
                                  cfg.agcn_c_in, cfg.temporal_kernel);
    conformer = ConformerEncoder(ps, prefix + ".conformer", cfg.conformer(cfg.concat_dim()));
  }

  // F x C articulator features; the same hand encoder serves both hands.
  std::vector<Tensor> articulator_features(Tape& t, const ArticulatorGroups& g) const {
    Tensor f_face = face_enc.forward(t, g.face);
    Tensor f_body = body_enc.forward(t, g.body);
    Tensor f_left = hand_enc.forward(t, g.left);
    Tensor f_right = hand_enc.forward(t, flip_hand_x(g.right));
    return {f_face, f_body, f_left, f_right};
  }

  PoseBackboneOutput forward(Tape& t, const ArticulatorGroups& g, Rng* mask_rng = nullptr) const {
    std::vector<Tensor> feats = articulator_features(t, g);
    PoseBackboneOutput out;
    out.face_feat = feats[0];
    out.body_feat = feats[1];
    out.left_feat = feats[2];
    out.right_feat = feats[3];
    std::vector<Tensor> main = mask_rng ? mask_articulators(feats, *mask_rng) : feats;
    Tensor concat = t.concat(main, 1);  // F x 4C
    ConformerOutput co = conformer.forward(t, concat);
    out.pooled = co.pooled;
    out.hidden = co.hidden;
    return out;
  }

  PoseBackboneOutput forward_clip(Tape& t, const KeypointClip& clip, Rng* mask_rng = nullptr) const {
    return forward(t, split_articulators(clip), mask_rng);
  }
};

// Lip path: the lip-reader features arrive precomputed and frozen (the input
// tensor never requires grad); only this Conformer trains.
struct LipBackbone {
  BackboneConfig cfg;
  ConformerEncoder conformer;

  LipBackbone() = default;
  LipBackbone(ParamStore& ps, const std::string& prefix, const BackboneConfig& cfg_in)
      : cfg(cfg_in) {
    conformer = ConformerEncoder(ps, prefix + ".conformer", cfg.conformer(cfg.lip_dim));
  }

  Tensor features_tensor(const LipFeatureClip& clip) const {
    if (clip.dim != cfg.lip_dim)
      throw ShapeError("lip features dim " + std::to_string(clip.dim) + " != configured " +
                       std::to_string(cfg.lip_dim));
    return Tensor::from(clip.features, {clip.frames, clip.dim});
  }

  ConformerOutput forward(Tape& t, const Tensor& lip) const { return conformer.forward(t, lip); }

  Tensor pooled(Tape& t, const LipFeatureClip& clip) const {
    return forward(t, features_tensor(clip)).pooled;
  }
};

enum class DenseMode {
  kFullSequence,  // AGCN path runs once over all frames; Conformer slides
  kWindowLocal    // whole pipeline per window; equals pose_forward per slice
};

// Dense feature extraction over a full window_frames input: pose and lip
// pooled vectors per sliding window, concatenated to T x 2C'.
inline Tensor dense_extract(Tape& t, const PoseBackbone& pose, const LipBackbone& lip,
                            const ArticulatorGroups& groups, const Tensor& lip_features,
                            DenseMode mode = DenseMode::kFullSequence) {
  const BackboneConfig& cfg = pose.cfg;
  int64_t F = groups.face.dim(0);
  if (F != cfg.window_frames)
    throw ContractError("dense_extract: expected exactly " + std::to_string(cfg.window_frames) +
                        " frames, got " + std::to_string(F) + " (padding is the caller's job)");
  if (lip_features.dim(0) != F)
    throw ShapeError("dense_extract: lip frames " + std::to_string(lip_features.dim(0)) +
                     " != pose frames " + std::to_string(F));
  auto windows = enumerate_windows(F, cfg.dense_window, cfg.dense_stride);

  std::vector<Tensor> rows;
  rows.reserve(windows.size());
  if (mode == DenseMode::kFullSequence) {
    std::vector<Tensor> feats = pose.articulator_features(t, groups);
    Tensor concat = t.concat(feats, 1);  // F x 4C
    for (auto [a, b] : windows) {
      Tensor pose_win = pose.conformer.forward(t, t.slice(concat, 0, a, b - a)).pooled;
      Tensor lip_win = lip.forward(t, t.slice(lip_features, 0, a, b - a)).pooled;
      Tensor row = t.concat({pose_win, lip_win}, 0);
      rows.push_back(t.reshape(row, {1, 2 * cfg.conformer_hidden}));
    }
  } else {
    for (auto [a, b] : windows) {
      ArticulatorGroups win;
      win.face = t.slice(groups.face, 0, a, b - a);
      win.body = t.slice(groups.body, 0, a, b - a);
      win.left = t.slice(groups.left, 0, a, b - a);
      win.right = t.slice(groups.right, 0, a, b - a);
      Tensor pose_win = pose.forward(t, win).pooled;
      Tensor lip_win = lip.forward(t, t.slice(lip_features, 0, a, b - a)).pooled;
      Tensor row = t.concat({pose_win, lip_win}, 0);
      rows.push_back(t.reshape(row, {1, 2 * cfg.conformer_hidden}));
    }
  }
  return t.concat(rows, 0);
}

}  // namespace signbench
