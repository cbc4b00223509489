#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "signbench/core/gradcheck.hpp"
#include "signbench/core/rng.hpp"
#include "signbench/model/backbone.hpp"

using namespace signbench;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (double& x : t.values()) x = rng.uniform(-scale, scale);
  return t;
}

SkeletonTopology toy_topology(int face, int body, int hand) {
  SkeletonTopology t;
  auto chain = [](int n) {
    EdgeList e;
    for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
    return e;
  };
  t.face = chain(face);
  t.body = chain(body);
  t.left_hand = chain(hand);
  t.right_hand = chain(hand);
  return t;
}

BackboneConfig toy_config(int64_t c_in = 4, int64_t hidden = 8) {
  BackboneConfig cfg;
  cfg.agcn_c_in = c_in;
  cfg.conformer_hidden = hidden;
  cfg.conformer_blocks = 2;
  cfg.conformer_heads = 2;
  cfg.ff_multiplier = 2;
  cfg.conv_expansion = 2;
  cfg.conv_kernel = 3;
  cfg.temporal_kernel = 3;
  cfg.lip_dim = 6;
  return cfg;
}

ArticulatorGroups random_groups(int64_t frames, int face, int body, int hand, Rng& rng) {
  ArticulatorGroups g;
  g.face = random_tensor({frames, face, 3}, rng);
  g.body = random_tensor({frames, body, 3}, rng);
  g.left = random_tensor({frames, hand, 3}, rng);
  g.right = random_tensor({frames, hand, 3}, rng);
  return g;
}

}  // namespace

TEST_CASE("split_articulators produces the fixed disjoint groups") {
  KeypointClip clip = KeypointClip::blank(24);
  Rng rng(3);
  for (double& v : clip.coords) v = rng.uniform(-1, 1);
  ArticulatorGroups g = split_articulators(clip);
  CHECK(g.face.shape() == Shape{24, 128, 3});
  CHECK(g.body.shape() == Shape{24, 33, 3});
  CHECK(g.left.shape() == Shape{24, 21, 3});
  CHECK(g.right.shape() == Shape{24, 21, 3});
  CHECK(128 + 33 + 21 + 21 == kNumJoints);
  // contents equal slicing by the fixed index map
  for (int64_t f = 0; f < 24; ++f) {
    for (int64_t j = 0; j < 33; ++j)
      for (int c = 0; c < 3; ++c)
        CHECK(g.body.values()[(f * 33 + j) * 3 + c] == clip.at(f, kBodyBegin + j, c));
    for (int64_t j = 0; j < 21; ++j)
      for (int c = 0; c < 3; ++c)
        CHECK(g.right.values()[(f * 21 + j) * 3 + c] == clip.at(f, kRightHandBegin + j, c));
  }
}

TEST_CASE("hand flip negates x only and is an involution") {
  Tensor g = Tensor::from({1, 2, 3, -4, 5, 6}, {1, 2, 3});
  Tensor flipped = flip_hand_x(g);
  CHECK(flipped.values() == std::vector<double>{-1, 2, 3, 4, 5, 6});
  CHECK(flip_hand_x(flipped).values() == g.values());
}

TEST_CASE("left and flipped right hands share one encoder parameter set") {
  ParamStore ps(1);
  BackboneConfig cfg = toy_config();
  PoseBackbone pose(ps, "pose", cfg, toy_topology(4, 4, 3), 4, 4, 3);
  int hand_params = 0;
  for (const auto& [name, _] : ps.entries())
    if (name.rfind("pose.hand", 0) == 0) ++hand_params;
  CHECK(hand_params > 0);

  // identical input through the left path and the pre-flipped right path
  Rng rng(5);
  Tensor hand = random_tensor({6, 3, 3}, rng);
  Tensor mirrored = flip_hand_x(hand);
  Tape t;
  Tensor left_out = pose.hand_enc.forward(t, hand);
  Tensor right_out = pose.hand_enc.forward(t, flip_hand_x(mirrored));
  CHECK(left_out.values() == right_out.values());
}

TEST_CASE("AGCN layer at paper width maps 24x21x64 to 24x21x128") {
  ParamStore ps(2);
  SkeletonTopology topo = SkeletonTopology::builtin();
  Tensor a = skeleton_adjacency(topo.left_hand, 21);
  AGCNLayer layer(ps, "l1", a, 64, 128);
  Rng rng(4);
  Tensor x = random_tensor({24, 21, 64}, rng, false, 0.5);
  Tape t;
  Tensor y = layer.forward(t, x);
  CHECK(y.shape() == Shape{24, 21, 128});
}

TEST_CASE("adjacency rows sum to one") {
  Tensor a = skeleton_adjacency(SkeletonTopology::builtin().body, 33);
  for (int64_t i = 0; i < 33; ++i) {
    double row = 0;
    for (int64_t j = 0; j < 33; ++j) row += a.values()[i * 33 + j];
    CHECK(row == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("degenerate AGCN configuration reduces to graph smoothing") {
  ParamStore ps(3);
  EdgeList edges = {{0, 1}, {1, 2}, {2, 3}};
  Tensor a = skeleton_adjacency(edges, 4);
  AGCNLayer layer(ps, "l", a, 2, 4, 7, /*use_se=*/false);
  // B = 0, W = [I I], delta temporal kernel, zero biases
  for (double& v : layer.b_adj.values()) v = 0.0;
  for (double& v : layer.channel_map.w.values()) v = 0.0;
  for (int i = 0; i < 2; ++i) {
    layer.channel_map.w.values()[i * 4 + i] = 1.0;
    layer.channel_map.w.values()[i * 4 + i + 2] = 1.0;
  }
  for (double& v : layer.temporal_kernel.values()) v = 0.0;
  for (int c = 0; c < 4; ++c) layer.temporal_kernel.values()[3 * 4 + c] = 1.0;  // center tap

  Rng rng(6);
  Tensor x = Tensor::zeros({5, 4, 2});
  for (double& v : x.values()) v = rng.uniform(0.1, 1.0);  // positive: relu transparent
  Tape t;
  Tensor y = layer.forward(t, x);
  // expected: A . x per frame, replicated on both channel halves
  for (int64_t f = 0; f < 5; ++f)
    for (int64_t j = 0; j < 4; ++j)
      for (int64_t c = 0; c < 2; ++c) {
        double expect = 0;
        for (int64_t j2 = 0; j2 < 4; ++j2)
          expect += a.values()[j * 4 + j2] * x.values()[(f * 4 + j2) * 2 + c];
        CHECK(y.values()[(f * 4 + j) * 4 + c] == Catch::Approx(expect).margin(1e-12));
        CHECK(y.values()[(f * 4 + j) * 4 + c + 2] == Catch::Approx(expect).margin(1e-12));
      }
}

TEST_CASE("AGCN learnable adjacency gradient matches finite differences") {
  ParamStore ps(7);
  EdgeList edges = {{0, 1}, {1, 2}};
  Tensor a = skeleton_adjacency(edges, 3);
  AGCNLayer layer(ps, "l", a, 2, 4, 3);
  Rng rng(8);
  Tensor x = random_tensor({4, 3, 2}, rng);
  auto loss = [&](Tape& t) { return t.mean_all(layer.forward(t, x)); };
  CHECK(gradcheck(loss, {layer.b_adj}) <= 1e-4);
  CHECK(gradcheck(loss, ps.tensors()) <= 1e-4);
}

TEST_CASE("SE gate lies in (0,1) and zero weights halve the input") {
  ParamStore ps(9);
  SEBlock se(ps, "se", 8);
  Rng rng(10);
  Tensor x = random_tensor({3, 4, 8}, rng);

  // zero excitation weights -> sigmoid(0) = 0.5 gate
  for (double& v : se.fc1.w.values()) v = 0.0;
  for (double& v : se.fc2.w.values()) v = 0.0;
  Tape t;
  Tensor y = se.forward(t, x);
  for (int64_t i = 0; i < x.numel(); ++i)
    CHECK(y.values()[i] == Catch::Approx(x.values()[i] * 0.5).margin(1e-12));

  // random weights: gate strictly inside (0,1) by construction; check via ratio
  ParamStore ps2(11);
  SEBlock se2(ps2, "se", 8);
  Tape t2;
  Tensor ones = Tensor::full({2, 2, 8}, 1.0);
  Tensor g = se2.forward(t2, ones);
  for (double v : g.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  auto loss = [&](Tape& tp) { return t2.mean_all(se2.forward(tp, x)); };
  auto loss2 = [&](Tape& tp) { return tp.mean_all(se2.forward(tp, x)); };
  (void)loss;
  CHECK(gradcheck(loss2, ps2.tensors()) <= 1e-4);
}

TEST_CASE("joint aggregation flattens then projects; mean pooling is a special case") {
  ParamStore ps(12);
  EdgeList edges = {{0, 1}, {1, 2}};
  ArticulatorEncoder enc(ps, "enc", edges, 3, 2);
  Rng rng(13);
  Tensor x = random_tensor({4, 3, 3}, rng);
  Tape t;
  Tensor y = enc.forward(t, x);
  CHECK(y.shape() == Shape{4, 12});  // F x 6*C_in

  // mean-extracting projection reduces fc2 to joint mean pooling
  int64_t J = 3, C = 12;
  for (double& v : enc.fc2.w.values()) v = 0.0;
  for (double& v : enc.fc2.b.values()) v = 0.0;
  for (int64_t j = 0; j < J; ++j)
    for (int64_t c = 0; c < C; ++c)
      enc.fc2.w.values()[(j * C + c) * C + c] = 1.0 / static_cast<double>(J);
  Tape t2;
  Tensor h = t2.reshape(enc.fc1.forward(t2, t2.reshape(x, {12, 3})), {4, 3, 2});
  for (const AGCNLayer& l : enc.layers) h = l.forward(t2, h);
  Tensor pooled_manual = t2.mean_axis(h, 1);  // F x C mean over joints
  Tensor y2 = enc.forward(t2, x);
  for (int64_t i = 0; i < y2.numel(); ++i)
    CHECK(y2.values()[i] == Catch::Approx(pooled_manual.values()[i]).margin(1e-9));

  // a random projection is information-preserving: differs from mean pooling
  ParamStore ps3(14);
  ArticulatorEncoder enc3(ps3, "enc", edges, 3, 2);
  Tape t3;
  Tensor y3 = enc3.forward(t3, x);
  Tensor h3 = t3.reshape(enc3.fc1.forward(t3, t3.reshape(x, {12, 3})), {4, 3, 2});
  for (const AGCNLayer& l : enc3.layers) h3 = l.forward(t3, h3);
  Tensor mean3 = t3.mean_axis(h3, 1);
  double diff = 0;
  for (int64_t i = 0; i < y3.numel(); ++i) diff += std::fabs(y3.values()[i] - mean3.values()[i]);
  CHECK(diff > 1e-3);
}

TEST_CASE("articulator masking zeroes at most two streams") {
  Rng data_rng(15);
  std::vector<Tensor> streams;
  for (int i = 0; i < 4; ++i) streams.push_back(random_tensor({5, 3}, data_rng));
  Rng mask_rng(1);
  int max_masked = 0;
  std::set<int> seen_counts;
  for (int trial = 0; trial < 10000; ++trial) {
    auto masked = mask_articulators(streams, mask_rng);
    int zeroed = 0;
    for (int i = 0; i < 4; ++i) {
      bool all_zero = true;
      for (double v : masked[static_cast<size_t>(i)].values()) all_zero = all_zero && v == 0.0;
      if (all_zero) ++zeroed;
    }
    seen_counts.insert(zeroed);
    max_masked = std::max(max_masked, zeroed);
  }
  CHECK(max_masked <= 2);
  CHECK(seen_counts.count(0) == 1);
  CHECK(seen_counts.count(1) == 1);
  CHECK(seen_counts.count(2) == 1);
}

TEST_CASE("conformer output shapes and attention rows") {
  ParamStore ps(16);
  ConformerConfig cfg;
  cfg.in_dim = 12;
  cfg.hidden = 8;
  cfg.blocks = 2;
  cfg.heads = 2;
  cfg.ff_multiplier = 2;
  cfg.conv_kernel = 3;
  ConformerEncoder enc(ps, "conf", cfg);
  Rng rng(17);
  Tensor x = random_tensor({6, 12}, rng);
  Tape t;
  ConformerOutput out = enc.forward(t, x);
  CHECK(out.hidden.shape() == Shape{6, 8});
  CHECK(out.pooled.shape() == Shape{8});
  REQUIRE(out.attention.size() == 2);
  for (const Tensor& a : out.attention) {
    REQUIRE(a.shape() == Shape{2, 6, 6});
    for (int64_t h = 0; h < 2; ++h)
      for (int64_t q = 0; q < 6; ++q) {
        double row = 0;
        for (int64_t k = 0; k < 6; ++k) row += a.values()[(h * 6 + q) * 6 + k];
        CHECK(row == Catch::Approx(1.0).margin(1e-9));
      }
  }
}

TEST_CASE("conformer single block gradient check at toy dims") {
  ParamStore ps(18);
  ConformerConfig cfg;
  cfg.in_dim = 16;
  cfg.hidden = 16;
  cfg.blocks = 1;
  cfg.heads = 2;
  cfg.ff_multiplier = 1;
  cfg.conv_kernel = 3;
  ConformerBlock block(ps, "b", cfg);
  Rng rng(19);
  Tensor x = random_tensor({4, 16}, rng);
  Tensor w = random_tensor({4, 16}, rng);
  auto loss = [&](Tape& t) { return t.sum_all(t.mul(block.forward(t, x).first, w)); };
  CHECK(gradcheck(loss, ps.tensors()) <= 1e-4);
}

TEST_CASE("attentive pooling: uniform attention reduces to the temporal mean") {
  Rng rng(20);
  int64_t T = 5, C = 3;
  Tensor hidden = random_tensor({T, C}, rng);
  Tensor uniform = Tensor::full({2, T, T}, 1.0 / static_cast<double>(T));
  Tape t;
  Tensor pooled = ConformerEncoder::attentive_pool(t, hidden, {uniform, uniform});
  Tensor mean = t.mean_axis(hidden, 0);
  for (int64_t c = 0; c < C; ++c)
    CHECK(pooled.values()[c] == Catch::Approx(mean.values()[c]).margin(1e-12));
}

TEST_CASE("attentive pooling weights are permutation equivariant") {
  Rng rng(21);
  int64_t T = 6, C = 4;
  Tensor hidden = random_tensor({T, C}, rng);
  Tensor attn = Tensor::zeros({1, T, T});
  for (int64_t q = 0; q < T; ++q) {
    double row = 0;
    for (int64_t k = 0; k < T; ++k) row += (attn.values()[q * T + k] = rng.uniform(0.01, 1.0));
    for (int64_t k = 0; k < T; ++k) attn.values()[q * T + k] /= row;
  }
  auto key_weights = [&](const Tensor& h, const Tensor& a) {
    Tape t;
    Tensor acc = t.sum_axis(t.sum_axis(a, 0), 0);
    Tensor w = t.div(acc, t.sum_all(acc));
    return w.values();
  };
  auto w0 = key_weights(hidden, attn);

  // swap time steps 1 and 4 consistently in keys and queries
  std::vector<int64_t> perm = {0, 4, 2, 3, 1, 5};
  Tensor attn_p = Tensor::zeros({1, T, T});
  for (int64_t q = 0; q < T; ++q)
    for (int64_t k = 0; k < T; ++k)
      attn_p.values()[q * T + k] = attn.values()[perm[q] * T + perm[k]];
  auto w1 = key_weights(hidden, attn_p);
  for (int64_t k = 0; k < T; ++k) CHECK(w1[k] == Catch::Approx(w0[perm[k]]).margin(1e-12));
}

TEST_CASE("pose forward produces a pooled vector and survives zero input") {
  ParamStore ps(22);
  BackboneConfig cfg = toy_config();
  PoseBackbone pose(ps, "pose", cfg, toy_topology(4, 4, 3), 4, 4, 3);
  Rng rng(23);
  ArticulatorGroups g = random_groups(6, 4, 4, 3, rng);
  Tape t;
  PoseBackboneOutput out = pose.forward(t, g);
  CHECK(out.pooled.shape() == Shape{8});
  CHECK(out.face_feat.shape() == Shape{6, 24});

  ArticulatorGroups zeros;
  zeros.face = Tensor::zeros({6, 4, 3});
  zeros.body = Tensor::zeros({6, 4, 3});
  zeros.left = Tensor::zeros({6, 3, 3});
  zeros.right = Tensor::zeros({6, 3, 3});
  Tape t2;
  PoseBackboneOutput z = pose.forward(t2, zeros);
  for (double v : z.pooled.values()) CHECK(std::isfinite(v));
}

TEST_CASE("pose backbone full gradient check at toy dims") {
  ParamStore ps(24);
  BackboneConfig cfg = toy_config(4, 8);
  PoseBackbone pose(ps, "pose", cfg, toy_topology(4, 4, 3), 4, 4, 3);
  Rng rng(25);
  ArticulatorGroups g = random_groups(6, 4, 4, 3, rng);
  Tensor w = random_tensor({8}, rng);
  auto loss = [&](Tape& t) { return t.sum_all(t.mul(pose.forward(t, g).pooled, w)); };
  CHECK(gradcheck(loss, ps.tensors()) <= 1e-4);
}

TEST_CASE("every pose backbone parameter tensor receives gradient") {
  ParamStore ps(26);
  BackboneConfig cfg = toy_config();
  PoseBackbone pose(ps, "pose", cfg, toy_topology(4, 4, 3), 4, 4, 3);
  Rng rng(27);
  ArticulatorGroups g = random_groups(6, 4, 4, 3, rng);
  Tape t;
  PoseBackboneOutput out = pose.forward(t, g);
  Tensor loss = t.sum_all(t.mul(out.pooled, out.pooled));
  // touch the articulator features too, as the ISLR objective does
  loss = t.add(loss, t.mean_all(t.mul(out.face_feat, out.face_feat)));
  t.backward(loss);
  for (const auto& [name, p] : ps.entries()) {
    double mx = 0;
    if (p.has_grad())
      for (double v : p.grad()) mx = std::max(mx, std::fabs(v));
    INFO(name);
    CHECK(mx > 0.0);
  }
}

TEST_CASE("lip backbone: frozen inputs get no gradient, weights do") {
  ParamStore ps(28);
  BackboneConfig cfg = toy_config();
  LipBackbone lip(ps, "lip", cfg);
  LipFeatureClip clip = LipFeatureClip::blank(6, cfg.lip_dim);
  Rng rng(29);
  for (double& v : clip.features) v = rng.uniform(-1, 1);
  Tensor input = lip.features_tensor(clip);
  Tape t;
  Tensor pooled = lip.pooled(t, clip);
  CHECK(pooled.shape() == Shape{8});
  Tensor loss = t.sum_all(t.mul(pooled, pooled));
  t.backward(loss);
  CHECK_FALSE(input.has_grad());

  auto lossf = [&](Tape& tp) {
    Tensor p = lip.forward(tp, input).pooled;
    return tp.sum_all(tp.mul(p, p));
  };
  CHECK(gradcheck(lossf, ps.tensors()) <= 1e-4);
}

TEST_CASE("lip backbone rejects mismatched feature width") {
  ParamStore ps(30);
  LipBackbone lip(ps, "lip", toy_config());
  LipFeatureClip clip = LipFeatureClip::blank(4, 9);
  CHECK_THROWS_AS(lip.features_tensor(clip), ShapeError);
}

TEST_CASE("dense extraction window arithmetic") {
  CHECK(window_count(500, 24, 2) == 239);
  CHECK(enumerate_windows(500, 24, 2).size() == 239);
  CHECK(window_count(24, 24, 2) == 1);
  auto w = enumerate_windows(11, 4, 3);
  REQUIRE(w.size() == 3);
  CHECK(w[0] == std::pair<int64_t, int64_t>{0, 4});
  CHECK(w[1] == std::pair<int64_t, int64_t>{3, 7});
  CHECK(w[2] == std::pair<int64_t, int64_t>{6, 10});
  CHECK_THROWS_AS(enumerate_windows(3, 4, 1), ContractError);
}

TEST_CASE("dense extraction shape and contract") {
  ParamStore ps(31);
  BackboneConfig cfg = toy_config();
  cfg.window_frames = 12;
  cfg.dense_window = 6;
  cfg.dense_stride = 3;
  SkeletonTopology topo = toy_topology(4, 4, 3);
  PoseBackbone pose(ps, "pose", cfg, topo, 4, 4, 3);
  LipBackbone lip(ps, "lip", cfg);
  Rng rng(32);
  ArticulatorGroups g = random_groups(12, 4, 4, 3, rng);
  Tensor lips = random_tensor({12, cfg.lip_dim}, rng);
  Tape t;
  Tensor x = dense_extract(t, pose, lip, g, lips);
  CHECK(x.shape() == Shape{3, 16});  // (12-6)/3+1 windows, 2*hidden channels

  ArticulatorGroups small = random_groups(10, 4, 4, 3, rng);
  Tensor small_lips = random_tensor({10, cfg.lip_dim}, rng);
  Tape t2;
  CHECK_THROWS_AS(dense_extract(t2, pose, lip, small, small_lips), ContractError);
}

TEST_CASE("window-local dense extraction equals per-window pose_forward exactly") {
  ParamStore ps(33);
  BackboneConfig cfg = toy_config();
  cfg.window_frames = 12;
  cfg.dense_window = 6;
  cfg.dense_stride = 3;
  SkeletonTopology topo = toy_topology(4, 4, 3);
  PoseBackbone pose(ps, "pose", cfg, topo, 4, 4, 3);
  LipBackbone lip(ps, "lip", cfg);
  Rng rng(34);
  ArticulatorGroups g = random_groups(12, 4, 4, 3, rng);
  Tensor lips = random_tensor({12, cfg.lip_dim}, rng);
  Tape t;
  Tensor x = dense_extract(t, pose, lip, g, lips, DenseMode::kWindowLocal);
  auto windows = enumerate_windows(12, 6, 3);
  for (size_t wi = 0; wi < windows.size(); ++wi) {
    auto [a, b] = windows[wi];
    ArticulatorGroups slice;
    Tape ts;
    slice.face = ts.slice(g.face, 0, a, b - a);
    slice.body = ts.slice(g.body, 0, a, b - a);
    slice.left = ts.slice(g.left, 0, a, b - a);
    slice.right = ts.slice(g.right, 0, a, b - a);
    Tensor pooled = pose.forward(ts, slice).pooled;
    for (int64_t c = 0; c < 8; ++c)
      CHECK(x.values()[wi * 16 + static_cast<size_t>(c)] == pooled.values()[c]);
  }
}

TEST_CASE("pose output is invariant to global translation before normalization") {
  ParamStore ps(35);
  BackboneConfig cfg = toy_config();
  SkeletonTopology topo = SkeletonTopology::builtin();
  PoseBackbone pose(ps, "pose", cfg, topo);
  Rng rng(36);
  KeypointClip clip = KeypointClip::blank(4);
  for (double& v : clip.coords) v = rng.uniform(-1, 1);
  KeypointClip moved = clip;
  for (size_t i = 0; i < moved.coords.size(); ++i) moved.coords[i] += (i % 3 == 0 ? 2.5 : -1.25);

  Tape t1, t2;
  Tensor p1 = pose.forward_clip(t1, normalize_keypoints(clip)).pooled;
  Tensor p2 = pose.forward_clip(t2, normalize_keypoints(moved)).pooled;
  for (int64_t c = 0; c < p1.numel(); ++c)
    CHECK(p1.values()[c] == Catch::Approx(p2.values()[c]).margin(1e-8));
}

TEST_CASE("paper-scale channel schedule: 64 -> 128 -> 128 -> 192 -> 384") {
  ParamStore ps(37);
  SkeletonTopology topo = SkeletonTopology::builtin();
  ArticulatorEncoder enc(ps, "hand", topo.left_hand, 21, 64);
  REQUIRE(enc.layers.size() == 4);
  CHECK(enc.layers[0].in_channels == 64);
  CHECK(enc.layers[0].out_channels == 128);
  CHECK(enc.layers[1].out_channels == 128);
  CHECK(enc.layers[2].out_channels == 192);
  CHECK(enc.layers[3].out_channels == 384);
  CHECK(enc.out_dim == 384);
  CHECK(enc.fc2.w.shape() == Shape{21 * 384, 384});
}
