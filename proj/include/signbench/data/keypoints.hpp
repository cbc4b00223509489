#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "signbench/core/error.hpp"

namespace signbench {

// Holistic skeleton layout: 203 joints with fixed index ranges.
constexpr int64_t kFaceBegin = 0, kFaceEnd = 128;
constexpr int64_t kBodyBegin = 128, kBodyEnd = 161;
constexpr int64_t kLeftHandBegin = 161, kLeftHandEnd = 182;
constexpr int64_t kRightHandBegin = 182, kRightHandEnd = 203;
constexpr int64_t kNumJoints = 203;
// Shoulders inside the body block (pose landmarks 11/12).
constexpr int64_t kLeftShoulder = kBodyBegin + 11;
constexpr int64_t kRightShoulder = kBodyBegin + 12;

// Per-frame 3D skeleton. Coordinates are unitless after normalization; joints
// lost to tracking failures are stored as zeros with valid=false.
struct KeypointClip {
  int64_t frames = 0;
  double fps = 25.0;
  std::vector<double> coords;   // frames x 203 x 3, row-major
  std::vector<uint8_t> valid;   // frames x 203

  double& at(int64_t f, int64_t j, int64_t c) { return coords[(f * kNumJoints + j) * 3 + c]; }
  double at(int64_t f, int64_t j, int64_t c) const { return coords[(f * kNumJoints + j) * 3 + c]; }
  bool joint_valid(int64_t f, int64_t j) const { return valid[f * kNumJoints + j] != 0; }

  static KeypointClip blank(int64_t frames, double fps = 25.0) {
    KeypointClip c;
    c.frames = frames;
    c.fps = fps;
    c.coords.assign(static_cast<size_t>(frames * kNumJoints * 3), 0.0);
    c.valid.assign(static_cast<size_t>(frames * kNumJoints), 1);
    return c;
  }

  void refresh_validity() {
    for (int64_t f = 0; f < frames; ++f)
      for (int64_t j = 0; j < kNumJoints; ++j) {
        bool zero = at(f, j, 0) == 0.0 && at(f, j, 1) == 0.0 && at(f, j, 2) == 0.0;
        valid[f * kNumJoints + j] = zero ? 0 : 1;
      }
  }
};

namespace detail {

template <typename T>
void kp_write(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T kp_read(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is)
    throw FormatError("truncated keypoint file " + path + " at byte " +
                      std::to_string(static_cast<long long>(is.gcount())));
  return v;
}

}  // namespace detail

constexpr uint32_t kKeypointFileVersion = 1;

// SBKP container: magic, version u32, F u32, J u32 (=203), fps f32, then
// f32 little-endian coords (F x J x 3).
inline void write_keypoints(const std::string& path, const KeypointClip& clip) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.write("SBKP", 4);
  detail::kp_write<uint32_t>(os, kKeypointFileVersion);
  detail::kp_write<uint32_t>(os, static_cast<uint32_t>(clip.frames));
  detail::kp_write<uint32_t>(os, static_cast<uint32_t>(kNumJoints));
  detail::kp_write<float>(os, static_cast<float>(clip.fps));
  for (double v : clip.coords) detail::kp_write<float>(os, static_cast<float>(v));
  if (!os) throw DataError("write failure: " + path);
}

inline KeypointClip read_keypoints(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open keypoint file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SBKP", 4) != 0)
    throw FormatError("bad keypoint magic at byte 0 in " + path);
  uint32_t version = detail::kp_read<uint32_t>(is, path);
  if (version != kKeypointFileVersion)
    throw FormatError("unsupported keypoint version " + std::to_string(version) + " in " + path);
  uint32_t frames = detail::kp_read<uint32_t>(is, path);
  uint32_t joints = detail::kp_read<uint32_t>(is, path);
  if (joints != kNumJoints)
    throw FormatError("keypoint file " + path + " declares " + std::to_string(joints) +
                      " joints; exactly " + std::to_string(kNumJoints) + " required");
  float fps = detail::kp_read<float>(is, path);
  KeypointClip clip = KeypointClip::blank(frames, fps);
  size_t n = static_cast<size_t>(frames) * kNumJoints * 3;
  std::vector<float> raw(n);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!is)
    throw FormatError("truncated keypoint payload in " + path + " (expected " +
                      std::to_string(n * sizeof(float)) + " payload bytes)");
  for (size_t i = 0; i < n; ++i)
    clip.coords[i] = std::isnan(raw[i]) ? 0.0 : static_cast<double>(raw[i]);
  clip.refresh_validity();
  return clip;
}

// Rescales so the per-clip mean shoulder distance is 1 and the mean shoulder
// midpoint sits at the origin; z shares the same scale. Statistics are
// per-clip means over frames with both shoulders tracked, which keeps the
// transform rigid across the clip.
inline KeypointClip normalize_keypoints(const KeypointClip& in) {
  double sum_dist = 0.0, mid[3] = {0, 0, 0};
  int64_t n_frames = 0;
  for (int64_t f = 0; f < in.frames; ++f) {
    if (!in.joint_valid(f, kLeftShoulder) || !in.joint_valid(f, kRightShoulder)) continue;
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      double diff = in.at(f, kLeftShoulder, c) - in.at(f, kRightShoulder, c);
      d2 += diff * diff;
      mid[c] += 0.5 * (in.at(f, kLeftShoulder, c) + in.at(f, kRightShoulder, c));
    }
    sum_dist += std::sqrt(d2);
    ++n_frames;
  }
  if (n_frames == 0)
    throw NormalizationError("normalize_keypoints: no frame has both shoulders tracked");
  double scale = sum_dist / static_cast<double>(n_frames);
  if (scale <= 0.0)
    throw NormalizationError("normalize_keypoints: degenerate zero shoulder distance");
  for (double& m : mid) m /= static_cast<double>(n_frames);

  KeypointClip out = in;
  for (int64_t f = 0; f < out.frames; ++f)
    for (int64_t j = 0; j < kNumJoints; ++j) {
      if (!out.joint_valid(f, j)) continue;  // missing joints stay at zero
      for (int c = 0; c < 3; ++c) out.at(f, j, c) = (out.at(f, j, c) - mid[c]) / scale;
    }
  return out;
}

}  // namespace signbench
