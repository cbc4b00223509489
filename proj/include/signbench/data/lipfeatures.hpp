#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "signbench/core/error.hpp"
#include "signbench/data/keypoints.hpp"

namespace signbench {

// Frame-wise features from the (external, frozen) lip-reading network.
struct LipFeatureClip {
  int64_t frames = 0;
  int64_t dim = 0;
  std::vector<double> features;  // frames x dim

  double& at(int64_t f, int64_t c) { return features[f * dim + c]; }
  double at(int64_t f, int64_t c) const { return features[f * dim + c]; }

  static LipFeatureClip blank(int64_t frames, int64_t dim) {
    LipFeatureClip c;
    c.frames = frames;
    c.dim = dim;
    c.features.assign(static_cast<size_t>(frames * dim), 0.0);
    return c;
  }
};

constexpr uint32_t kLipFileVersion = 1;

// SBLF container: magic, version u32, F u32, C u32, f32 LE payload.
inline void write_lip_features(const std::string& path, const LipFeatureClip& clip) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.write("SBLF", 4);
  detail::kp_write<uint32_t>(os, kLipFileVersion);
  detail::kp_write<uint32_t>(os, static_cast<uint32_t>(clip.frames));
  detail::kp_write<uint32_t>(os, static_cast<uint32_t>(clip.dim));
  for (double v : clip.features) detail::kp_write<float>(os, static_cast<float>(v));
  if (!os) throw DataError("write failure: " + path);
}

inline LipFeatureClip read_lip_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open lip feature file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SBLF", 4) != 0)
    throw FormatError("bad lip feature magic at byte 0 in " + path);
  uint32_t version = detail::kp_read<uint32_t>(is, path);
  if (version != kLipFileVersion)
    throw FormatError("unsupported lip feature version " + std::to_string(version) + " in " + path);
  uint32_t frames = detail::kp_read<uint32_t>(is, path);
  uint32_t dim = detail::kp_read<uint32_t>(is, path);
  LipFeatureClip clip = LipFeatureClip::blank(frames, dim);
  size_t n = static_cast<size_t>(frames) * dim;
  std::vector<float> raw(n);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) throw FormatError("truncated lip feature payload in " + path);
  for (size_t i = 0; i < n; ++i) clip.features[i] = static_cast<double>(raw[i]);
  return clip;
}

}  // namespace signbench
