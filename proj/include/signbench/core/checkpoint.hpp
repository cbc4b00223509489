#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "signbench/core/error.hpp"
#include "signbench/core/tensor.hpp"

namespace signbench {

// Checkpoint container: magic "SBCK", version u32, count u32, then per tensor
// name length u32 + UTF-8 name, rank u32, dims u64 each, f64 LE payload.
// All integers little-endian.

namespace detail {

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("truncated checkpoint while reading " + what);
  return v;
}

}  // namespace detail

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);
  os.write("SBCK", 4);
  detail::write_pod<uint32_t>(os, kCheckpointVersion);
  detail::write_pod<uint32_t>(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    detail::write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod<uint32_t>(os, static_cast<uint32_t>(t.rank()));
    for (size_t i = 0; i < t.rank(); ++i)
      detail::write_pod<uint64_t>(os, static_cast<uint64_t>(t.dim(i)));
    os.write(reinterpret_cast<const char*>(t.values().data()),
             static_cast<std::streamsize>(t.values().size() * sizeof(double)));
  }
  if (!os) throw DataError("write failure on checkpoint: " + path);
}

inline NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SBCK", 4) != 0)
    throw FormatError("bad checkpoint magic at byte 0 in " + path);
  uint32_t version = detail::read_pod<uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  uint32_t count = detail::read_pod<uint32_t>(is, "tensor count");
  NamedTensors out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = detail::read_pod<uint32_t>(is, "name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw FormatError("truncated checkpoint name at offset " + std::to_string(is.tellg()));
    uint32_t rank = detail::read_pod<uint32_t>(is, "rank");
    Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d)
      shape[d] = static_cast<int64_t>(detail::read_pod<uint64_t>(is, "dim"));
    Tensor t = Tensor::zeros(shape);
    is.read(reinterpret_cast<char*>(t.values().data()),
            static_cast<std::streamsize>(t.values().size() * sizeof(double)));
    if (!is) throw FormatError("truncated checkpoint payload for tensor '" + name + "'");
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

// FNV-1a over the serialized payload; used for freeze/determinism checks.
inline uint64_t tensors_checksum(const NamedTensors& tensors) {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& [name, t] : tensors) {
    mix(name.data(), name.size());
    for (size_t i = 0; i < t.rank(); ++i) {
      uint64_t d = static_cast<uint64_t>(t.dim(i));
      mix(&d, sizeof(d));
    }
    mix(t.values().data(), t.values().size() * sizeof(double));
  }
  return h;
}

}  // namespace signbench
