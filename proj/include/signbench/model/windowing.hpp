#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "signbench/core/error.hpp"

namespace signbench {

// Full sliding windows [start, start + w); trailing frames that do not fill
// a window are dropped, so the count is floor((T - w) / s) + 1.
inline std::vector<std::pair<int64_t, int64_t>> enumerate_windows(int64_t total, int64_t window,
                                                                  int64_t stride) {
  if (window < 1 || stride < 1)
    throw ContractError("enumerate_windows: window and stride must be positive");
  if (total < window)
    throw ContractError("enumerate_windows: sequence of " + std::to_string(total) +
                        " shorter than window " + std::to_string(window));
  std::vector<std::pair<int64_t, int64_t>> out;
  for (int64_t start = 0; start + window <= total; start += stride)
    out.emplace_back(start, start + window);
  return out;
}

inline int64_t window_count(int64_t total, int64_t window, int64_t stride) {
  if (total < window) throw ContractError("window_count: sequence shorter than window");
  return (total - window) / stride + 1;
}

}  // namespace signbench
