// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace rssnet::kernels::detail {

// Output positions l in [lo, hi) whose input tap pos = l*stride + tap - padding
// falls inside [0, in_len).
struct TapRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

inline TapRange tap_range(std::size_t tap, std::size_t stride, std::size_t padding,
                          std::size_t in_len, std::size_t out_len) {
  const auto s = static_cast<std::int64_t>(stride);
  const auto offset = static_cast<std::int64_t>(tap) - static_cast<std::int64_t>(padding);
  std::int64_t lo = 0;
  if (offset < 0) lo = (-offset + s - 1) / s;
  const std::int64_t last = static_cast<std::int64_t>(in_len) - 1 - offset;
  if (last < 0) return {};
  std::int64_t hi = last / s + 1;
  if (hi > static_cast<std::int64_t>(out_len)) hi = static_cast<std::int64_t>(out_len);
  if (lo >= hi) return {};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Returns a row-major [rows, cols] view of op(src): src itself when not
// transposed, otherwise a copy into `scratch` of the stored [cols, rows] matrix.
template <typename T>
const T* packed(bool transposed, const T* src, std::size_t rows, std::size_t cols,
                std::vector<T>& scratch) {
  if (!transposed) return src;
  scratch.resize(rows * cols);
  for (std::size_t c = 0; c < cols; ++c) {
    const T* s = src + c * rows;
    for (std::size_t r = 0; r < rows; ++r) scratch[r * cols + c] = s[r];
  }
  return scratch.data();
}

}  // namespace rssnet::kernels::detail
