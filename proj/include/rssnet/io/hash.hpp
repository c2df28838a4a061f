// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace rssnet::io {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string to_hex(const Digest& d);

// splitmix64 finalizer; the building block of every derived seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for (master, index, tag); each argument passes through the mixer so
// neighbouring indices and tags decorrelate.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::uint64_t tag) noexcept {
  return mix64(mix64(mix64(master) ^ index) ^ tag);
}

}  // namespace rssnet::io
