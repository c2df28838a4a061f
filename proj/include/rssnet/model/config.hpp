// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <string>

namespace rssnet::model {

enum class DwconvPath { kNone, kP1, kP2, kP3 };
const char* to_string(DwconvPath p);
DwconvPath parse_dwconv_path(const std::string& s);

struct RssNetConfig {
  static constexpr int kVersion = 1;

  std::size_t N = 256;
  std::size_t enc_kernel = 3;
  std::size_t enc_stride = 1;
  std::size_t L = 1024;
  std::size_t K = 45;
  std::size_t iter = 6;
  std::size_t S = 3;
  std::size_t heads = 8;
  std::size_t d_model = 512;
  std::size_t ffn_dim = 1024;
  double dropout = 0.1;
  std::size_t C = 2;
  DwconvPath dwconv_path = DwconvPath::kP1;
  std::size_t dwconv_kernel = 1;
  bool weight_sharing = true;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;

  // Encoded length L' = floor((L + 2*floor(k/2) - k) / stride) + 1.
  std::size_t encoded_length() const;
  std::size_t chunk_stride() const { return K / 2; }
  // Number of chunks T covering the encoded length.
  std::size_t chunk_count() const;

  bool operator==(const RssNetConfig&) const = default;
};

// Versioned JSON; missing keys keep their defaults, unknown keys are rejected.
std::string to_json(const RssNetConfig& c);
RssNetConfig config_from_json(const std::string& text);
// sha256 of the canonical JSON form.
std::string config_hash(const RssNetConfig& c);

}  // namespace rssnet::model
