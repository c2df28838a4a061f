// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// RSSNet forward pass. Batched layouts:
//   spectra   [B, L]
//   features  [B, N, L']
//   chunks    [B, N, K, T]
//   estimates [B, C, L]

#include <random>
#include <string>
#include <vector>

#include "rssnet/model/config.hpp"
#include "rssnet/model/params.hpp"
#include "rssnet/tensor/ops.hpp"

namespace rssnet::model {

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // dropout source; required when training with dropout > 0
  // When set, receives the attention matrices of every GA call in call order.
  std::vector<Tensor<double>>* attention = nullptr;
};

struct ChunkInfo {
  std::size_t K = 0;
  std::size_t stride = 0;
  std::size_t T = 0;
  std::size_t pad_len = 0;
  std::size_t original_len = 0;
};

// Window geometry for a sequence of length `len`; ConfigError if K < 2 or K > len.
ChunkInfo chunk_geometry(std::size_t len, std::size_t K);

template <typename T>
struct ChunkTensor {
  Var<T> data;  // [B, N, K, T]
  ChunkInfo info;
};

template <typename T>
Var<T> encode(const Var<T>& y, const ParamStore<T>& p, const RssNetConfig& c);

template <typename T>
ChunkTensor<T> chunk(const Var<T>& h, std::size_t K);

// Sums windows at their offsets, divides by per-position coverage and trims padding.
template <typename T>
Var<T> overlap_add(const ChunkTensor<T>& chunks);

// x [B', N, len] -> [B', N, len]; `prefix` selects the module's parameters.
template <typename T>
Var<T> tda_forward(const Var<T>& x, const ParamStore<T>& p, const std::string& prefix, const RssNetConfig& c,
                   const ForwardOptions& opt);

template <typename T>
Var<T> rssnet_block(const Var<T>& H, const ParamStore<T>& p, const std::string& prefix, const RssNetConfig& c,
                    const ForwardOptions& opt);

template <typename T>
Var<T> unroll(const Var<T>& H, const ParamStore<T>& p, const RssNetConfig& c, const ForwardOptions& opt);

// R_hat, h: [B, N, L'] -> [B, C, L]
template <typename T>
Var<T> mask_and_decode(const Var<T>& R_hat, const Var<T>& h, const ParamStore<T>& p, const RssNetConfig& c);

// y [B, L] -> [B, C, L]
template <typename T>
Var<T> forward(const Var<T>& y, const ParamStore<T>& p, const RssNetConfig& c, const ForwardOptions& opt = {});

// Fixed sinusoidal table [len, width].
template <typename T>
Tensor<T> positional_encoding(std::size_t len, std::size_t width);

}  // namespace rssnet::model
