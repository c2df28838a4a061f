// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>

#include "rssnet/tensor/ops.hpp"

namespace rssnet {

// Projection weights follow the linear() layout [out, in].
// wq/wk/wv: [d_model, d_in], wo: [d_in, d_model].
template <typename T>
struct AttentionParams {
  Var<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

// Scaled dot-product self-attention over x [B, L, d_in] (or [L, d_in]).
// d_model is taken from wq; it must split evenly into `heads`.
// When `weights` is non-null it receives the attention matrices [B*heads, L, L].
template <typename T>
Var<T> multi_head_attention(const Var<T>& x, const AttentionParams<T>& p, std::size_t heads,
                            Tensor<T>* weights = nullptr);

}  // namespace rssnet
