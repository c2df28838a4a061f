// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/tensor/attention.hpp"

#include <cmath>
#include <string>

namespace rssnet {

namespace {

// [B, L, heads*dh] -> [B*heads, L, dh]
template <typename T>
Var<T> split_heads(const Var<T>& x, std::size_t batch, std::size_t len, std::size_t heads, std::size_t dh) {
  auto v = reshape(x, Shape{batch, len, heads, dh});
  v = permute(v, {0, 2, 1, 3});
  return reshape(v, Shape{batch * heads, len, dh});
}

}  // namespace

template <typename T>
Var<T> multi_head_attention(const Var<T>& x, const AttentionParams<T>& p, std::size_t heads, Tensor<T>* weights) {
  const Shape& xs = x.shape();
  if (xs.size() != 2 && xs.size() != 3) {
    throw DimensionError("multi_head_attention: expected [B, L, d] or [L, d] input, got " + to_string(xs));
  }
  if (p.wq.shape().size() != 2) {
    throw DimensionError("multi_head_attention: query weights must be rank 2, got " + to_string(p.wq.shape()));
  }
  const std::size_t d_model = p.wq.shape()[0];
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("multi_head_attention: d_model " + std::to_string(d_model) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const bool batched = xs.size() == 3;
  const std::size_t batch = batched ? xs[0] : 1;
  const std::size_t len = xs[xs.size() - 2];
  const std::size_t d_in = xs.back();
  const std::size_t dh = d_model / heads;

  Var<T> in = batched ? x : reshape(x, Shape{1, len, d_in});
  auto q = split_heads(linear(in, p.wq, p.bq), batch, len, heads, dh);
  auto k = split_heads(linear(in, p.wk, p.bk), batch, len, heads, dh);
  auto v = split_heads(linear(in, p.wv, p.bv), batch, len, heads, dh);

  auto scores = scale(matmul(q, k, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
  auto attn = softmax(scores);
  if (weights) *weights = attn.value();

  auto ctx = matmul(attn, v);
  ctx = reshape(ctx, Shape{batch, heads, len, dh});
  ctx = permute(ctx, {0, 2, 1, 3});
  ctx = reshape(ctx, Shape{batch, len, d_model});
  auto out = linear(ctx, p.wo, p.bo);
  return batched ? out : reshape(out, Shape{len, out.shape().back()});
}

template Var<float> multi_head_attention(const Var<float>&, const AttentionParams<float>&, std::size_t,
                                         Tensor<float>*);
template Var<double> multi_head_attention(const Var<double>&, const AttentionParams<double>&, std::size_t,
                                          Tensor<double>*);

}  // namespace rssnet
