// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Differentiable primitives. Layout conventions follow the usual
// [batch, channels, length] order for sequence ops; rank-2 inputs to the
// convolution and normalization ops are treated as a batch of one.
// Shape violations raise DimensionError naming the offending shapes.

#include <cstddef>
#include <random>
#include <vector>

#include "rssnet/tensor/autograd.hpp"

namespace rssnet {

// Elementwise, operands of identical shape.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
template <typename T> Var<T> add_scalar(const Var<T>& a, T offset);

// Reductions to a single-element tensor.
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);

template <typename T> Var<T> reshape(const Var<T>& a, Shape shape);
template <typename T> Var<T> permute(const Var<T>& a, const std::vector<std::size_t>& order);
// Slice [start, start + length) along `axis`.
template <typename T> Var<T> narrow(const Var<T>& a, std::size_t axis, std::size_t start, std::size_t length);
// Gathers sub-tensors along axis 0.
template <typename T> Var<T> index_select(const Var<T>& a, const std::vector<std::size_t>& rows);

// x [B, Cin, L], w [Cout, Cin, k], bias [Cout] or undefined.
// L_out = floor((L + 2*padding - k) / stride) + 1. Cross-correlation, no flip.
template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::size_t stride, std::size_t padding);

// x [B, Cin, L], w [Cin, Cout, k]. L_out = (L - 1) * stride - 2 * padding + k.
// Adjoint of conv1d under a shared kernel.
template <typename T>
Var<T> conv_transpose1d(const Var<T>& x, const Var<T>& w, std::size_t stride, std::size_t padding);

// x [B, C, L], w [C, k], bias [C] or undefined.
template <typename T>
Var<T> depthwise_conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::size_t stride,
                        std::size_t padding);

// x [B, C, H, W], w [C, kh, kw] with odd kh/kw, stride 1, same-size output.
template <typename T>
Var<T> depthwise_conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias);

// Channel mixing at every position: x [B, Cin, ...], w [Cout, Cin].
template <typename T>
Var<T> pointwise_conv(const Var<T>& x, const Var<T>& w, const Var<T>& bias);

// Statistics taken jointly over all non-batch entries of each sample;
// gain/bias applied per channel (axis 1, or axis 0 for rank-2 input).
template <typename T>
Var<T> global_layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps);

// Per-row normalization over the last axis.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps);

// slope holds one value per channel (axis 1 for rank >= 3, else axis 0) or a
// single shared value.
template <typename T> Var<T> prelu(const Var<T>& x, const Var<T>& slope);
template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
// Over the last axis.
template <typename T> Var<T> softmax(const Var<T>& x);

// x [..., in], w [out, in], bias [out] or undefined.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias);

// a [Bt, M, K] (or [M, K]); b [Bt, K, N], or [Bt, N, K] when transpose_b.
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b, bool transpose_b = false);

// Adaptive average pooling over the last axis; out_len == 1 pools the full length.
template <typename T> Var<T> adaptive_avg_pool1d(const Var<T>& x, std::size_t out_len);
// Nearest-neighbour resampling of the last axis: src = floor(i * L / out_len).
template <typename T> Var<T> interpolate_nearest(const Var<T>& x, std::size_t out_len);

// Inverted dropout: scales kept entries by 1/(1-p) when training; identity otherwise.
template <typename T>
Var<T> dropout(const Var<T>& x, T p, bool training, std::mt19937_64* rng);

}  // namespace rssnet
