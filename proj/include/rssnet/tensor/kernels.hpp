// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Compute-heavy inner loops. Each kernel exists twice: `serial` is the
// reference implementation kept for testing, `parallel` distributes the
// outermost independent loop with OpenMP. Both visit the reduction terms of
// every output element in the same order, so their results are bit-identical
// regardless of thread count.

#include <cstddef>

namespace rssnet::kernels {

// Shapes for a 1-D convolution, input [batch, in_channels, in_len],
// weight [out_channels, in_channels, kernel], output [batch, out_channels, out_len].
struct Conv1dDims {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t in_len = 1;
  std::size_t out_len = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Depth-wise 1-D convolution: input/output [batch, channels, len], weight [channels, kernel].
struct DepthwiseDims {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t in_len = 1;
  std::size_t out_len = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Depth-wise 2-D convolution, stride 1, "same" padding: input/output
// [batch, channels, height, width], weight [channels, kh, kw].
struct Depthwise2dDims {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t kh = 1;
  std::size_t kw = 1;
};

#define RSSNET_DECLARE_KERNELS                                                                  \
  /* c = alpha * op(a) * op(b) + beta * c; a is m x k (k x m if trans_a), b is k x n. */        \
  template <typename T>                                                                         \
  void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,  \
            const T* a, const T* b, T beta, T* c);                                              \
  template <typename T>                                                                         \
  void conv1d_forward(const Conv1dDims& d, const T* x, const T* w, const T* bias, T* y);        \
  /* Accumulates into dx. */                                                                    \
  template <typename T>                                                                         \
  void conv1d_backward_input(const Conv1dDims& d, const T* dy, const T* w, T* dx);              \
  /* Accumulates into dw. */                                                                    \
  template <typename T>                                                                         \
  void conv1d_backward_weight(const Conv1dDims& d, const T* dy, const T* x, T* dw);             \
  template <typename T>                                                                         \
  void depthwise_forward(const DepthwiseDims& d, const T* x, const T* w, const T* bias, T* y);  \
  template <typename T>                                                                         \
  void depthwise_backward_input(const DepthwiseDims& d, const T* dy, const T* w, T* dx);        \
  template <typename T>                                                                         \
  void depthwise_backward_weight(const DepthwiseDims& d, const T* dy, const T* x, T* dw);       \
  template <typename T>                                                                         \
  void depthwise2d_forward(const Depthwise2dDims& d, const T* x, const T* w, const T* bias,     \
                           T* y);                                                               \
  template <typename T>                                                                         \
  void depthwise2d_backward_input(const Depthwise2dDims& d, const T* dy, const T* w, T* dx);    \
  template <typename T>                                                                         \
  void depthwise2d_backward_weight(const Depthwise2dDims& d, const T* dy, const T* x, T* dw);

namespace serial {
RSSNET_DECLARE_KERNELS
}  // namespace serial

namespace parallel {
RSSNET_DECLARE_KERNELS
}  // namespace parallel

#undef RSSNET_DECLARE_KERNELS

// Worker count used by the parallel kernels. Reads RSSNET_NUM_THREADS once;
// 0 or unset leaves the OpenMP default.
int configure_threads();
int thread_count();

}  // namespace rssnet::kernels
