// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>

#include "rssnet/tensor/kernels.hpp"

namespace rssnet {

namespace kp = kernels::parallel;

namespace {

template <typename T>
using GradIn = std::span<Tensor<T>* const>;

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": operand shapes differ, " + to_string(a.shape()) +
                         " vs " + to_string(b.shape()));
  }
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src, T factor = T{1}) {
  T* d = dst.ptr();
  const T* s = src.ptr();
  const std::size_t n = src.size();
  for (std::size_t i = 0; i < n; ++i) d[i] += factor * s[i];
}

// Batch/channel/length view of a rank-2 or rank-3 tensor.
struct Ncl {
  std::size_t batch;
  std::size_t channels;
  std::size_t length;
};

Ncl ncl_of(const Shape& s, const char* op) {
  if (s.size() == 3) return {s[0], s[1], s[2]};
  if (s.size() == 2) return {1, s[0], s[1]};
  throw DimensionError(std::string(op) + ": expected [B, C, L] or [C, L] input, got " + to_string(s));
}

Shape like_input(const Shape& in, std::size_t channels, std::size_t length) {
  if (in.size() == 2) return {channels, length};
  return {in[0], channels, length};
}

void check_bias(const Shape* bias, std::size_t channels, const char* op) {
  if (bias && (bias->size() != 1 || (*bias)[0] != channels)) {
    throw DimensionError(std::string(op) + ": bias shape " + to_string(*bias) + " does not match " +
                         std::to_string(channels) + " channels");
  }
}

template <typename T>
std::size_t conv_out_len(std::size_t len, std::size_t kernel, std::size_t stride, std::size_t padding,
                         const Shape& xs, const Shape& ws, const char* op) {
  if (kernel == 0) throw ConfigError(std::string(op) + ": kernel size must be >= 1");
  if (stride == 0) throw ConfigError(std::string(op) + ": stride must be >= 1");
  if (len + 2 * padding < kernel) {
    throw DimensionError(std::string(op) + ": padded input " + to_string(xs) + " shorter than kernels " +
                         to_string(ws));
  }
  return (len + 2 * padding - kernel) / stride + 1;
}

// Visits every element of a permuted view: f(out_index, in_offset).
template <typename F>
void for_each_permuted(const Shape& in_shape, const std::vector<std::size_t>& order, F&& f) {
  const std::size_t rank = in_shape.size();
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t d = rank; d-- > 1;) in_stride[d - 1] = in_stride[d] * in_shape[d];
  Shape out_shape(rank);
  std::vector<std::size_t> step(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    out_shape[d] = in_shape[order[d]];
    step[d] = in_stride[order[d]];
  }
  const std::size_t total = numel(in_shape);
  const std::size_t inner = out_shape[rank - 1];
  const std::size_t inner_step = step[rank - 1];
  std::vector<std::size_t> idx(rank, 0);
  std::size_t base = 0;
  for (std::size_t o = 0; o < total; o += inner) {
    std::size_t off = base;
    for (std::size_t i = 0; i < inner; ++i, off += inner_step) f(o + i, off);
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++idx[d];
      base += step[d];
      if (idx[d] < out_shape[d]) break;
      base -= step[d] * out_shape[d];
      idx[d] = 0;
    }
  }
}

template <typename T>
T uniform01(std::mt19937_64& rng) {
  return static_cast<T>(static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

}  // namespace

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  const T* x = a.value().ptr();
  const T* y = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_op<T>(std::move(out), {a, b}, "add", [](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
    if (gi[0]) accumulate(*gi[0], g);
    if (gi[1]) accumulate(*gi[1], g);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  const T* x = a.value().ptr();
  const T* y = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_op<T>(std::move(out), {a, b}, "sub", [](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
    if (gi[0]) accumulate(*gi[0], g);
    if (gi[1]) accumulate(*gi[1], g, T{-1});
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  const T* x = a.value().ptr();
  const T* y = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_op<T>(std::move(out), {a, b}, "mul", [a, b](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
    const std::size_t n = g.size();
    if (gi[0]) {
      T* d = gi[0]->ptr();
      const T* y = b.value().ptr();
      for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * y[i];
    }
    if (gi[1]) {
      T* d = gi[1]->ptr();
      const T* x = a.value().ptr();
      for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * x[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out(a.shape());
  const T* x = a.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x[i];
  return make_op<T>(std::move(out), {a}, "scale", [factor](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
    if (gi[0]) accumulate(*gi[0], g, factor);
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T offset) {
  Tensor<T> out(a.shape());
  const T* x = a.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + offset;
  return make_op<T>(std::move(out), {a}, "add_scalar", [](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
    if (gi[0]) accumulate(*gi[0], g);
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  double acc = 0.0;
  for (T v : a.value().data()) acc += static_cast<double>(v);
  Tensor<T> out(Shape{1}, static_cast<T>(acc));
  return make_op<T>(std::move(out), {a}, "sum", [](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
    if (!gi[0]) return;
    const T v = g[0];
    for (auto& d : gi[0]->data()) d += v;
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const std::size_t n = a.size();
  double acc = 0.0;
  for (T v : a.value().data()) acc += static_cast<double>(v);
  Tensor<T> out(Shape{1}, static_cast<T>(acc / static_cast<double>(n)));
  return make_op<T>(std::move(out), {a}, "mean", [n](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
    if (!gi[0]) return;
    const T v = g[0] / static_cast<T>(n);
    for (auto& d : gi[0]->data()) d += v;
  });
}

// ------------------------------------------------------------------ layout

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> out = a.value();
  out.reshape(std::move(shape));
  return make_op<T>(std::move(out), {a}, "reshape", [](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
    if (!gi[0]) return;
    T* d = gi[0]->ptr();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

template <typename T>
Var<T> permute(const Var<T>& a, const std::vector<std::size_t>& order) {
  const Shape& in_shape = a.shape();
  const std::size_t rank = in_shape.size();
  std::vector<bool> seen(rank, false);
  if (order.size() != rank) {
    throw DimensionError("permute: order of length " + std::to_string(order.size()) + " for shape " +
                         to_string(in_shape));
  }
  for (auto o : order) {
    if (o >= rank || seen[o]) throw DimensionError("permute: invalid axis order for shape " + to_string(in_shape));
    seen[o] = true;
  }
  Shape out_shape(rank);
  for (std::size_t d = 0; d < rank; ++d) out_shape[d] = in_shape[order[d]];
  Tensor<T> out(out_shape);
  const T* src = a.value().ptr();
  T* dst = out.ptr();
  for_each_permuted(in_shape, order, [&](std::size_t o, std::size_t i) { dst[o] = src[i]; });
  return make_op<T>(std::move(out), {a}, "permute",
                    [in_shape, order](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      if (!gi[0]) return;
                      T* d = gi[0]->ptr();
                      const T* s = g.ptr();
                      for_each_permuted(in_shape, order, [&](std::size_t o, std::size_t i) { d[i] += s[o]; });
                    });
}

template <typename T>
Var<T> narrow(const Var<T>& a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = a.shape();
  if (axis >= s.size() || length == 0 || start + length > s[axis]) {
    throw DimensionError("narrow: slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") on axis " + std::to_string(axis) + " out of range for " + to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t full = s[axis];
  Shape out_shape = s;
  out_shape[axis] = length;
  Tensor<T> out(out_shape);
  const T* src = a.value().ptr();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(src + (o * full + start) * inner, length * inner, out.ptr() + o * length * inner);
  }
  return make_op<T>(std::move(out), {a}, "narrow",
                    [outer, inner, full, start, length](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      if (!gi[0]) return;
                      for (std::size_t o = 0; o < outer; ++o) {
                        T* d = gi[0]->ptr() + (o * full + start) * inner;
                        const T* src = g.ptr() + o * length * inner;
                        for (std::size_t i = 0; i < length * inner; ++i) d[i] += src[i];
                      }
                    });
}

template <typename T>
Var<T> index_select(const Var<T>& a, const std::vector<std::size_t>& rows) {
  const Shape& s = a.shape();
  if (rows.empty()) throw DimensionError("index_select: empty row list");
  const std::size_t row = a.size() / s[0];
  for (auto r : rows) {
    if (r >= s[0]) {
      throw DimensionError("index_select: row " + std::to_string(r) + " out of range for " + to_string(s));
    }
  }
  Shape out_shape = s;
  out_shape[0] = rows.size();
  Tensor<T> out(out_shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(a.value().ptr() + rows[i] * row, row, out.ptr() + i * row);
  }
  return make_op<T>(std::move(out), {a}, "index_select",
                    [rows, row](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      if (!gi[0]) return;
                      for (std::size_t i = 0; i < rows.size(); ++i) {
                        T* d = gi[0]->ptr() + rows[i] * row;
                        const T* src = g.ptr() + i * row;
                        for (std::size_t k = 0; k < row; ++k) d[k] += src[k];
                      }
                    });
}

// ------------------------------------------------------------ convolutions

template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::size_t stride, std::size_t padding) {
  const Ncl in = ncl_of(x.shape(), "conv1d");
  const Shape& ws = w.shape();
  if (ws.size() != 3 || ws[1] != in.channels) {
    throw DimensionError("conv1d: input " + to_string(x.shape()) + " incompatible with kernels " + to_string(ws));
  }
  check_bias(bias ? &bias.shape() : nullptr, ws[0], "conv1d");
  kernels::Conv1dDims d;
  d.batch = in.batch;
  d.in_channels = in.channels;
  d.out_channels = ws[0];
  d.in_len = in.length;
  d.kernel = ws[2];
  d.stride = stride;
  d.padding = padding;
  d.out_len = conv_out_len<T>(in.length, d.kernel, stride, padding, x.shape(), ws, "conv1d");
  Tensor<T> out(like_input(x.shape(), d.out_channels, d.out_len));
  kp::conv1d_forward(d, x.value().ptr(), w.value().ptr(), bias ? bias.value().ptr() : nullptr, out.ptr());
  return make_op<T>(std::move(out), {x, w, bias}, "conv1d", [x, w, d](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
    if (gi[0]) kp::conv1d_backward_input(d, g.ptr(), w.value().ptr(), gi[0]->ptr());
    if (gi[1]) kp::conv1d_backward_weight(d, g.ptr(), x.value().ptr(), gi[1]->ptr());
    if (gi[2]) {
      T* db = gi[2]->ptr();
      for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t co = 0; co < d.out_channels; ++co) {
          const T* row = g.ptr() + (b * d.out_channels + co) * d.out_len;
          T acc{0};
          for (std::size_t l = 0; l < d.out_len; ++l) acc += row[l];
          db[co] += acc;
        }
      }
    }
  });
}

template <typename T>
Var<T> conv_transpose1d(const Var<T>& x, const Var<T>& w, std::size_t stride, std::size_t padding) {
  const Ncl in = ncl_of(x.shape(), "conv_transpose1d");
  const Shape& ws = w.shape();
  if (ws.size() != 3 || ws[0] != in.channels) {
    throw DimensionError("conv_transpose1d: input " + to_string(x.shape()) + " incompatible with kernels " +
                         to_string(ws));
  }
  if (stride == 0) throw ConfigError("conv_transpose1d: stride must be >= 1");
  const auto full = static_cast<std::int64_t>((in.length - 1) * stride + ws[2]);
  const std::int64_t out_len = full - 2 * static_cast<std::int64_t>(padding);
  if (out_len <= 0) {
    throw DimensionError("conv_transpose1d: padding " + std::to_string(padding) + " leaves no output for input " +
                         to_string(x.shape()) + " and kernels " + to_string(ws));
  }
  // Adjoint pairing: this op is the input-gradient of a conv1d whose input has
  // out_len samples and ws[1] channels.
  kernels::Conv1dDims d;
  d.batch = in.batch;
  d.in_channels = ws[1];
  d.out_channels = ws[0];
  d.in_len = static_cast<std::size_t>(out_len);
  d.out_len = in.length;
  d.kernel = ws[2];
  d.stride = stride;
  d.padding = padding;
  Tensor<T> out(like_input(x.shape(), d.in_channels, d.in_len));
  kp::conv1d_backward_input(d, x.value().ptr(), w.value().ptr(), out.ptr());
  return make_op<T>(std::move(out), {x, w}, "conv_transpose1d",
                    [x, w, d](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      if (gi[0]) {
                        Tensor<T> tmp(gi[0]->shape());
                        kp::conv1d_forward(d, g.ptr(), w.value().ptr(), static_cast<const T*>(nullptr), tmp.ptr());
                        accumulate(*gi[0], tmp);
                      }
                      if (gi[1]) kp::conv1d_backward_weight(d, x.value().ptr(), g.ptr(), gi[1]->ptr());
                    });
}

template <typename T>
Var<T> depthwise_conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::size_t stride,
                        std::size_t padding) {
  const Ncl in = ncl_of(x.shape(), "depthwise_conv1d");
  const Shape& ws = w.shape();
  if (ws.size() != 2 || ws[0] != in.channels) {
    throw DimensionError("depthwise_conv1d: input " + to_string(x.shape()) + " incompatible with kernels " +
                         to_string(ws));
  }
  check_bias(bias ? &bias.shape() : nullptr, in.channels, "depthwise_conv1d");
  kernels::DepthwiseDims d;
  d.batch = in.batch;
  d.channels = in.channels;
  d.in_len = in.length;
  d.kernel = ws[1];
  d.stride = stride;
  d.padding = padding;
  d.out_len = conv_out_len<T>(in.length, d.kernel, stride, padding, x.shape(), ws, "depthwise_conv1d");
  Tensor<T> out(like_input(x.shape(), d.channels, d.out_len));
  kp::depthwise_forward(d, x.value().ptr(), w.value().ptr(), bias ? bias.value().ptr() : nullptr, out.ptr());
  return make_op<T>(std::move(out), {x, w, bias}, "depthwise_conv1d",
                    [x, w, d](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      if (gi[0]) kp::depthwise_backward_input(d, g.ptr(), w.value().ptr(), gi[0]->ptr());
                      if (gi[1]) kp::depthwise_backward_weight(d, g.ptr(), x.value().ptr(), gi[1]->ptr());
                      if (gi[2]) {
                        T* db = gi[2]->ptr();
                        for (std::size_t b = 0; b < d.batch; ++b) {
                          for (std::size_t c = 0; c < d.channels; ++c) {
                            const T* row = g.ptr() + (b * d.channels + c) * d.out_len;
                            T acc{0};
                            for (std::size_t l = 0; l < d.out_len; ++l) acc += row[l];
                            db[c] += acc;
                          }
                        }
                      }
                    });
}

template <typename T>
Var<T> depthwise_conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 3 || ws[0] != xs[1]) {
    throw DimensionError("depthwise_conv2d: input " + to_string(xs) + " incompatible with kernels " + to_string(ws));
  }
  if (ws[1] % 2 == 0 || ws[2] % 2 == 0) {
    throw ConfigError("depthwise_conv2d: kernel " + to_string(ws) + " must have odd spatial sizes");
  }
  check_bias(bias ? &bias.shape() : nullptr, xs[1], "depthwise_conv2d");
  kernels::Depthwise2dDims d;
  d.batch = xs[0];
  d.channels = xs[1];
  d.height = xs[2];
  d.width = xs[3];
  d.kh = ws[1];
  d.kw = ws[2];
  Tensor<T> out(xs);
  kp::depthwise2d_forward(d, x.value().ptr(), w.value().ptr(), bias ? bias.value().ptr() : nullptr, out.ptr());
  return make_op<T>(std::move(out), {x, w, bias}, "depthwise_conv2d",
                    [x, w, d](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      if (gi[0]) kp::depthwise2d_backward_input(d, g.ptr(), w.value().ptr(), gi[0]->ptr());
                      if (gi[1]) kp::depthwise2d_backward_weight(d, g.ptr(), x.value().ptr(), gi[1]->ptr());
                      if (gi[2]) {
                        const std::size_t plane = d.height * d.width;
                        T* db = gi[2]->ptr();
                        for (std::size_t b = 0; b < d.batch; ++b) {
                          for (std::size_t c = 0; c < d.channels; ++c) {
                            const T* p = g.ptr() + (b * d.channels + c) * plane;
                            T acc{0};
                            for (std::size_t i = 0; i < plane; ++i) acc += p[i];
                            db[c] += acc;
                          }
                        }
                      }
                    });
}

namespace {

// [B, C, P] <-> [C, B*P] so a pointwise conv over the whole batch is one gemm.
template <typename T>
void to_channel_major(const T* src, std::size_t batch, std::size_t channels, std::size_t positions, T* dst) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(src + (b * channels + c) * positions, positions, dst + (c * batch + b) * positions);
    }
  }
}

template <typename T>
void from_channel_major(const T* src, std::size_t batch, std::size_t channels, std::size_t positions, T* dst,
                        bool accumulate) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const T* s = src + (c * batch + b) * positions;
      T* d = dst + (b * channels + c) * positions;
      if (accumulate) {
        for (std::size_t p = 0; p < positions; ++p) d[p] += s[p];
      } else {
        std::copy_n(s, positions, d);
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> pointwise_conv(const Var<T>& x, const Var<T>& w, const Var<T>& bias) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() < 2) throw DimensionError("pointwise_conv: expected [B, C, ...] or [C, L] input, got " + to_string(xs));
  const bool batched = xs.size() >= 3;
  const std::size_t batch = batched ? xs[0] : 1;
  const std::size_t cin = batched ? xs[1] : xs[0];
  if (ws.size() != 2 || ws[1] != cin) {
    throw DimensionError("pointwise_conv: input " + to_string(xs) + " incompatible with weights " + to_string(ws));
  }
  const std::size_t cout = ws[0];
  check_bias(bias ? &bias.shape() : nullptr, cout, "pointwise_conv");
  const std::size_t positions = x.size() / (batch * cin);
  const std::size_t cols = batch * positions;
  Shape out_shape = xs;
  out_shape[batched ? 1 : 0] = cout;
  Tensor<T> out(out_shape);

  // With a single sample the [C, P] layout already is channel-major.
  std::shared_ptr<std::vector<T>> xcm;
  const T* xp = x.value().ptr();
  if (batch > 1) {
    xcm = std::make_shared<std::vector<T>>(cin * cols);
    to_channel_major(xp, batch, cin, positions, xcm->data());
    xp = xcm->data();
  }
  std::vector<T> ycm(batch > 1 ? cout * cols : 0);
  T* yp = batch > 1 ? ycm.data() : out.ptr();
  kp::gemm<T>(false, false, cout, cols, cin, T{1}, w.value().ptr(), xp, T{0}, yp);
  if (bias) {
    for (std::size_t c = 0; c < cout; ++c) {
      const T bv = bias.value()[c];
      for (std::size_t p = 0; p < cols; ++p) yp[c * cols + p] += bv;
    }
  }
  if (batch > 1) from_channel_major(yp, batch, cout, positions, out.ptr(), false);

  return make_op<T>(std::move(out), {x, w, bias}, "pointwise_conv",
                    [x, w, xcm, batch, cin, cout, positions, cols](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      std::vector<T> gcm;
                      const T* gp = g.ptr();
                      if (batch > 1) {
                        gcm.resize(cout * cols);
                        to_channel_major(g.ptr(), batch, cout, positions, gcm.data());
                        gp = gcm.data();
                      }
                      if (gi[0]) {
                        if (batch > 1) {
                          std::vector<T> dx(cin * cols);
                          kp::gemm<T>(true, false, cin, cols, cout, T{1}, w.value().ptr(), gp, T{0}, dx.data());
                          from_channel_major(dx.data(), batch, cin, positions, gi[0]->ptr(), true);
                        } else {
                          kp::gemm<T>(true, false, cin, cols, cout, T{1}, w.value().ptr(), gp, T{1}, gi[0]->ptr());
                        }
                      }
                      if (gi[1]) {
                        const T* xp = xcm ? xcm->data() : x.value().ptr();
                        kp::gemm<T>(false, true, cout, cin, cols, T{1}, gp, xp, T{1}, gi[1]->ptr());
                      }
                      if (gi[2]) {
                        T* db = gi[2]->ptr();
                        for (std::size_t c = 0; c < cout; ++c) {
                          T acc{0};
                          for (std::size_t p = 0; p < cols; ++p) acc += gp[c * cols + p];
                          db[c] += acc;
                        }
                      }
                    });
}

// ----------------------------------------------------------- normalization

template <typename T>
Var<T> global_layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  const Shape& xs = x.shape();
  if (xs.size() < 2) throw DimensionError("global_layer_norm: expected rank >= 2 input, got " + to_string(xs));
  if (!(eps > T{0})) throw ConfigError("global_layer_norm: eps must be positive");
  const bool batched = xs.size() >= 3;
  const std::size_t batch = batched ? xs[0] : 1;
  const std::size_t channels = batched ? xs[1] : xs[0];
  const std::size_t inner = x.size() / (batch * channels);
  if (gain.shape() != Shape{channels} || bias.shape() != Shape{channels}) {
    throw DimensionError("global_layer_norm: gain " + to_string(gain.shape()) + " / bias " + to_string(bias.shape()) +
                         " do not match input " + to_string(xs));
  }
  const std::size_t per = channels * inner;
  std::vector<double> mu(batch), rstd(batch);
  Tensor<T> out(xs);
  const T* src = x.value().ptr();
  for (std::size_t b = 0; b < batch; ++b) {
    const T* p = src + b * per;
    double m = 0.0;
    for (std::size_t i = 0; i < per; ++i) m += p[i];
    m /= static_cast<double>(per);
    double v = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      const double c = p[i] - m;
      v += c * c;
    }
    v /= static_cast<double>(per);
    mu[b] = m;
    rstd[b] = 1.0 / std::sqrt(v + static_cast<double>(eps));
    T* q = out.ptr() + b * per;
    for (std::size_t c = 0; c < channels; ++c) {
      const T gv = gain.value()[c], bv = bias.value()[c];
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t k = c * inner + i;
        q[k] = gv * static_cast<T>((p[k] - m) * rstd[b]) + bv;
      }
    }
  }
  return make_op<T>(
      std::move(out), {x, gain, bias}, "global_layer_norm",
      [x, gain, batch, channels, inner, mu, rstd](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
        const std::size_t per = channels * inner;
        std::vector<double> xhat(per), dxhat(per);
        for (std::size_t b = 0; b < batch; ++b) {
          const T* p = x.value().ptr() + b * per;
          const T* gp = g.ptr() + b * per;
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t c = 0; c < channels; ++c) {
            const double gv = gain.value()[c];
            double dg = 0.0, db = 0.0;
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t k = c * inner + i;
              xhat[k] = (p[k] - mu[b]) * rstd[b];
              dxhat[k] = gp[k] * gv;
              m1 += dxhat[k];
              m2 += dxhat[k] * xhat[k];
              dg += gp[k] * xhat[k];
              db += gp[k];
            }
            if (gi[1]) (*gi[1])[c] += static_cast<T>(dg);
            if (gi[2]) (*gi[2])[c] += static_cast<T>(db);
          }
          if (gi[0]) {
            m1 /= static_cast<double>(per);
            m2 /= static_cast<double>(per);
            T* d = gi[0]->ptr() + b * per;
            for (std::size_t k = 0; k < per; ++k) d[k] += static_cast<T>(rstd[b] * (dxhat[k] - m1 - xhat[k] * m2));
          }
        }
      });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  const Shape& xs = x.shape();
  const std::size_t width = xs.back();
  if (gain.shape() != Shape{width} || bias.shape() != Shape{width}) {
    throw DimensionError("layer_norm: gain " + to_string(gain.shape()) + " / bias " + to_string(bias.shape()) +
                         " do not match input " + to_string(xs));
  }
  if (!(eps > T{0})) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t rows = x.size() / width;
  std::vector<double> mu(rows), rstd(rows);
  Tensor<T> out(xs);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = x.value().ptr() + r * width;
    double m = 0.0;
    for (std::size_t i = 0; i < width; ++i) m += p[i];
    m /= static_cast<double>(width);
    double v = 0.0;
    for (std::size_t i = 0; i < width; ++i) v += (p[i] - m) * (p[i] - m);
    v /= static_cast<double>(width);
    mu[r] = m;
    rstd[r] = 1.0 / std::sqrt(v + static_cast<double>(eps));
    T* q = out.ptr() + r * width;
    for (std::size_t i = 0; i < width; ++i) {
      q[i] = gain.value()[i] * static_cast<T>((p[i] - m) * rstd[r]) + bias.value()[i];
    }
  }
  return make_op<T>(std::move(out), {x, gain, bias}, "layer_norm",
                    [x, gain, rows, width, mu, rstd](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      std::vector<double> xhat(width), dxhat(width);
                      for (std::size_t r = 0; r < rows; ++r) {
                        const T* p = x.value().ptr() + r * width;
                        const T* gp = g.ptr() + r * width;
                        double m1 = 0.0, m2 = 0.0;
                        for (std::size_t i = 0; i < width; ++i) {
                          xhat[i] = (p[i] - mu[r]) * rstd[r];
                          dxhat[i] = gp[i] * static_cast<double>(gain.value()[i]);
                          m1 += dxhat[i];
                          m2 += dxhat[i] * xhat[i];
                          if (gi[1]) (*gi[1])[i] += static_cast<T>(gp[i] * xhat[i]);
                          if (gi[2]) (*gi[2])[i] += gp[i];
                        }
                        if (gi[0]) {
                          m1 /= static_cast<double>(width);
                          m2 /= static_cast<double>(width);
                          T* d = gi[0]->ptr() + r * width;
                          for (std::size_t i = 0; i < width; ++i) {
                            d[i] += static_cast<T>(rstd[r] * (dxhat[i] - m1 - xhat[i] * m2));
                          }
                        }
                      }
                    });
}

// ------------------------------------------------------------- activations

template <typename T>
Var<T> prelu(const Var<T>& x, const Var<T>& slope) {
  const Shape& xs = x.shape();
  const std::size_t axis = xs.size() >= 3 ? 1 : 0;
  const std::size_t channels = xs[axis];
  const std::size_t n_slope = slope.size();
  if (n_slope != 1 && n_slope != channels) {
    throw DimensionError("prelu: slope " + to_string(slope.shape()) + " does not match channels of " + to_string(xs));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= xs[d];
  for (std::size_t d = axis + 1; d < xs.size(); ++d) inner *= xs[d];
  Tensor<T> out(xs);
  const T* src = x.value().ptr();
  const T* a = slope.value().ptr();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < channels; ++c) {
      const T av = a[n_slope == 1 ? 0 : c];
      const std::size_t base = (o * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const T v = src[base + i];
        out[base + i] = v >= T{0} ? v : av * v;
      }
    }
  }
  return make_op<T>(std::move(out), {x, slope}, "prelu",
                    [x, slope, outer, channels, inner, n_slope](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      const T* src = x.value().ptr();
                      const T* a = slope.value().ptr();
                      for (std::size_t o = 0; o < outer; ++o) {
                        for (std::size_t c = 0; c < channels; ++c) {
                          const std::size_t si = n_slope == 1 ? 0 : c;
                          const std::size_t base = (o * channels + c) * inner;
                          T acc{0};
                          for (std::size_t i = 0; i < inner; ++i) {
                            const T v = src[base + i];
                            const T gv = g[base + i];
                            if (gi[0]) (*gi[0])[base + i] += v >= T{0} ? gv : a[si] * gv;
                            if (v < T{0}) acc += gv * v;
                          }
                          if (gi[1]) (*gi[1])[si] += acc;
                        }
                      }
                    });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const T* src = x.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[i] > T{0} ? src[i] : T{0};
  return make_op<T>(std::move(out), {x}, "relu", [x](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
    if (!gi[0]) return;
    const T* src = x.value().ptr();
    T* d = gi[0]->ptr();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (src[i] > T{0}) d[i] += g[i];
    }
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const T* src = x.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = src[i];
    if (v >= T{0}) {
      out[i] = T{1} / (T{1} + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T{1} + e);
    }
  }
  return make_op<T>(std::move(out), {x}, "sigmoid", [](const Tensor<T>& g, const Tensor<T>& y, GradIn<T> gi) {
    if (!gi[0]) return;
    T* d = gi[0]->ptr();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (T{1} - y[i]);
  });
}

template <typename T>
Var<T> softmax(const Var<T>& x) {
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = x.value().ptr() + r * width;
    T* q = out.ptr() + r * width;
    const T mx = *std::max_element(p, p + width);
    T total{0};
    for (std::size_t i = 0; i < width; ++i) {
      q[i] = std::exp(p[i] - mx);
      total += q[i];
    }
    for (std::size_t i = 0; i < width; ++i) q[i] /= total;
  }
  return make_op<T>(std::move(out), {x}, "softmax",
                    [rows, width](const Tensor<T>& g, const Tensor<T>& y, GradIn<T> gi) {
                      if (!gi[0]) return;
                      for (std::size_t r = 0; r < rows; ++r) {
                        const T* yp = y.ptr() + r * width;
                        const T* gp = g.ptr() + r * width;
                        T dot{0};
                        for (std::size_t i = 0; i < width; ++i) dot += gp[i] * yp[i];
                        T* d = gi[0]->ptr() + r * width;
                        for (std::size_t i = 0; i < width; ++i) d[i] += yp[i] * (gp[i] - dot);
                      }
                    });
}

// ------------------------------------------------------------------ linear

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (ws.size() != 2 || ws[1] != xs.back()) {
    throw DimensionError("linear: input " + to_string(xs) + " incompatible with weights " + to_string(ws));
  }
  const std::size_t in = ws[1], outf = ws[0];
  check_bias(bias ? &bias.shape() : nullptr, outf, "linear");
  const std::size_t rows = x.size() / in;
  Shape out_shape = xs;
  out_shape.back() = outf;
  Tensor<T> out(out_shape);
  kp::gemm<T>(false, true, rows, outf, in, T{1}, x.value().ptr(), w.value().ptr(), T{0}, out.ptr());
  if (bias) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < outf; ++o) out[r * outf + o] += bias.value()[o];
    }
  }
  return make_op<T>(std::move(out), {x, w, bias}, "linear",
                    [x, w, rows, in, outf](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      if (gi[0]) kp::gemm<T>(false, false, rows, in, outf, T{1}, g.ptr(), w.value().ptr(), T{1}, gi[0]->ptr());
                      if (gi[1]) kp::gemm<T>(true, false, outf, in, rows, T{1}, g.ptr(), x.value().ptr(), T{1}, gi[1]->ptr());
                      if (gi[2]) {
                        T* db = gi[2]->ptr();
                        for (std::size_t r = 0; r < rows; ++r) {
                          for (std::size_t o = 0; o < outf; ++o) db[o] += g[r * outf + o];
                        }
                      }
                    });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool transpose_b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() != bs.size() || (as.size() != 2 && as.size() != 3)) {
    throw DimensionError("matmul: operands " + to_string(as) + " and " + to_string(bs) + " must both be rank 2 or 3");
  }
  const bool batched = as.size() == 3;
  const std::size_t nb = batched ? as[0] : 1;
  if (batched && bs[0] != nb) {
    throw DimensionError("matmul: batch sizes differ, " + to_string(as) + " vs " + to_string(bs));
  }
  const std::size_t m = as[as.size() - 2], k = as.back();
  const std::size_t bk = transpose_b ? bs.back() : bs[bs.size() - 2];
  const std::size_t n = transpose_b ? bs[bs.size() - 2] : bs.back();
  if (bk != k) {
    throw DimensionError("matmul: inner dimensions differ, " + to_string(as) + " vs " + to_string(bs) +
                         (transpose_b ? " (transposed)" : ""));
  }
  Shape out_shape = batched ? Shape{nb, m, n} : Shape{m, n};
  Tensor<T> out(out_shape);
  for (std::size_t i = 0; i < nb; ++i) {
    kp::gemm<T>(false, transpose_b, m, n, k, T{1}, a.value().ptr() + i * m * k, b.value().ptr() + i * k * n, T{0},
                out.ptr() + i * m * n);
  }
  return make_op<T>(std::move(out), {a, b}, "matmul",
                    [a, b, nb, m, n, k, transpose_b](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      for (std::size_t i = 0; i < nb; ++i) {
                        const T* gp = g.ptr() + i * m * n;
                        const T* ap = a.value().ptr() + i * m * k;
                        const T* bp = b.value().ptr() + i * k * n;
                        if (gi[0]) {
                          kp::gemm<T>(false, !transpose_b, m, k, n, T{1}, gp, bp, T{1}, gi[0]->ptr() + i * m * k);
                        }
                        if (gi[1]) {
                          if (transpose_b) {
                            kp::gemm<T>(true, false, n, k, m, T{1}, gp, ap, T{1}, gi[1]->ptr() + i * k * n);
                          } else {
                            kp::gemm<T>(true, false, k, n, m, T{1}, ap, gp, T{1}, gi[1]->ptr() + i * k * n);
                          }
                        }
                      }
                    });
}

// -------------------------------------------------------------- resampling

template <typename T>
Var<T> adaptive_avg_pool1d(const Var<T>& x, std::size_t out_len) {
  if (out_len == 0) throw ConfigError("adaptive_avg_pool1d: output length must be >= 1");
  const std::size_t len = x.shape().back();
  const std::size_t rows = x.size() / len;
  Shape out_shape = x.shape();
  out_shape.back() = out_len;
  std::vector<std::size_t> lo(out_len), hi(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    lo[i] = (i * len) / out_len;
    hi[i] = ((i + 1) * len + out_len - 1) / out_len;
  }
  Tensor<T> out(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = x.value().ptr() + r * len;
    for (std::size_t i = 0; i < out_len; ++i) {
      T acc{0};
      for (std::size_t j = lo[i]; j < hi[i]; ++j) acc += p[j];
      out[r * out_len + i] = acc / static_cast<T>(hi[i] - lo[i]);
    }
  }
  return make_op<T>(std::move(out), {x}, "adaptive_avg_pool1d",
                    [rows, len, out_len, lo, hi](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      if (!gi[0]) return;
                      for (std::size_t r = 0; r < rows; ++r) {
                        T* d = gi[0]->ptr() + r * len;
                        for (std::size_t i = 0; i < out_len; ++i) {
                          const T v = g[r * out_len + i] / static_cast<T>(hi[i] - lo[i]);
                          for (std::size_t j = lo[i]; j < hi[i]; ++j) d[j] += v;
                        }
                      }
                    });
}

template <typename T>
Var<T> interpolate_nearest(const Var<T>& x, std::size_t out_len) {
  if (out_len == 0) throw ConfigError("interpolate_nearest: output length must be >= 1");
  const std::size_t len = x.shape().back();
  const std::size_t rows = x.size() / len;
  Shape out_shape = x.shape();
  out_shape.back() = out_len;
  Tensor<T> out(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = x.value().ptr() + r * len;
    for (std::size_t i = 0; i < out_len; ++i) out[r * out_len + i] = p[(i * len) / out_len];
  }
  return make_op<T>(std::move(out), {x}, "interpolate_nearest",
                    [rows, len, out_len](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      if (!gi[0]) return;
                      for (std::size_t r = 0; r < rows; ++r) {
                        T* d = gi[0]->ptr() + r * len;
                        for (std::size_t i = 0; i < out_len; ++i) d[(i * len) / out_len] += g[r * out_len + i];
                      }
                    });
}

template <typename T>
Var<T> dropout(const Var<T>& x, T p, bool training, std::mt19937_64* rng) {
  if (p < T{0} || p >= T{1}) throw ConfigError("dropout: rate must lie in [0, 1)");
  if (!training || p == T{0}) return x;
  if (!rng) throw ConfigError("dropout: training mode needs a random generator");
  const T keep_scale = T{1} / (T{1} - p);
  Tensor<T> mask(x.shape());
  for (auto& m : mask.data()) m = uniform01<T>(*rng) >= p ? keep_scale : T{0};
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * mask[i];
  return make_op<T>(std::move(out), {x}, "dropout", [mask](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
    if (!gi[0]) return;
    T* d = gi[0]->ptr();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * mask[i];
  });
}

#define RSSNET_INSTANTIATE_OPS(T)                                                                      \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                  \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                  \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                  \
  template Var<T> scale(const Var<T>&, T);                                                            \
  template Var<T> add_scalar(const Var<T>&, T);                                                       \
  template Var<T> sum(const Var<T>&);                                                                 \
  template Var<T> mean(const Var<T>&);                                                                \
  template Var<T> reshape(const Var<T>&, Shape);                                                      \
  template Var<T> permute(const Var<T>&, const std::vector<std::size_t>&);                            \
  template Var<T> narrow(const Var<T>&, std::size_t, std::size_t, std::size_t);                       \
  template Var<T> index_select(const Var<T>&, const std::vector<std::size_t>&);                       \
  template Var<T> conv1d(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t, std::size_t);      \
  template Var<T> conv_transpose1d(const Var<T>&, const Var<T>&, std::size_t, std::size_t);           \
  template Var<T> depthwise_conv1d(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t,          \
                                   std::size_t);                                                      \
  template Var<T> depthwise_conv2d(const Var<T>&, const Var<T>&, const Var<T>&);                      \
  template Var<T> pointwise_conv(const Var<T>&, const Var<T>&, const Var<T>&);                        \
  template Var<T> global_layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                  \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                         \
  template Var<T> prelu(const Var<T>&, const Var<T>&);                                                \
  template Var<T> relu(const Var<T>&);                                                                \
  template Var<T> sigmoid(const Var<T>&);                                                             \
  template Var<T> softmax(const Var<T>&);                                                             \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                                \
  template Var<T> matmul(const Var<T>&, const Var<T>&, bool);                                         \
  template Var<T> adaptive_avg_pool1d(const Var<T>&, std::size_t);                                    \
  template Var<T> interpolate_nearest(const Var<T>&, std::size_t);                                    \
  template Var<T> dropout(const Var<T>&, T, bool, std::mt19937_64*);

RSSNET_INSTANTIATE_OPS(float)
RSSNET_INSTANTIATE_OPS(double)

}  // namespace rssnet
