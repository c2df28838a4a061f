// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Single-threaded reference kernels.

#include <vector>

#include "kernel_ranges.hpp"
#include "rssnet/tensor/kernels.hpp"

namespace rssnet::kernels::serial {

using detail::tap_range;

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, const T* b, T beta, T* c) {
  std::vector<T> sa, sb;
  const T* ap = detail::packed(trans_a, a, m, k, sa);
  const T* bp = detail::packed(trans_b, b, k, n, sb);
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = beta == T{0} ? T{0} : beta * crow[j];
    for (std::size_t p = 0; p < k; ++p) {
      const T av = alpha * ap[i * k + p];
      const T* brow = bp + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void conv1d_forward(const Conv1dDims& d, const T* x, const T* w, const T* bias, T* y) {
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t co = 0; co < d.out_channels; ++co) {
      T* yrow = y + (b * d.out_channels + co) * d.out_len;
      const T init = bias ? bias[co] : T{0};
      for (std::size_t l = 0; l < d.out_len; ++l) yrow[l] = init;
      for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
        const T* xrow = x + (b * d.in_channels + ci) * d.in_len;
        const T* wrow = w + (co * d.in_channels + ci) * d.kernel;
        for (std::size_t j = 0; j < d.kernel; ++j) {
          const auto r = tap_range(j, d.stride, d.padding, d.in_len, d.out_len);
          const T wv = wrow[j];
          for (std::size_t l = r.lo; l < r.hi; ++l) yrow[l] += wv * xrow[l * d.stride + j - d.padding];
        }
      }
    }
  }
}

template <typename T>
void conv1d_backward_input(const Conv1dDims& d, const T* dy, const T* w, T* dx) {
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
      T* dxrow = dx + (b * d.in_channels + ci) * d.in_len;
      for (std::size_t co = 0; co < d.out_channels; ++co) {
        const T* dyrow = dy + (b * d.out_channels + co) * d.out_len;
        const T* wrow = w + (co * d.in_channels + ci) * d.kernel;
        for (std::size_t j = 0; j < d.kernel; ++j) {
          const auto r = tap_range(j, d.stride, d.padding, d.in_len, d.out_len);
          const T wv = wrow[j];
          for (std::size_t l = r.lo; l < r.hi; ++l) dxrow[l * d.stride + j - d.padding] += wv * dyrow[l];
        }
      }
    }
  }
}

template <typename T>
void conv1d_backward_weight(const Conv1dDims& d, const T* dy, const T* x, T* dw) {
  for (std::size_t co = 0; co < d.out_channels; ++co) {
    for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
      T* dwrow = dw + (co * d.in_channels + ci) * d.kernel;
      for (std::size_t j = 0; j < d.kernel; ++j) {
        const auto r = tap_range(j, d.stride, d.padding, d.in_len, d.out_len);
        T acc{0};
        for (std::size_t b = 0; b < d.batch; ++b) {
          const T* dyrow = dy + (b * d.out_channels + co) * d.out_len;
          const T* xrow = x + (b * d.in_channels + ci) * d.in_len;
          for (std::size_t l = r.lo; l < r.hi; ++l) acc += dyrow[l] * xrow[l * d.stride + j - d.padding];
        }
        dwrow[j] += acc;
      }
    }
  }
}

template <typename T>
void depthwise_forward(const DepthwiseDims& d, const T* x, const T* w, const T* bias, T* y) {
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t c = 0; c < d.channels; ++c) {
      const T* xrow = x + (b * d.channels + c) * d.in_len;
      T* yrow = y + (b * d.channels + c) * d.out_len;
      const T init = bias ? bias[c] : T{0};
      for (std::size_t l = 0; l < d.out_len; ++l) yrow[l] = init;
      for (std::size_t j = 0; j < d.kernel; ++j) {
        const auto r = tap_range(j, d.stride, d.padding, d.in_len, d.out_len);
        const T wv = w[c * d.kernel + j];
        for (std::size_t l = r.lo; l < r.hi; ++l) yrow[l] += wv * xrow[l * d.stride + j - d.padding];
      }
    }
  }
}

template <typename T>
void depthwise_backward_input(const DepthwiseDims& d, const T* dy, const T* w, T* dx) {
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t c = 0; c < d.channels; ++c) {
      const T* dyrow = dy + (b * d.channels + c) * d.out_len;
      T* dxrow = dx + (b * d.channels + c) * d.in_len;
      for (std::size_t j = 0; j < d.kernel; ++j) {
        const auto r = tap_range(j, d.stride, d.padding, d.in_len, d.out_len);
        const T wv = w[c * d.kernel + j];
        for (std::size_t l = r.lo; l < r.hi; ++l) dxrow[l * d.stride + j - d.padding] += wv * dyrow[l];
      }
    }
  }
}

template <typename T>
void depthwise_backward_weight(const DepthwiseDims& d, const T* dy, const T* x, T* dw) {
  for (std::size_t c = 0; c < d.channels; ++c) {
    for (std::size_t j = 0; j < d.kernel; ++j) {
      const auto r = tap_range(j, d.stride, d.padding, d.in_len, d.out_len);
      T acc{0};
      for (std::size_t b = 0; b < d.batch; ++b) {
        const T* dyrow = dy + (b * d.channels + c) * d.out_len;
        const T* xrow = x + (b * d.channels + c) * d.in_len;
        for (std::size_t l = r.lo; l < r.hi; ++l) acc += dyrow[l] * xrow[l * d.stride + j - d.padding];
      }
      dw[c * d.kernel + j] += acc;
    }
  }
}

template <typename T>
void depthwise2d_forward(const Depthwise2dDims& d, const T* x, const T* w, const T* bias, T* y) {
  const std::size_t ph = d.kh / 2, pw = d.kw / 2;
  const std::size_t plane = d.height * d.width;
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t c = 0; c < d.channels; ++c) {
      const T* xp = x + (b * d.channels + c) * plane;
      T* yp = y + (b * d.channels + c) * plane;
      const T* wp = w + c * d.kh * d.kw;
      const T init = bias ? bias[c] : T{0};
      for (std::size_t i = 0; i < plane; ++i) yp[i] = init;
      for (std::size_t u = 0; u < d.kh; ++u) {
        const auto rh = tap_range(u, 1, ph, d.height, d.height);
        for (std::size_t v = 0; v < d.kw; ++v) {
          const auto rw = tap_range(v, 1, pw, d.width, d.width);
          const T wv = wp[u * d.kw + v];
          for (std::size_t h = rh.lo; h < rh.hi; ++h) {
            const T* xr = xp + (h + u - ph) * d.width;
            T* yr = yp + h * d.width;
            for (std::size_t q = rw.lo; q < rw.hi; ++q) yr[q] += wv * xr[q + v - pw];
          }
        }
      }
    }
  }
}

template <typename T>
void depthwise2d_backward_input(const Depthwise2dDims& d, const T* dy, const T* w, T* dx) {
  const std::size_t ph = d.kh / 2, pw = d.kw / 2;
  const std::size_t plane = d.height * d.width;
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t c = 0; c < d.channels; ++c) {
      const T* dyp = dy + (b * d.channels + c) * plane;
      T* dxp = dx + (b * d.channels + c) * plane;
      const T* wp = w + c * d.kh * d.kw;
      for (std::size_t u = 0; u < d.kh; ++u) {
        const auto rh = tap_range(u, 1, ph, d.height, d.height);
        for (std::size_t v = 0; v < d.kw; ++v) {
          const auto rw = tap_range(v, 1, pw, d.width, d.width);
          const T wv = wp[u * d.kw + v];
          for (std::size_t h = rh.lo; h < rh.hi; ++h) {
            T* xr = dxp + (h + u - ph) * d.width;
            const T* yr = dyp + h * d.width;
            for (std::size_t q = rw.lo; q < rw.hi; ++q) xr[q + v - pw] += wv * yr[q];
          }
        }
      }
    }
  }
}

template <typename T>
void depthwise2d_backward_weight(const Depthwise2dDims& d, const T* dy, const T* x, T* dw) {
  const std::size_t ph = d.kh / 2, pw = d.kw / 2;
  const std::size_t plane = d.height * d.width;
  for (std::size_t c = 0; c < d.channels; ++c) {
    for (std::size_t u = 0; u < d.kh; ++u) {
      const auto rh = tap_range(u, 1, ph, d.height, d.height);
      for (std::size_t v = 0; v < d.kw; ++v) {
        const auto rw = tap_range(v, 1, pw, d.width, d.width);
        T acc{0};
        for (std::size_t b = 0; b < d.batch; ++b) {
          const T* dyp = dy + (b * d.channels + c) * plane;
          const T* xp = x + (b * d.channels + c) * plane;
          for (std::size_t h = rh.lo; h < rh.hi; ++h) {
            const T* xr = xp + (h + u - ph) * d.width;
            const T* yr = dyp + h * d.width;
            for (std::size_t q = rw.lo; q < rw.hi; ++q) acc += yr[q] * xr[q + v - pw];
          }
        }
        dw[(c * d.kh + u) * d.kw + v] += acc;
      }
    }
  }
}

#define RSSNET_INSTANTIATE(T)                                                                       \
  template void gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t, T, const T*, const T*, \
                        T, T*);                                                                   \
  template void conv1d_forward<T>(const Conv1dDims&, const T*, const T*, const T*, T*);           \
  template void conv1d_backward_input<T>(const Conv1dDims&, const T*, const T*, T*);              \
  template void conv1d_backward_weight<T>(const Conv1dDims&, const T*, const T*, T*);             \
  template void depthwise_forward<T>(const DepthwiseDims&, const T*, const T*, const T*, T*);     \
  template void depthwise_backward_input<T>(const DepthwiseDims&, const T*, const T*, T*);        \
  template void depthwise_backward_weight<T>(const DepthwiseDims&, const T*, const T*, T*);       \
  template void depthwise2d_forward<T>(const Depthwise2dDims&, const T*, const T*, const T*, T*); \
  template void depthwise2d_backward_input<T>(const Depthwise2dDims&, const T*, const T*, T*);    \
  template void depthwise2d_backward_weight<T>(const Depthwise2dDims&, const T*, const T*, T*);

RSSNET_INSTANTIATE(float)
RSSNET_INSTANTIATE(double)

}  // namespace rssnet::kernels::serial
