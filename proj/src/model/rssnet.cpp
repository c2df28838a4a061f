// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/model/rssnet.hpp"

#include <cmath>

#include "rssnet/tensor/attention.hpp"

namespace rssnet::model {

namespace {

constexpr double kGlnEps = 1e-8;
constexpr double kLnEps = 1e-5;

template <typename T>
using GradIn = std::span<Tensor<T>* const>;

void expect_shape(const Shape& got, const Shape& want, const char* stage) {
  if (got != want) {
    throw InvariantError(std::string(stage) + ": shape drifted to " + rssnet::to_string(got) + ", expected " + rssnet::to_string(want));
  }
}

template <typename T>
Var<T> gln(const Var<T>& x, const ParamStore<T>& p, const std::string& name) {
  return global_layer_norm(x, p.get(name + ".gain"), p.get(name + ".bias"), static_cast<T>(kGlnEps));
}

template <typename T>
Var<T> ln(const Var<T>& x, const ParamStore<T>& p, const std::string& name) {
  return layer_norm(x, p.get(name + ".gain"), p.get(name + ".bias"), static_cast<T>(kLnEps));
}

template <typename T>
Var<T> dense(const Var<T>& x, const ParamStore<T>& p, const std::string& name) {
  return linear(x, p.get(name + ".weight"), p.get(name + ".bias"));
}

template <typename T>
Var<T> pointwise(const Var<T>& x, const ParamStore<T>& p, const std::string& name) {
  return pointwise_conv(x, p.get(name + ".weight"), p.get(name + ".bias"));
}

template <typename T>
Var<T> drop(const Var<T>& x, const RssNetConfig& c, const ForwardOptions& opt) {
  if (!opt.training || c.dropout == 0.0) return x;
  if (!opt.rng) throw ContractError("training forward with dropout needs a random generator");
  return dropout(x, static_cast<T>(c.dropout), true, opt.rng);
}

// [B, M, len] tiled B times along a new leading axis of a constant.
template <typename T>
Var<T> tiled_constant(const Tensor<T>& t, std::size_t batch) {
  Shape s{batch};
  s.insert(s.end(), t.shape().begin(), t.shape().end());
  Tensor<T> out(s);
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(t.ptr(), t.size(), out.ptr() + b * t.size());
  return Var<T>::constant(std::move(out));
}

// Global attention: G [B', N, Lc] -> [B', N, Lc].
template <typename T>
Var<T> global_attention(const Var<T>& G, const ParamStore<T>& p, const std::string& q, const RssNetConfig& c,
                        const ForwardOptions& opt) {
  const std::size_t batch = G.shape()[0], lc = G.shape()[2];
  auto z = dense(permute(G, {0, 2, 1}), p, q + ".in");
  z = add(z, tiled_constant(positional_encoding<T>(lc, c.d_model), batch));

  const std::string a = q + ".attn.";
  AttentionParams<T> ap{p.get(a + "q.weight"), p.get(a + "q.bias"), p.get(a + "k.weight"), p.get(a + "k.bias"),
                        p.get(a + "v.weight"), p.get(a + "v.bias"), p.get(a + "o.weight"), p.get(a + "o.bias")};
  Tensor<T> weights;
  auto att = multi_head_attention(ln(z, p, q + ".ln1"), ap, c.heads, opt.attention ? &weights : nullptr);
  if (opt.attention) opt.attention->push_back(weights.template cast<double>());
  z = add(z, drop(att, c, opt));

  auto f = relu(dense(ln(z, p, q + ".ln2"), p, q + ".ffn1"));
  f = dense(drop(f, c, opt), p, q + ".ffn2");
  z = add(z, drop(f, c, opt));
  return permute(dense(z, p, q + ".out"), {0, 2, 1});
}

}  // namespace

template <typename T>
Tensor<T> positional_encoding(std::size_t len, std::size_t width) {
  Tensor<T> pe(Shape{len, width});
  for (std::size_t pos = 0; pos < len; ++pos) {
    for (std::size_t i = 0; i < width; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
      const double angle = static_cast<double>(pos) * freq;
      pe[pos * width + i] = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

ChunkInfo chunk_geometry(std::size_t len, std::size_t K) {
  if (K < 2) throw ConfigError("chunk size K must be >= 2, got " + std::to_string(K));
  if (K > len) {
    throw ConfigError("chunk size K = " + std::to_string(K) + " exceeds the sequence length " + std::to_string(len));
  }
  ChunkInfo info;
  info.K = K;
  info.stride = K / 2;
  info.original_len = len;
  info.T = len == K ? 1 : (len - K + info.stride - 1) / info.stride + 1;
  info.pad_len = (info.T - 1) * info.stride + K - len;
  return info;
}

template <typename T>
Var<T> encode(const Var<T>& y, const ParamStore<T>& p, const RssNetConfig& c) {
  const Shape& ys = y.shape();
  if (ys.size() != 2 || ys[1] != c.L) {
    throw DimensionError("encode: expected spectra [B, " + std::to_string(c.L) + "], got " + rssnet::to_string(ys));
  }
  auto x = reshape(y, Shape{ys[0], 1, c.L});
  auto h = conv1d(x, p.get("encoder.conv.weight"), p.get("encoder.conv.bias"), c.enc_stride, c.enc_kernel / 2);
  h = gln(h, p, "encoder.gln");
  return prelu(h, p.get("encoder.prelu.slope"));
}

template <typename T>
ChunkTensor<T> chunk(const Var<T>& h, std::size_t K) {
  const Shape& hs = h.shape();
  if (hs.size() != 3) throw DimensionError("chunk: expected [B, N, L'], got " + rssnet::to_string(hs));
  const ChunkInfo info = chunk_geometry(hs[2], K);
  const std::size_t rows = hs[0] * hs[1], len = hs[2], nt = info.T, stride = info.stride;
  Tensor<T> out(Shape{hs[0], hs[1], K, nt});
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = h.value().ptr() + r * len;
    T* dst = out.ptr() + r * K * nt;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t t = 0; t < nt; ++t) {
        const std::size_t pos = t * stride + k;
        dst[k * nt + t] = pos < len ? src[pos] : T{0};
      }
    }
  }
  auto data = make_op<T>(std::move(out), {h}, "chunk", [rows, len, K, nt, stride](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
    if (!gi[0]) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* src = g.ptr() + r * K * nt;
      T* dst = gi[0]->ptr() + r * len;
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t t = 0; t < nt; ++t) {
          const std::size_t pos = t * stride + k;
          if (pos < len) dst[pos] += src[k * nt + t];
        }
      }
    }
  });
  return {data, info};
}

template <typename T>
Var<T> overlap_add(const ChunkTensor<T>& chunks) {
  const Shape& s = chunks.data.shape();
  const ChunkInfo& info = chunks.info;
  if (s.size() != 4 || s[2] != info.K || s[3] != info.T || info.stride != info.K / 2 ||
      (info.T - 1) * info.stride + info.K != info.original_len + info.pad_len || info.pad_len >= info.K) {
    throw InvariantError("overlap_add: chunk metadata (K=" + std::to_string(info.K) + ", T=" + std::to_string(info.T) +
                         ", pad=" + std::to_string(info.pad_len) + ") inconsistent with data " + rssnet::to_string(s));
  }
  const std::size_t rows = s[0] * s[1], len = info.original_len, K = info.K, nt = info.T, stride = info.stride;
  std::vector<T> inv_cover(len, T{0});
  for (std::size_t t = 0; t < nt; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      if (t * stride + k < len) inv_cover[t * stride + k] += T{1};
    }
  }
  for (auto& v : inv_cover) v = T{1} / v;
  Tensor<T> out(Shape{s[0], s[1], len});
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = chunks.data.value().ptr() + r * K * nt;
    T* dst = out.ptr() + r * len;
    for (std::size_t t = 0; t < nt; ++t) {
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t pos = t * stride + k;
        if (pos < len) dst[pos] += src[k * nt + t];
      }
    }
    for (std::size_t l = 0; l < len; ++l) dst[l] *= inv_cover[l];
  }
  return make_op<T>(std::move(out), {chunks.data}, "overlap_add",
                    [rows, len, K, nt, stride, inv_cover](const Tensor<T>& g, const Tensor<T>&, GradIn<T> gi) {
                      if (!gi[0]) return;
                      for (std::size_t r = 0; r < rows; ++r) {
                        const T* src = g.ptr() + r * len;
                        T* dst = gi[0]->ptr() + r * K * nt;
                        for (std::size_t k = 0; k < K; ++k) {
                          for (std::size_t t = 0; t < nt; ++t) {
                            const std::size_t pos = t * stride + k;
                            if (pos < len) dst[k * nt + t] += src[pos] * inv_cover[pos];
                          }
                        }
                      }
                    });
}

template <typename T>
Var<T> tda_forward(const Var<T>& x, const ParamStore<T>& p, const std::string& prefix, const RssNetConfig& c,
                   const ForwardOptions& opt) {
  const Shape xs = x.shape();
  if (xs.size() != 3 || xs[1] != c.N) {
    throw DimensionError("tda_forward: expected [B, " + std::to_string(c.N) + ", len], got " + rssnet::to_string(xs));
  }
  const std::size_t min_len = std::size_t{1} << c.S;
  if (xs[2] < min_len) {
    throw ConfigError("tda_forward: length " + std::to_string(xs[2]) + " is below the required minimum 2^S = " +
                      std::to_string(min_len));
  }
  // Bottom-up: F_0 = x, F_j halves the length of F_{j-1}.
  std::vector<Var<T>> F{x};
  for (std::size_t j = 1; j <= c.S; ++j) {
    const std::string q = prefix + ".down" + std::to_string(j);
    auto d = depthwise_conv1d(F.back(), p.get(q + ".weight"), p.get(q + ".bias"), 2, 2);
    F.push_back(gln(d, p, q + ".gln"));
  }
  const std::size_t coarse = F.back().shape()[2];
  Var<T> G = F.back();
  for (std::size_t j = 0; j < c.S; ++j) G = add(G, adaptive_avg_pool1d(F[j], coarse));
  const Var<T> g_hat = global_attention(G, p, prefix + ".ga", c, opt);

  std::vector<Var<T>> M(F.size());
  for (std::size_t j = 0; j <= c.S; ++j) M[j] = mul(F[j], interpolate_nearest(g_hat, F[j].shape()[2]));

  // Top-down restoration.
  Var<T> U = M[c.S];
  for (std::size_t j = c.S; j-- > 0;) {
    const std::string q = prefix + ".la" + std::to_string(j);
    auto up = interpolate_nearest(U, M[j].shape()[2]);
    auto rho = sigmoid(pointwise(up, p, q + ".rho"));
    auto b = pointwise(up, p, q + ".b");
    U = add(mul(rho, M[j]), b);
  }
  expect_shape(U.shape(), xs, "tda_forward");
  return U;
}

template <typename T>
Var<T> rssnet_block(const Var<T>& H, const ParamStore<T>& p, const std::string& prefix, const RssNetConfig& c,
                    const ForwardOptions& opt) {
  const Shape hs = H.shape();
  if (hs.size() != 4 || hs[1] != c.N) {
    throw DimensionError("rssnet_block: expected [B, " + std::to_string(c.N) + ", K, T], got " + rssnet::to_string(hs));
  }
  const std::size_t B = hs[0], N = hs[1], K = hs[2], nt = hs[3];
  auto path = [&](const Var<T>& v) {
    return depthwise_conv2d(v, p.get(prefix + ".path.weight"), p.get(prefix + ".path.bias"));
  };

  // Intra-chunk: sequences along K, one per (b, t).
  const Var<T> intra_in = c.dwconv_path == DwconvPath::kP3 ? path(H) : H;
  auto a = reshape(permute(intra_in, {0, 3, 1, 2}), Shape{B * nt, N, K});
  a = tda_forward(a, p, prefix + ".intra", c, opt);
  auto f1 = permute(reshape(a, Shape{B, nt, N, K}), {0, 2, 3, 1});
  const Var<T> bypass1 = c.dwconv_path == DwconvPath::kP1 ? path(H) : H;
  const Var<T> H2 = add(f1, bypass1);
  expect_shape(H2.shape(), hs, "rssnet_block (intra)");

  // Inter-chunk: sequences along T, one per (b, k).
  auto e = reshape(permute(H2, {0, 2, 1, 3}), Shape{B * K, N, nt});
  e = tda_forward(e, p, prefix + ".inter", c, opt);
  auto f2 = permute(reshape(e, Shape{B, K, N, nt}), {0, 2, 1, 3});
  const Var<T> bypass2 = c.dwconv_path == DwconvPath::kP2 ? path(H2) : H2;
  const Var<T> H4 = add(f2, bypass2);
  expect_shape(H4.shape(), hs, "rssnet_block (inter)");
  return H4;
}

template <typename T>
Var<T> unroll(const Var<T>& H, const ParamStore<T>& p, const RssNetConfig& c, const ForwardOptions& opt) {
  if (c.iter < 1) throw ConfigError("unroll: iter must be >= 1");
  Var<T> R = H;
  Var<T> R_out;
  for (std::size_t i = 0; i < c.iter; ++i) {
    R_out = rssnet_block(R, p, block_prefix(c, i), c, opt);
    if (i + 1 < c.iter) R = pointwise(add(R_out, H), p, fusion_prefix(c, i));
  }
  return R_out;
}

template <typename T>
Var<T> mask_and_decode(const Var<T>& R_hat, const Var<T>& h, const ParamStore<T>& p, const RssNetConfig& c) {
  const Shape& hs = h.shape();
  if (R_hat.shape() != hs || hs.size() != 3) {
    throw DimensionError("mask_and_decode: features " + rssnet::to_string(R_hat.shape()) + " and encoding " + rssnet::to_string(hs) +
                         " must match as [B, N, L']");
  }
  const Shape& ws = p.get("mask.conv.weight").shape();
  if (ws[0] != c.C * c.N) {
    throw ConfigError("mask_and_decode: mask net emits " + std::to_string(ws[0]) + " channels, C*N = " +
                      std::to_string(c.C * c.N));
  }
  const std::size_t B = hs[0], N = hs[1], lp = hs[2], C = c.C;
  auto masks = pointwise(prelu(R_hat, p.get("mask.prelu.slope")), p, "mask.conv");  // [B, C*N, L']
  masks = reshape(masks, Shape{B * C, N, lp});
  std::vector<std::size_t> rows(B * C);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i / C;
  auto h_rep = index_select(h, rows);  // [B*C, N, L']
  auto s = conv_transpose1d(mul(h_rep, masks), p.get("decoder.weight"), c.enc_stride, c.enc_kernel / 2);
  return reshape(s, Shape{B, C, c.L});
}

template <typename T>
Var<T> forward(const Var<T>& y, const ParamStore<T>& p, const RssNetConfig& c, const ForwardOptions& opt) {
  const Var<T> h = encode(y, p, c);
  const ChunkTensor<T> H = chunk(h, c.K);
  const Var<T> R = unroll(H.data, p, c, opt);
  const Var<T> R_hat = overlap_add(ChunkTensor<T>{R, H.info});
  return mask_and_decode(R_hat, h, p, c);
}

#define RSSNET_INSTANTIATE_MODEL(T)                                                                                 \
  template Tensor<T> positional_encoding<T>(std::size_t, std::size_t);                                             \
  template Var<T> encode(const Var<T>&, const ParamStore<T>&, const RssNetConfig&);                                \
  template ChunkTensor<T> chunk(const Var<T>&, std::size_t);                                                       \
  template Var<T> overlap_add(const ChunkTensor<T>&);                                                              \
  template Var<T> tda_forward(const Var<T>&, const ParamStore<T>&, const std::string&, const RssNetConfig&,         \
                              const ForwardOptions&);                                                              \
  template Var<T> rssnet_block(const Var<T>&, const ParamStore<T>&, const std::string&, const RssNetConfig&,        \
                               const ForwardOptions&);                                                             \
  template Var<T> unroll(const Var<T>&, const ParamStore<T>&, const RssNetConfig&, const ForwardOptions&);         \
  template Var<T> mask_and_decode(const Var<T>&, const Var<T>&, const ParamStore<T>&, const RssNetConfig&);        \
  template Var<T> forward(const Var<T>&, const ParamStore<T>&, const RssNetConfig&, const ForwardOptions&);

RSSNET_INSTANTIATE_MODEL(float)
RSSNET_INSTANTIATE_MODEL(double)

}  // namespace rssnet::model
