// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "rssnet/model/rssnet.hpp"
#include "rssnet/tensor/grad_check.hpp"
#include "test_util.hpp"

using namespace rssnet;
using namespace rssnet::model;
using rssnet::testing::max_abs_diff;
using rssnet::testing::random_tensor;

namespace {

RssNetConfig tiny_config() {
  RssNetConfig c;
  c.N = 8;
  c.L = 32;
  c.K = 8;
  c.iter = 2;
  c.S = 2;
  c.heads = 2;
  c.d_model = 8;
  c.ffn_dim = 16;
  c.dropout = 0.0;
  return c;
}

// Parameter total written out term by term from the architecture, without
// going through parameter_layout.
std::size_t closed_form_count(const RssNetConfig& c) {
  const std::size_t n = c.N, k = c.enc_kernel, d = c.d_model, f = c.ffn_dim, s = c.S;
  const std::size_t encoder = n * k + n + 2 * n + n;
  const std::size_t tda = s * (n * 5 + n + 2 * n)       // down-sampling convs + GLN
                          + (n * d + d) + 2 * d          // in-projection, LN
                          + 4 * (d * d + d) + 2 * d      // q, k, v, o, LN
                          + (d * f + f) + (f * d + d)    // FFN
                          + (d * n + n)                  // out-projection
                          + s * 2 * (n * n + n);         // LA rho and b
  const std::size_t dk = c.dwconv_kernel;
  const std::size_t path = c.dwconv_path == DwconvPath::kNone ? 0 : n * dk * dk + n;
  const std::size_t blocks = c.weight_sharing ? 1 : c.iter;
  const std::size_t fusions = c.iter < 2 ? 0 : (c.weight_sharing ? 1 : c.iter - 1);
  const std::size_t mask = n + c.C * n * n + c.C * n;
  const std::size_t decoder = n * k;
  return encoder + blocks * (2 * tda + path) + fusions * (n * n + n) + mask + decoder;
}

void zero_prefix(ParamStore<double>& p, const std::string& prefix) {
  for (auto& [name, v] : p.entries()) {
    if (name.rfind(prefix, 0) == 0) v.mutable_value().fill(0.0);
  }
}

Var<double> weighted_sum(const Var<double>& y, std::uint64_t seed) {
  return sum(mul(y, Var<double>::constant(random_tensor(y.shape(), seed))));
}

}  // namespace

TEST_CASE("config validation") {
  RssNetConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.encoded_length() == 1024);
  auto bad = c;
  bad.K = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.heads = 7;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.dwconv_kernel = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.iter = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.S = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config JSON round trip and hash") {
  RssNetConfig c = tiny_config();
  c.dwconv_path = DwconvPath::kP2;
  const RssNetConfig back = config_from_json(to_json(c));
  CHECK(back == c);
  CHECK(config_hash(back) == config_hash(c));
  RssNetConfig other = c;
  other.N = 16;
  CHECK(config_hash(other) != config_hash(c));
  CHECK_THROWS_AS(config_from_json(R"({"version": 1, "bogus": 3})"), ConfigError);
}

TEST_CASE("encode: shape, zero input, and length contract") {
  RssNetConfig c;
  auto p = init_params<float>(c, 1);
  auto h = encode(Var<float>::constant(random_tensor<float>({1, 1024}, 2)), p, c);
  CHECK(h.shape() == Shape{1, 256, 1024});

  RssNetConfig s = tiny_config();
  auto ps = init_params<double>(s, 3);
  // Non-trivial GLN bias so the constant is not just zero.
  ps.get("encoder.gln.bias").mutable_value() = random_tensor({s.N}, 4);
  auto z = encode(Var<double>::constant(Tensor<double>({2, s.L})), ps, s).value();
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t ch = 0; ch < s.N; ++ch) {
      const double* row = z.ptr() + (b * s.N + ch) * s.L;
      for (std::size_t l = 1; l < s.L; ++l) CHECK(row[l] == row[0]);
    }
  }
  CHECK_THROWS_AS(encode(Var<double>::constant(Tensor<double>({1, s.L + 1})), ps, s), DimensionError);
}

TEST_CASE("encode gradient at N=4, L=16") {
  RssNetConfig c = tiny_config();
  c.N = 4;
  c.L = 16;
  c.K = 4;
  auto p = init_params<double>(c, 5);
  auto y = Var<double>::leaf(random_tensor({2, c.L}, 6), true);
  std::vector<Var<double>> leaves{y, p.get("encoder.conv.weight"), p.get("encoder.conv.bias"),
                                  p.get("encoder.gln.gain"), p.get("encoder.gln.bias"), p.get("encoder.prelu.slope")};
  const auto r = grad_check_leaves([&] { return weighted_sum(encode(y, p, c), 7); }, leaves, 1e-5);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("chunk geometry") {
  const auto g = chunk_geometry(1024, 45);
  CHECK(g.stride == 22);
  CHECK(g.T == 46);
  CHECK(g.pad_len == 11);
  const auto single = chunk_geometry(45, 45);
  CHECK(single.T == 1);
  CHECK(single.pad_len == 0);
  CHECK_THROWS_AS(chunk_geometry(10, 1), ConfigError);
  CHECK_THROWS_AS(chunk_geometry(10, 11), ConfigError);

  // The windows cover [0, len + pad) exactly and the last one is needed.
  for (std::size_t K = 2; K <= 64; ++K) {
    for (std::size_t len = K; len <= 300; ++len) {
      const auto i = chunk_geometry(len, K);
      REQUIRE(i.pad_len < K);
      REQUIRE((i.T - 1) * i.stride + K == len + i.pad_len);
      if (i.T > 1) REQUIRE((i.T - 2) * i.stride + K < len);
    }
  }
}

TEST_CASE("chunk / overlap_add round trip") {
  SUBCASE("random 8x100, K=10") {
    auto h = Var<float>::constant(random_tensor<float>({1, 8, 100}, 11));
    auto back = overlap_add(chunk(h, 10));
    CHECK(max_abs_diff(back.value(), h.value()) < 1e-6);
  }
  SUBCASE("single chunk is the identity") {
    auto h = Var<float>::constant(random_tensor<float>({2, 3, 9}, 12));
    auto ch = chunk(h, 9);
    CHECK(ch.info.T == 1);
    CHECK(max_abs_diff(overlap_add(ch).value(), h.value()) == 0.0);
  }
  SUBCASE("sampled K and lengths") {
    std::mt19937_64 rng(13);
    for (std::size_t K = 2; K <= 64; ++K) {
      std::uniform_int_distribution<std::size_t> len_dist(K, 2048);
      for (std::size_t len : {K, K + 1, std::size_t{2048}, len_dist(rng), len_dist(rng)}) {
        auto h = Var<float>::constant(random_tensor<float>({1, 2, len}, K * 4096 + len));
        auto back = overlap_add(chunk(h, K));
        REQUIRE(max_abs_diff(back.value(), h.value()) < 1e-6);
      }
    }
  }
  SUBCASE("inconsistent metadata") {
    auto ch = chunk(Var<float>::constant(random_tensor<float>({1, 2, 20}, 14)), 6);
    ch.info.pad_len += 1;
    CHECK_THROWS_AS(overlap_add(ch), InvariantError);
  }
}

TEST_CASE("tda_forward: shape, length floor, attention rows") {
  RssNetConfig c = tiny_config();
  c.S = 3;
  c.L = 64;
  auto p = init_params<double>(c, 21);
  std::vector<Tensor<double>> attn;
  ForwardOptions opt;
  opt.attention = &attn;
  auto x = Var<double>::constant(random_tensor({3, c.N, 64}, 22));
  auto y = tda_forward(x, p, "block.intra", c, opt);
  CHECK(y.shape() == x.shape());
  REQUIRE(attn.size() == 1);
  const auto& a = attn[0];
  const std::size_t len = a.shape()[2];
  CHECK(len == 8);
  for (std::size_t r = 0; r < a.size() / len; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < len; ++j) s += a[r * len + j];
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
  auto short_x = Var<double>::constant(random_tensor({1, c.N, 7}, 23));
  CHECK_THROWS_AS(tda_forward(short_x, p, "block.intra", c, opt), ConfigError);
}

TEST_CASE("tda_forward gradient at N=8, len=16, S=2") {
  RssNetConfig c = tiny_config();
  auto p = init_params<double>(c, 31);
  auto x = Var<double>::leaf(random_tensor({2, c.N, 16}, 32), true);
  std::vector<Var<double>> leaves{x};
  for (auto& [name, v] : p.entries()) {
    if (name.rfind("block.intra", 0) == 0) leaves.push_back(v);
  }
  const auto r = grad_check_leaves([&] { return weighted_sum(tda_forward(x, p, "block.intra", c, {}), 33); },
                                   leaves, 1e-5);
  INFO("worst tensor " << r.worst_tensor << " coord " << r.worst_coord);
  CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("rssnet_block preserves shape for every path variant") {
  for (auto path : {DwconvPath::kNone, DwconvPath::kP1, DwconvPath::kP2, DwconvPath::kP3}) {
    RssNetConfig c = tiny_config();
    c.dwconv_path = path;
    c.dwconv_kernel = 3;
    auto p = init_params<float>(c, 41);
    auto H = Var<float>::constant(random_tensor<float>({2, c.N, c.K, 7}, 42));
    CHECK(rssnet_block(H, p, "block", c, {}).shape() == H.shape());
    CHECK(unroll(H, p, c, {}).shape() == H.shape());
  }
}

TEST_CASE("block with zeroed TDA modules and no path reduces to the identity") {
  RssNetConfig c = tiny_config();
  c.dwconv_path = DwconvPath::kNone;
  auto p = init_params<double>(c, 51);
  zero_prefix(p, "block.intra");
  zero_prefix(p, "block.inter");
  auto H = Var<double>::constant(random_tensor({2, c.N, c.K, 7}, 52));
  CHECK(max_abs_diff(rssnet_block(H, p, "block", c, {}).value(), H.value()) == 0.0);
}

TEST_CASE("unroll: iter=1 is one block without fusion") {
  RssNetConfig c = tiny_config();
  c.iter = 1;
  auto p = init_params<double>(c, 61);
  CHECK_FALSE(p.contains("fusion.weight"));
  auto H = Var<double>::constant(random_tensor({1, c.N, c.K, 7}, 62));
  const auto once = rssnet_block(H, p, "block", c, {});
  CHECK(max_abs_diff(unroll(H, p, c, {}).value(), once.value()) == 0.0);
}

TEST_CASE("unroll: two iterations follow the fusion recurrence") {
  RssNetConfig c = tiny_config();
  auto p = init_params<double>(c, 63);
  auto H = Var<double>::constant(random_tensor({1, c.N, c.K, 7}, 64));
  const auto r1 = rssnet_block(H, p, "block", c, {});
  // 1x1 fusion written out: R2[o] = sum_i w[o,i] (R1 + H)[i] + b[o].
  const auto& w = p.get("fusion.weight").value();
  const auto& b = p.get("fusion.bias").value();
  Tensor<double> r2(H.shape());
  const std::size_t pos = c.K * 7;
  for (std::size_t o = 0; o < c.N; ++o) {
    for (std::size_t q = 0; q < pos; ++q) {
      double acc = b[o];
      for (std::size_t i = 0; i < c.N; ++i) acc += w[o * c.N + i] * (r1.value()[i * pos + q] + H.value()[i * pos + q]);
      r2[o * pos + q] = acc;
    }
  }
  const auto expected = rssnet_block(Var<double>::constant(r2), p, "block", c, {});
  CHECK(max_abs_diff(unroll(H, p, c, {}).value(), expected.value()) < 1e-12);
}

TEST_CASE("mask_and_decode") {
  RssNetConfig c = tiny_config();
  auto p = init_params<double>(c, 71);
  auto h = Var<double>::constant(random_tensor({2, c.N, c.L}, 72));
  auto R = Var<double>::constant(random_tensor({2, c.N, c.L}, 73));

  SUBCASE("two outputs of length L") {
    CHECK(mask_and_decode(R, h, p, c).shape() == Shape{2, 2, c.L});
  }
  SUBCASE("zero masks annihilate the output") {
    zero_prefix(p, "mask.conv");
    const auto s = mask_and_decode(R, h, p, c).value();
    for (double v : s.data()) CHECK(v == 0.0);
  }
  SUBCASE("mask parameters receive gradient") {
    backward(weighted_sum(mask_and_decode(R, h, p, c), 74));
    for (const char* name : {"mask.conv.weight", "mask.conv.bias", "mask.prelu.slope", "decoder.weight"}) {
      double norm = 0.0;
      for (double g : p.get(name).grad().data()) norm += g * g;
      INFO(name);
      CHECK(norm > 0.0);
    }
  }
  SUBCASE("C mismatch") {
    RssNetConfig three = c;
    three.C = 3;
    CHECK_THROWS_AS(mask_and_decode(R, h, p, three), ConfigError);
  }
}

TEST_CASE("forward: shape and eval determinism") {
  RssNetConfig c = tiny_config();
  c.dropout = 0.1;
  auto p = init_params<float>(c, 81);
  auto y = Var<float>::constant(random_tensor<float>({3, c.L}, 82));
  const auto a = forward(y, p, c).value();
  const auto b = forward(y, p, c).value();
  CHECK(a.shape() == Shape{3, 2, c.L});
  CHECK(a.storage() == b.storage());

  std::mt19937_64 r1(5), r2(5);
  ForwardOptions t1{true, &r1}, t2{true, &r2};
  CHECK(forward(y, p, c, t1).value().storage() == forward(y, p, c, t2).value().storage());
  CHECK(forward(y, p, c, t1).value().storage() != a.storage());
}

TEST_CASE("end-to-end gradient on the tiny model") {
  RssNetConfig c = tiny_config();
  auto p = init_params<double>(c, 91);
  auto y = Var<double>::leaf(random_tensor({2, c.L}, 92), true);
  std::vector<Var<double>> leaves{y};
  for (auto& [_, v] : p.entries()) leaves.push_back(v);
  GradCheckOptions opt;
  opt.max_coords = 24;
  opt.seed = 93;
  const auto r = grad_check_leaves([&] { return weighted_sum(forward(y, p, c), 94); }, leaves, 1e-5, opt);
  INFO("worst tensor " << r.worst_tensor << " coord " << r.worst_coord << " analytic " << r.worst_analytic
                       << " numeric " << r.worst_numeric);
  CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("parameter counts") {
  SUBCASE("reference configuration") {
    const RssNetConfig ref;
    CHECK(count_params(ref) == 5733888);
    CHECK(count_params(ref) == closed_form_count(ref));
    const double rel = std::abs(static_cast<double>(count_params(ref)) - 5.25e6) / 5.25e6;
    CHECK(rel <= 0.15);
  }
  SUBCASE("layout agrees with the closed form across configs") {
    for (std::size_t n : {8, 32, 64}) {
      for (std::size_t iter : {1, 2, 5}) {
        for (bool share : {true, false}) {
          for (auto path : {DwconvPath::kNone, DwconvPath::kP1, DwconvPath::kP3}) {
            RssNetConfig c = tiny_config();
            c.N = n;
            c.iter = iter;
            c.weight_sharing = share;
            c.dwconv_path = path;
            c.dwconv_kernel = 3;
            REQUIRE(count_params(c) == closed_form_count(c));
            REQUIRE(init_params<float>(c, 1).count() == count_params(c));
          }
        }
      }
    }
  }
  SUBCASE("sharing makes the count independent of iter") {
    RssNetConfig c = tiny_config();
    c.iter = 2;
    const auto base = count_params(c);
    for (std::size_t iter : {3, 6, 12}) {
      c.iter = iter;
      CHECK(count_params(c) == base);
    }
  }
  SUBCASE("doubling N quadruples the channel-mixing convolutions") {
    auto mixing = [](const RssNetConfig& c) {
      std::size_t total = 0;
      for (const auto& s : parameter_layout(c)) {
        const auto& nm = s.name;
        const bool mix = nm.find(".rho.weight") != std::string::npos || nm.find(".b.weight") != std::string::npos ||
                         nm == "fusion.weight" || nm == "mask.conv.weight";
        if (mix) total += numel(s.shape);
      }
      return total;
    };
    RssNetConfig c;
    RssNetConfig d = c;
    d.N = 2 * c.N;
    CHECK(static_cast<double>(mixing(d)) / static_cast<double>(mixing(c)) == doctest::Approx(4.0));
    CHECK(static_cast<double>(count_params(d)) / static_cast<double>(count_params(c)) > 1.5);
  }
  SUBCASE("single 3x3 kernel plus bias") {
    ParamStore<float> s;
    s.add("conv.weight", Tensor<float>({1, 3, 3}));
    s.add("conv.bias", Tensor<float>({1}));
    CHECK(count_params(s) == 10);
  }
}

TEST_CASE("init is deterministic and layout-checked") {
  RssNetConfig c = tiny_config();
  auto a = init_params<float>(c, 7);
  auto b = init_params<float>(c, 7);
  auto d = init_params<float>(c, 8);
  CHECK(a.get("mask.conv.weight").value().storage() == b.get("mask.conv.weight").value().storage());
  CHECK(a.get("mask.conv.weight").value().storage() != d.get("mask.conv.weight").value().storage());
  CHECK_NOTHROW(check_layout(c, a));
  RssNetConfig other = c;
  other.N = 16;
  CHECK_THROWS_AS(check_layout(other, a), CompatibilityError);
}
