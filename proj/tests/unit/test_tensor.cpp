// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "rssnet/tensor/ops.hpp"
#include "test_util.hpp"

using namespace rssnet;
using rssnet::testing::random_tensor;

namespace {

using V = Var<double>;

V leaf(Shape s, std::vector<double> v, bool grad = true) { return V::leaf(Tensor<double>(std::move(s), std::move(v)), grad); }

// Direct-summation conv oracle for a single channel, written without the
// library's index helpers.
std::vector<double> naive_conv(const std::vector<double>& x, const std::vector<double>& k, int stride, int pad) {
  const int L = static_cast<int>(x.size()), K = static_cast<int>(k.size());
  const int out = (L + 2 * pad - K) / stride + 1;
  std::vector<double> y(out, 0.0);
  for (int o = 0; o < out; ++o) {
    for (int j = 0; j < K; ++j) {
      const int src = o * stride + j - pad;
      if (src >= 0 && src < L) y[o] += k[j] * x[src];
    }
  }
  return y;
}

double inner(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("tensor rejects zero dims and mismatched data") {
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 2}, std::vector<float>(3)), DimensionError);
  Tensor<float> t(Shape{2, 3});
  CHECK_THROWS_AS(t.reshape(Shape{4}), DimensionError);
  t.reshape(Shape{3, 2});
  CHECK(t.shape() == Shape{3, 2});
}

TEST_CASE("conv1d worked examples") {
  auto x = leaf({1, 3}, {1, 2, 3});
  auto ident = leaf({1, 1, 3}, {0, 1, 0});
  auto box = leaf({1, 1, 3}, {1, 1, 1});
  CHECK(conv1d(x, ident, V{}, 1, 1).value().storage() == std::vector<double>{1, 2, 3});
  const auto y = conv1d(x, box, V{}, 1, 1).value().storage();
  CHECK(y == naive_conv({1, 2, 3}, {1, 1, 1}, 1, 1));
  CHECK(y == std::vector<double>{3, 6, 5});
}

TEST_CASE("conv1d matches the direct-summation oracle across strides and padding") {
  for (int stride = 1; stride <= 3; ++stride) {
    for (int pad = 0; pad <= 2; ++pad) {
      const auto xt = random_tensor({1, 17}, 100 + stride * 10 + pad);
      const auto kt = random_tensor({1, 1, 4}, 200 + stride * 10 + pad);
      const auto got = conv1d(V::constant(xt), V::constant(kt), V{}, stride, pad).value();
      const auto want = naive_conv(xt.storage(), kt.storage(), stride, pad);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv1d reference feature shape") {
  auto x = V::constant(Tensor<double>(Shape{1, 1024}, 1.0));
  auto w = V::constant(Tensor<double>(Shape{256, 1, 3}, 0.1));
  CHECK(conv1d(x, w, V{}, 1, 1).shape() == Shape{256, 1024});
}

TEST_CASE("conv1d shape errors name both shapes") {
  auto x = V::constant(Tensor<double>(Shape{2, 8}));
  auto w = V::constant(Tensor<double>(Shape{4, 3, 3}));
  try {
    conv1d(x, w, V{}, 1, 1);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x8]") != std::string::npos);
    CHECK(msg.find("[4x3x3]") != std::string::npos);
  }
  auto tiny = V::constant(Tensor<double>(Shape{3, 2}));
  CHECK_THROWS_AS(conv1d(tiny, V::constant(Tensor<double>(Shape{1, 3, 5})), V{}, 1, 0), DimensionError);
}

TEST_CASE("conv_transpose1d reproduces the kernel from a delta") {
  auto x = leaf({1, 3}, {1, 0, 0});
  auto w = leaf({1, 1, 3}, {1, 2, 3});
  const auto y = conv_transpose1d(x, w, 1, 0).value();
  CHECK(y.shape() == Shape{1, 5});
  CHECK(y.storage() == std::vector<double>{1, 2, 3, 0, 0});
  // Length law.
  auto z = V::constant(random_tensor({2, 4, 10}, 1));
  auto wk = V::constant(random_tensor({4, 3, 5}, 2));
  CHECK(conv_transpose1d(z, wk, 3, 1).shape() == Shape{2, 3, (10 - 1) * 3 - 2 + 5});
}

TEST_CASE("conv1d and conv_transpose1d are adjoint") {
  // Output of conv1d with x [4,16] under w [Cout, 4, k].
  const auto a = random_tensor({4, 16}, 11);
  const auto w = random_tensor({6, 4, 3}, 12);
  auto ya = conv1d(V::constant(a), V::constant(w), V{}, 1, 1).value();
  const auto b = random_tensor(ya.shape(), 13);
  auto tb = conv_transpose1d(V::constant(b), V::constant(w), 1, 1).value();
  REQUIRE(tb.shape() == a.shape());
  const double lhs = inner(ya, b), rhs = inner(a, tb);
  CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("global_layer_norm worked examples") {
  auto one = leaf({2}, {1, 1});
  auto zero = leaf({2}, {0, 0});
  const auto c = global_layer_norm(leaf({2, 2}, {3, 3, 3, 3}), one, zero, 1e-8).value();
  for (double v : c.storage()) CHECK(v == 0.0);

  // Statistics oracle on [[1,3],[5,7]]: mean 4, variance 5.
  const auto y = global_layer_norm(leaf({2, 2}, {1, 3, 5, 7}), one, zero, 1e-8).value();
  const double sd = std::sqrt(5.0 + 1e-8);
  const double want[] = {-3 / sd, -1 / sd, 1 / sd, 3 / sd};
  for (int i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("global_layer_norm output statistics on a large input") {
  const auto x = random_tensor<float>({256, 128}, 5, -3.0, 7.0);
  auto g = Var<float>::constant(Tensor<float>(Shape{256}, 1.0f));
  auto b = Var<float>::constant(Tensor<float>(Shape{256}, 0.0f));
  const auto y = global_layer_norm(Var<float>::constant(x), g, b, 1e-8f).value();
  double m = 0.0, v = 0.0;
  for (float e : y.storage()) m += e;
  m /= y.size();
  for (float e : y.storage()) v += (e - m) * (e - m);
  v /= y.size();
  CHECK(std::abs(m) < 1e-6);
  CHECK(std::abs(v - 1.0) < 1e-4);
}

TEST_CASE("prelu worked examples") {
  auto slope = leaf({1}, {0.25});
  CHECK(prelu(leaf({1, 3}, {2, 0, 5}), slope).value().storage() == std::vector<double>{2, 0, 5});
  auto x = leaf({1, 1}, {-4});
  auto y = prelu(x, slope);
  CHECK(y.item() == -1.0);
  backward(sum(y));
  CHECK(slope.grad()[0] == -4.0);
  CHECK(x.grad()[0] == 0.25);
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
  const auto x = random_tensor({32, 17}, 9, -20.0, 20.0);
  const auto y = softmax(V::constant(x)).value();
  for (std::size_t r = 0; r < 32; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 17; ++c) {
      CHECK(y[r * 17 + c] >= 0.0);
      s += y[r * 17 + c];
    }
    CHECK(std::abs(s - 1.0) <= 1e-6);
  }
}

TEST_CASE("backward on linear and quadratic functionals") {
  const auto xt = random_tensor({3, 4}, 21);
  auto x = V::leaf(xt, true);
  backward(sum(x));
  const auto gx = x.grad();
  for (double g : gx.storage()) CHECK(g == 1.0);

  auto z = V::leaf(xt, true);
  backward(sum(mul(z, z)));
  for (std::size_t i = 0; i < xt.size(); ++i) CHECK(z.grad()[i] == 2.0 * xt[i]);
}

TEST_CASE("backward rejects non-scalar losses and zero-fills unreached leaves") {
  auto x = V::leaf(random_tensor({2, 2}, 3), true);
  auto unused = V::leaf(random_tensor({2}, 4), true);
  CHECK_THROWS_AS(backward(scale(x, 2.0)), ContractError);
  backward(sum(x));
  CHECK(!unused.has_grad());
  const auto gu = unused.grad();
  for (double g : gu.storage()) CHECK(g == 0.0);
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
  auto x = V::leaf(Tensor<double>(Shape{2}, 1.0), true);
  backward(sum(x));
  backward(sum(x));
  CHECK(x.grad()[0] == 2.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("trace orders every node after its inputs") {
  auto a = V::leaf(random_tensor({2, 3}, 1), true);
  auto b = V::leaf(random_tensor({2, 3}, 2), true);
  auto c = mul(add(a, b), sigmoid(a));
  auto loss = mean(c);
  const auto g = trace(loss);
  std::vector<const Node<double>*> seen;
  for (const auto* n : g.nodes) {
    for (const auto& in : n->inputs) {
      if (in && in->requires_grad) {
        CHECK(std::find(seen.begin(), seen.end(), in.get()) != seen.end());
      }
    }
    seen.push_back(n);
  }
  CHECK(g.nodes.back() == loss.node().get());
}

TEST_CASE("backward is deterministic") {
  auto run = [] {
    auto x = Var<float>::leaf(random_tensor<float>({2, 4, 20}, 31), true);
    auto w = Var<float>::leaf(random_tensor<float>({5, 4, 3}, 32), true);
    auto g = Var<float>::leaf(Tensor<float>(Shape{5}, 1.0f), true);
    auto b = Var<float>::leaf(Tensor<float>(Shape{5}, 0.0f), true);
    auto y = global_layer_norm(conv1d(x, w, Var<float>{}, 1, 1), g, b, 1e-8f);
    backward(mean(mul(y, y)));
    return std::make_pair(x.grad(), w.grad());
  };
  const auto r1 = run();
  const auto r2 = run();
  CHECK(std::memcmp(r1.first.ptr(), r2.first.ptr(), r1.first.size() * sizeof(float)) == 0);
  CHECK(std::memcmp(r1.second.ptr(), r2.second.ptr(), r1.second.size() * sizeof(float)) == 0);
}

TEST_CASE("no-grad guard stops graph recording") {
  auto x = V::leaf(random_tensor({3}, 1), true);
  {
    NoGradGuard guard;
    CHECK(!scale(x, 2.0).requires_grad());
  }
  CHECK(scale(x, 2.0).requires_grad());
}

TEST_CASE("dropout is identity in eval mode and rescales kept entries in training") {
  auto x = V::constant(Tensor<double>(Shape{1000}, 1.0));
  CHECK(dropout(x, 0.1, false, nullptr).node() == x.node());
  std::mt19937_64 rng(7);
  const auto y = dropout(x, 0.25, true, &rng).value();
  std::size_t kept = 0;
  for (double v : y.storage()) {
    CHECK((v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15));
    kept += v != 0.0;
  }
  CHECK(kept > 700);
  CHECK(kept < 800);
  CHECK_THROWS_AS(dropout(x, 1.0, true, &rng), ConfigError);
}

TEST_CASE("narrow, permute and index_select move the right elements") {
  auto x = V::constant(Tensor<double>(Shape{2, 3, 4}, [] {
    std::vector<double> v(24);
    for (int i = 0; i < 24; ++i) v[i] = i;
    return v;
  }()));
  const auto p = permute(x, {2, 0, 1}).value();
  CHECK(p.shape() == Shape{4, 2, 3});
  // p[k][i][j] == x[i][j][k]
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 4; ++k) CHECK(p[(k * 2 + i) * 3 + j] == (i * 3 + j) * 4 + k);
  const auto n = narrow(x, 1, 1, 2).value();
  CHECK(n.shape() == Shape{2, 2, 4});
  CHECK(n[0] == 4.0);
  CHECK(n[8] == 16.0);
  const auto s = index_select(x, {1, 1, 0}).value();
  CHECK(s.shape() == Shape{3, 3, 4});
  CHECK(s[0] == 12.0);
  CHECK(s[24] == 0.0);
  CHECK_THROWS_AS(permute(x, {0, 0, 1}), DimensionError);
  CHECK_THROWS_AS(narrow(x, 2, 3, 2), DimensionError);
}

TEST_CASE("pooling and nearest interpolation follow the index laws") {
  auto x = leaf({1, 6}, {1, 2, 3, 4, 5, 6});
  CHECK(adaptive_avg_pool1d(x, 1).item() == 3.5);
  CHECK(adaptive_avg_pool1d(x, 3).value().storage() == std::vector<double>{1.5, 3.5, 5.5});
  auto c = leaf({1, 3}, {1, 2, 3});
  CHECK(interpolate_nearest(c, 6).value().storage() == std::vector<double>{1, 1, 2, 2, 3, 3});
  CHECK(interpolate_nearest(c, 4).value().storage() == std::vector<double>{1, 1, 2, 3});
}
