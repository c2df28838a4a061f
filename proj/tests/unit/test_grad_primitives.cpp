// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Every primitive's backward closure against central differences at double
// precision. The loss is a random linear functional of the op output so that
// no gradient direction is trivially zero.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "rssnet/tensor/attention.hpp"
#include "rssnet/tensor/grad_check.hpp"
#include "rssnet/tensor/ops.hpp"
#include "test_util.hpp"

using namespace rssnet;
using rssnet::testing::random_tensor;

namespace {

using V = Var<double>;
constexpr double kStep = 1e-5;
constexpr double kPrimitiveTol = 1e-4;

V param(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  return V::leaf(random_tensor(std::move(s), seed, lo, hi), true);
}

// Builds sum(op(...) * R) with R fixed per output shape.
double check(const std::string& name, const std::function<V()>& op, const std::vector<V>& leaves) {
  Tensor<double> weights;
  auto loss = [&]() {
    V y = op();
    if (weights.empty()) weights = random_tensor(y.shape(), std::hash<std::string>{}(name), -1.0, 1.0);
    return sum(mul(y, V::constant(weights)));
  };
  const auto r = grad_check_leaves(loss, leaves, kStep);
  INFO(name << ": worst rel " << r.max_rel_error << " at leaf " << r.worst_tensor << "[" << r.worst_coord
            << "] analytic " << r.worst_analytic << " numeric " << r.worst_numeric);
  CHECK(r.max_rel_error < kPrimitiveTol);
  CHECK(r.coords_checked > 0);
  return r.max_rel_error;
}

}  // namespace

TEST_CASE("grad_check is exact on a linear functional") {
  const double err = grad_check([](const V& x) { return sum(x); }, random_tensor({4, 5}, 1), kStep);
  CHECK(err < 1e-9);
}

TEST_CASE("grad_check validates step and rejects non-finite probes") {
  auto f = [](const V& x) { return sum(x); };
  CHECK_THROWS_AS(grad_check(f, random_tensor({3}, 1), 1e-3), ConfigError);
  CHECK_THROWS_AS(grad_check(f, random_tensor({3}, 1), 1e-8), ConfigError);
  auto blow = [](const V& x) {
    Tensor<double> t(Shape{1}, x.value()[0] > 0.5 ? std::numeric_limits<double>::infinity() : 0.0);
    return add(sum(x), V::constant(t));
  };
  CHECK_THROWS_AS(grad_check(blow, Tensor<double>(Shape{1}, 0.5), 1e-5), NumericalError);
}

TEST_CASE("elementwise and reduction primitives") {
  auto a = param({3, 4}, 1), b = param({3, 4}, 2);
  check("add", [&] { return add(a, b); }, {a, b});
  check("sub", [&] { return sub(a, b); }, {a, b});
  check("mul", [&] { return mul(a, b); }, {a, b});
  check("scale", [&] { return scale(a, 1.7); }, {a});
  check("add_scalar", [&] { return add_scalar(a, -0.3); }, {a});
  check("mean", [&] { return mean(mul(a, a)); }, {a});
  check("sum", [&] { return sum(mul(a, b)); }, {a, b});
}

TEST_CASE("layout primitives") {
  auto a = param({2, 3, 4}, 3);
  check("reshape", [&] { return reshape(a, Shape{6, 4}); }, {a});
  check("permute", [&] { return permute(a, {2, 0, 1}); }, {a});
  check("narrow", [&] { return narrow(a, 2, 1, 2); }, {a});
  check("index_select", [&] { return index_select(a, {1, 0, 1}); }, {a});
}

TEST_CASE("convolution primitives") {
  auto x = param({2, 3, 11}, 4), w = param({4, 3, 3}, 5), b = param({4}, 6);
  check("conv1d", [&] { return conv1d(x, w, b, 1, 1); }, {x, w, b});
  check("conv1d_strided", [&] { return conv1d(x, w, b, 2, 0); }, {x, w, b});
  auto wt = param({3, 2, 3}, 7);
  check("conv_transpose1d", [&] { return conv_transpose1d(x, wt, 1, 1); }, {x, wt});
  check("conv_transpose1d_strided", [&] { return conv_transpose1d(x, wt, 2, 0); }, {x, wt});
  auto dw = param({3, 5}, 8), db = param({3}, 9);
  check("depthwise_conv1d", [&] { return depthwise_conv1d(x, dw, db, 2, 2); }, {x, dw, db});
  auto x4 = param({2, 3, 5, 6}, 10), w2 = param({3, 3, 3}, 11);
  check("depthwise_conv2d", [&] { return depthwise_conv2d(x4, w2, db); }, {x4, w2, db});
  auto pw = param({5, 3}, 12), pb = param({5}, 13);
  check("pointwise_conv", [&] { return pointwise_conv(x, pw, pb); }, {x, pw, pb});
  check("pointwise_conv_4d", [&] { return pointwise_conv(x4, pw, pb); }, {x4, pw, pb});
}

TEST_CASE("normalization and activation primitives") {
  auto x = param({2, 4, 7}, 14, -2.0, 3.0);
  auto g = param({4}, 15, 0.5, 1.5), b = param({4}, 16);
  check("global_layer_norm", [&] { return global_layer_norm(x, g, b, 1e-8); }, {x, g, b});
  auto g7 = param({7}, 17, 0.5, 1.5), b7 = param({7}, 18);
  check("layer_norm", [&] { return layer_norm(x, g7, b7, 1e-5); }, {x, g7, b7});
  auto slope = param({4}, 19, 0.1, 0.4);
  check("prelu", [&] { return prelu(x, slope); }, {x, slope});
  check("relu", [&] { return relu(x); }, {x});
  check("sigmoid", [&] { return sigmoid(x); }, {x});
  check("softmax", [&] { return softmax(x); }, {x});
}

TEST_CASE("prelu slope gradient at x = -4 equals -4") {
  auto x = V::leaf(Tensor<double>(Shape{1, 1}, -4.0), true);
  auto slope = V::leaf(Tensor<double>(Shape{1}, 0.25), true);
  const auto r = grad_check_leaves([&] { return sum(prelu(x, slope)); }, {slope}, kStep);
  CHECK(slope.grad()[0] == doctest::Approx(-4.0).epsilon(1e-12));
  CHECK(r.worst_numeric == doctest::Approx(-4.0).epsilon(1e-9));
}

TEST_CASE("linear, matmul, pooling, interpolation and dropout primitives") {
  auto x = param({2, 5, 6}, 20), w = param({3, 6}, 21), b = param({3}, 22);
  check("linear", [&] { return linear(x, w, b); }, {x, w, b});
  auto m = param({2, 6, 4}, 23), mt = param({2, 3, 6}, 24);
  check("matmul", [&] { return matmul(x, m); }, {x, m});
  check("matmul_tb", [&] { return matmul(x, mt, true); }, {x, mt});
  check("adaptive_avg_pool1d", [&] { return adaptive_avg_pool1d(x, 4); }, {x});
  check("adaptive_avg_pool1d_full", [&] { return adaptive_avg_pool1d(x, 1); }, {x});
  check("interpolate_nearest", [&] { return interpolate_nearest(x, 13); }, {x});
  check("dropout", [&] {
    std::mt19937_64 rng(99);
    return dropout(x, 0.3, true, &rng);
  }, {x});
}

TEST_CASE("multi-head attention") {
  const std::size_t d_in = 6, d_model = 8;
  AttentionParams<double> p{param({d_model, d_in}, 30), param({d_model}, 31), param({d_model, d_in}, 32),
                            param({d_model}, 33),       param({d_model, d_in}, 34), param({d_model}, 35),
                            param({d_in, d_model}, 36), param({d_in}, 37)};
  auto x = param({2, 5, d_in}, 38);
  check("multi_head_attention", [&] { return multi_head_attention(x, p, 2); },
        {x, p.wq, p.bq, p.wk, p.bk, p.wv, p.bv, p.wo, p.bo});
}
