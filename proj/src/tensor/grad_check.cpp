// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rssnet {

namespace {

double evaluate(const std::function<Var<double>()>& f) {
  NoGradGuard guard;
  const Var<double> out = f();
  const double v = out.item();
  if (!std::isfinite(v)) throw NumericalError("grad_check: loss is non-finite at a probe point");
  return v;
}

std::vector<std::size_t> probe_coords(std::size_t n, const GradCheckOptions& o, std::size_t tensor_index) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (o.max_coords == 0 || o.max_coords >= n) return idx;
  std::mt19937_64 rng(o.seed ^ (0x9e3779b97f4a7c15ULL * (tensor_index + 1)));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(o.max_coords);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckResult grad_check_leaves(const std::function<Var<double>()>& f, std::vector<Var<double>> leaves,
                                  double step, const GradCheckOptions& options) {
  if (!(step >= 1e-6 && step <= 1e-4)) {
    throw ConfigError("grad_check: step " + std::to_string(step) + " outside [1e-6, 1e-4]");
  }
  for (auto& leaf : leaves) leaf.zero_grad();
  const Var<double> loss = f();
  if (!std::isfinite(loss.item())) throw NumericalError("grad_check: loss is non-finite at the base point");
  backward(loss);

  GradCheckResult result;
  for (std::size_t t = 0; t < leaves.size(); ++t) {
    Var<double>& leaf = leaves[t];
    const Tensor<double> analytic = leaf.grad();
    Tensor<double>& value = leaf.mutable_value();
    for (std::size_t i : probe_coords(value.size(), options, t)) {
      const double saved = value[i];
      value[i] = saved + step;
      const double up = evaluate(f);
      value[i] = saved - step;
      const double down = evaluate(f);
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coords_checked;
      if (rel > result.max_rel_error || result.coords_checked == 1) {
        result.max_rel_error = std::max(result.max_rel_error, rel);
        if (rel >= result.max_rel_error) {
          result.worst_tensor = t;
          result.worst_coord = i;
          result.worst_analytic = a;
          result.worst_numeric = numeric;
        }
      }
    }
  }
  return result;
}

double grad_check(const std::function<Var<double>(const Var<double>&)>& f, const Tensor<double>& point, double step,
                  const GradCheckOptions& options) {
  Var<double> x = Var<double>::leaf(point, true);
  return grad_check_leaves([&] { return f(x); }, {x}, step, options).max_rel_error;
}

}  // namespace rssnet
