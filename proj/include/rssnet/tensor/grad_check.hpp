// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Central finite-difference verification of backward(). Runs in double.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rssnet/tensor/autograd.hpp"

namespace rssnet {

struct GradCheckOptions {
  // Coordinates probed per tensor; 0 probes all of them. Sampling is seeded.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  // Denominator floor: rel = |a - n| / max(|a|, |n|, floor). Keeps coordinates
  // whose true gradient is ~0 from reporting cancellation noise as error.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  // Tensor index and flat coordinate of the worst entry.
  std::size_t worst_tensor = 0;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// f maps a leaf at `point` to a single-element loss.
// Throws NumericalError if f is non-finite at a probe point, ConfigError if
// step lies outside [1e-6, 1e-4].
double grad_check(const std::function<Var<double>(const Var<double>&)>& f, const Tensor<double>& point,
                  double step, const GradCheckOptions& options = {});

// Checks several leaves at once. f must read the leaves' current values; they
// are perturbed in place and restored afterwards.
GradCheckResult grad_check_leaves(const std::function<Var<double>()>& f, std::vector<Var<double>> leaves,
                                  double step, const GradCheckOptions& options = {});

}  // namespace rssnet
