// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include "rssnet/model/params.hpp"

namespace rssnet::train {

template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  // One moment pair per parameter, in ParamStore order. Empty until the first step.
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

// Bias-corrected Adam update using each parameter's accumulated gradient.
// Checks every gradient before touching anything: a non-finite entry raises
// NumericalError naming the parameter and leaves params and state unchanged.
template <typename T>
void adam_step(model::ParamStore<T>& params, AdamState<T>& state, double lr);

// Global L2 norm over all parameter gradients.
template <typename T>
double grad_norm(const model::ParamStore<T>& params);

// Scales every gradient by max_norm / norm when norm > max_norm; returns the
// norm before clipping. ConfigError unless max_norm > 0.
template <typename T>
double clip_grad_norm(model::ParamStore<T>& params, double max_norm);

}  // namespace rssnet::train
