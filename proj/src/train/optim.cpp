// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/train/optim.hpp"

#include <cmath>
#include <string>

namespace rssnet::train {

template <typename T>
void adam_step(model::ParamStore<T>& params, AdamState<T>& state, double lr) {
  if (!(lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  auto& entries = params.entries();
  for (const auto& [name, v] : entries) {
    if (v.has_grad() && !v.node()->grad.all_finite()) {
      throw NumericalError("non-finite gradient in parameter '" + name + "'");
    }
  }
  if (state.m.empty()) {
    for (const auto& [_, v] : entries) {
      state.m.emplace_back(v.shape());
      state.v.emplace_back(v.shape());
    }
  }
  if (state.m.size() != entries.size()) {
    throw CompatibilityError("adam: optimizer state holds " + std::to_string(state.m.size()) +
                             " moment pairs for " + std::to_string(entries.size()) + " parameters");
  }
  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& var = entries[i].second;
    Tensor<T>& m = state.m[i];
    Tensor<T>& s = state.v[i];
    if (m.shape() != var.shape()) {
      throw CompatibilityError("adam: moment shape mismatch for '" + entries[i].first + "'");
    }
    Tensor<T>& w = var.mutable_value();
    const bool has = var.has_grad();
    const T* g = has ? var.node()->grad.ptr() : nullptr;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = has ? static_cast<double>(g[k]) : 0.0;
      const double mk = b1 * static_cast<double>(m[k]) + (1.0 - b1) * gk;
      const double vk = b2 * static_cast<double>(s[k]) + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      s[k] = static_cast<T>(vk);
      const double update = lr * (mk / c1) / (std::sqrt(vk / c2) + state.eps);
      w[k] = static_cast<T>(static_cast<double>(w[k]) - update);
    }
  }
}

template <typename T>
double grad_norm(const model::ParamStore<T>& params) {
  double sq = 0.0;
  for (const auto& [_, v] : params.entries()) {
    if (!v.has_grad()) continue;
    for (T g : v.node()->grad.data()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

template <typename T>
double clip_grad_norm(model::ParamStore<T>& params, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip_grad_norm: max_norm must be positive");
  const double norm = grad_norm(params);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [_, v] : params.entries()) {
      if (!v.has_grad()) continue;
      for (T& g : v.node()->grad.data()) g = static_cast<T>(static_cast<double>(g) * scale);
    }
  }
  return norm;
}

#define RSSNET_INSTANTIATE_OPTIM(T)                                        \
  template void adam_step(model::ParamStore<T>&, AdamState<T>&, double); \
  template double grad_norm(const model::ParamStore<T>&);                \
  template double clip_grad_norm(model::ParamStore<T>&, double);

RSSNET_INSTANTIATE_OPTIM(float)
RSSNET_INSTANTIATE_OPTIM(double)

}  // namespace rssnet::train
