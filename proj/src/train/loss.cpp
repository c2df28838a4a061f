// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/train/loss.hpp"

#include <memory>
#include <string>

#include "rssnet/metrics/metrics.hpp"

namespace rssnet::train {

template <typename T>
PitLoss<T> pit_si_snr_loss(const Var<T>& est, const Tensor<T>& targets) {
  const Shape& s = est.shape();
  if (s.size() != 3 || targets.shape() != s) {
    throw DimensionError("pit_si_snr_loss: estimates " + to_string(s) + " and targets " + to_string(targets.shape()) +
                         " must both be [B, C, L]");
  }
  const std::size_t B = s[0], C = s[1], L = s[2];
  PitLoss<T> out;
  out.perms.resize(B);
  out.sample_si_snr.resize(B);
  // d(loss)/d(est), filled for the selected pairs only.
  auto dloss = std::make_shared<std::vector<double>>(B * C * L, 0.0);
  std::vector<double> e(L), r(L), g(L);
  double total = 0.0;
  const double weight = 1.0 / static_cast<double>(B * C);
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<std::vector<double>> score(C, std::vector<double>(C));
    std::vector<std::vector<std::vector<double>>> grads(C, std::vector<std::vector<double>>(C));
    for (std::size_t i = 0; i < C; ++i) {
      const T* ep = est.value().ptr() + (b * C + i) * L;
      for (std::size_t l = 0; l < L; ++l) e[l] = static_cast<double>(ep[l]);
      for (std::size_t t = 0; t < C; ++t) {
        const T* rp = targets.ptr() + (b * C + t) * L;
        for (std::size_t l = 0; l < L; ++l) r[l] = static_cast<double>(rp[l]);
        score[i][t] = metrics::si_snr_with_grad(e, r, g);
        grads[i][t] = g;
      }
    }
    const auto a = metrics::best_permutation(score);
    out.perms[b] = a.perm;
    out.sample_si_snr[b] = a.mean_score;
    total += a.mean_score;
    for (std::size_t t = 0; t < C; ++t) {
      const std::size_t i = a.perm[t];
      double* d = dloss->data() + (b * C + i) * L;
      for (std::size_t l = 0; l < L; ++l) d[l] -= weight * grads[i][t][l];
    }
  }
  Tensor<T> value(Shape{1}, static_cast<T>(-total / static_cast<double>(B)));
  out.loss = make_op<T>(std::move(value), {est}, "pit_si_snr",
                        [dloss](const Tensor<T>& go, const Tensor<T>&, std::span<Tensor<T>* const> gi) {
                          if (!gi[0]) return;
                          const double g0 = static_cast<double>(go[0]);
                          T* dst = gi[0]->ptr();
                          for (std::size_t k = 0; k < dloss->size(); ++k) {
                            dst[k] += static_cast<T>(g0 * (*dloss)[k]);
                          }
                        });
  return out;
}

template PitLoss<float> pit_si_snr_loss(const Var<float>&, const Tensor<float>&);
template PitLoss<double> pit_si_snr_loss(const Var<double>&, const Tensor<double>&);

}  // namespace rssnet::train
