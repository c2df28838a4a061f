// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <vector>

#include "rssnet/tensor/autograd.hpp"

namespace rssnet::train {

template <typename T>
struct PitLoss {
  Var<T> loss;  // scalar: -mean over samples of the best mean SI-SNR
  // perms[b][t] is the estimate assigned to target t of sample b.
  std::vector<std::vector<std::size_t>> perms;
  std::vector<double> sample_si_snr;  // best mean SI-SNR per sample, dB
};

// est, targets: [B, C, L]. SI-SNR is evaluated in double; the gradient flows
// to est only, through the selected pairs.
template <typename T>
PitLoss<T> pit_si_snr_loss(const Var<T>& est, const Tensor<T>& targets);

}  // namespace rssnet::train
