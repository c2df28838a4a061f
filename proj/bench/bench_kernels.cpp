// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Times the serial reference kernels against their OpenMP counterparts on
// shapes taken from the reference model, and checks the outputs match bit
// for bit. Usage: bench_kernels [repeats]. RSSNET_NUM_THREADS sets the
// worker count.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rssnet/tensor/kernels.hpp"

namespace k = rssnet::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Best of `repeats` wall-clock runs, in milliseconds. `reset` restores the
// output before each run so accumulating kernels see the same input.
double best_ms(int repeats, const std::function<void()>& reset, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    reset();
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

int failures = 0;

void report(const char* name, int repeats, std::vector<float>& out_s, std::vector<float>& out_p,
            const std::vector<float>& init, const std::function<void()>& serial,
            const std::function<void()>& parallel) {
  const double ts = best_ms(repeats, [&] { out_s = init; }, serial);
  const double tp = best_ms(repeats, [&] { out_p = init; }, parallel);
  const bool same = std::memcmp(out_s.data(), out_p.data(), out_s.size() * sizeof(float)) == 0;
  if (!same) ++failures;
  std::printf("%-28s serial %9.3f ms  parallel %9.3f ms  speedup %5.2fx  %s\n", name, ts, tp, ts / tp,
              same ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
  const int threads = k::configure_threads();
  std::printf("threads: %d, repeats: %d\n", threads, repeats);
  std::mt19937_64 rng(2026);

  {
    // Attention-sized product: (batch*heads*frames) x d_model by d_model x d_model.
    const std::size_t m = 4096, n = 128, kk = 128;
    const auto a = random_vec(m * kk, rng), b = random_vec(kk * n, rng);
    const std::vector<float> init(m * n, 0.0f);
    std::vector<float> cs, cp;
    report("gemm 4096x128x128", repeats, cs, cp, init,
           [&] { k::serial::gemm<float>(false, false, m, n, kk, 1.0f, a.data(), b.data(), 0.0f, cs.data()); },
           [&] { k::parallel::gemm<float>(false, false, m, n, kk, 1.0f, a.data(), b.data(), 0.0f, cp.data()); });
    report("gemm^T 128x128x4096", repeats, cs, cp, std::vector<float>(kk * n, 0.0f),
           [&] { k::serial::gemm<float>(true, false, kk, n, m, 1.0f, a.data(), a.data(), 0.0f, cs.data()); },
           [&] { k::parallel::gemm<float>(true, false, kk, n, m, 1.0f, a.data(), a.data(), 0.0f, cp.data()); });
  }
  {
    // Encoder: one input channel to N filters, stride half the kernel.
    k::Conv1dDims d;
    d.batch = 8;
    d.in_channels = 1;
    d.out_channels = 64;
    d.kernel = 16;
    d.stride = 8;
    d.padding = 8;
    d.in_len = 1024;
    d.out_len = (d.in_len + 2 * d.padding - d.kernel) / d.stride + 1;
    const auto x = random_vec(d.batch * d.in_channels * d.in_len, rng);
    const auto w = random_vec(d.out_channels * d.in_channels * d.kernel, rng);
    const auto bias = random_vec(d.out_channels, rng);
    const auto dy = random_vec(d.batch * d.out_channels * d.out_len, rng);
    std::vector<float> ys, yp;
    report("conv1d forward", repeats, ys, yp, std::vector<float>(dy.size(), 0.0f),
           [&] { k::serial::conv1d_forward<float>(d, x.data(), w.data(), bias.data(), ys.data()); },
           [&] { k::parallel::conv1d_forward<float>(d, x.data(), w.data(), bias.data(), yp.data()); });
    report("conv1d backward input", repeats, ys, yp, std::vector<float>(x.size(), 0.0f),
           [&] { k::serial::conv1d_backward_input<float>(d, dy.data(), w.data(), ys.data()); },
           [&] { k::parallel::conv1d_backward_input<float>(d, dy.data(), w.data(), yp.data()); });
    report("conv1d backward weight", repeats, ys, yp, std::vector<float>(w.size(), 0.0f),
           [&] { k::serial::conv1d_backward_weight<float>(d, dy.data(), x.data(), ys.data()); },
           [&] { k::parallel::conv1d_backward_weight<float>(d, dy.data(), x.data(), yp.data()); });
  }
  {
    k::DepthwiseDims d;
    d.batch = 8;
    d.channels = 64;
    d.in_len = 256;
    d.out_len = 256;
    d.kernel = 3;
    d.padding = 1;
    const auto x = random_vec(d.batch * d.channels * d.in_len, rng);
    const auto w = random_vec(d.channels * d.kernel, rng);
    const auto bias = random_vec(d.channels, rng);
    const auto dy = random_vec(x.size(), rng);
    std::vector<float> ys, yp;
    report("depthwise1d forward", repeats, ys, yp, std::vector<float>(x.size(), 0.0f),
           [&] { k::serial::depthwise_forward<float>(d, x.data(), w.data(), bias.data(), ys.data()); },
           [&] { k::parallel::depthwise_forward<float>(d, x.data(), w.data(), bias.data(), yp.data()); });
    report("depthwise1d backward weight", repeats, ys, yp, std::vector<float>(w.size(), 0.0f),
           [&] { k::serial::depthwise_backward_weight<float>(d, dy.data(), x.data(), ys.data()); },
           [&] { k::parallel::depthwise_backward_weight<float>(d, dy.data(), x.data(), yp.data()); });
  }
  {
    // Chunked feature map [batch, N, K, S].
    k::Depthwise2dDims d;
    d.batch = 8;
    d.channels = 64;
    d.height = 32;
    d.width = 17;
    d.kh = 3;
    d.kw = 3;
    const auto x = random_vec(d.batch * d.channels * d.height * d.width, rng);
    const auto w = random_vec(d.channels * d.kh * d.kw, rng);
    const auto bias = random_vec(d.channels, rng);
    const auto dy = random_vec(x.size(), rng);
    std::vector<float> ys, yp;
    report("depthwise2d forward", repeats, ys, yp, std::vector<float>(x.size(), 0.0f),
           [&] { k::serial::depthwise2d_forward<float>(d, x.data(), w.data(), bias.data(), ys.data()); },
           [&] { k::parallel::depthwise2d_forward<float>(d, x.data(), w.data(), bias.data(), yp.data()); });
    report("depthwise2d backward input", repeats, ys, yp, std::vector<float>(x.size(), 0.0f),
           [&] { k::serial::depthwise2d_backward_input<float>(d, dy.data(), w.data(), ys.data()); },
           [&] { k::parallel::depthwise2d_backward_input<float>(d, dy.data(), w.data(), yp.data()); });
  }
  return failures == 0 ? 0 : 1;
}
