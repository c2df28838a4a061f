// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Separation quality metrics. All functions take double precision views.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace rssnet::metrics {

// SI-SNR is clamped to [-kSiSnrCapDb, +kSiSnrCapDb]. The upper clamp applies
// when the residual power is below 1e-12 of the target power, the lower one
// symmetrically; both conditions are ratios, so clamping is scale invariant.
inline constexpr double kSiSnrCapDb = 80.0;
inline constexpr double kSiSnrClampRatio = 1e-12;
inline constexpr double kSidEps = 1e-9;

// Zero-mean projection form. DomainError when ref has zero power after
// mean removal; DimensionError on length mismatch.
double si_snr(std::span<const double> est, std::span<const double> ref);

// Same value; writes d(si_snr)/d(est) into grad (zero when clamped).
double si_snr_with_grad(std::span<const double> est, std::span<const double> ref, std::span<double> grad);

double si_snr_improvement(std::span<const double> est, std::span<const double> ref,
                          std::span<const double> mixture);

// Symmetric KL of the clamped, l1-normalized vectors; natural log.
double sid(std::span<const double> est, std::span<const double> ref);

// Angle in radians; DomainError if either vector is zero.
double sad(std::span<const double> est, std::span<const double> ref);

double rmse(std::span<const double> est, std::span<const double> ref);

// x / max(x) when max(x) > 0; otherwise a copy of x.
std::vector<double> max_normalized(std::span<const double> x);

// Assignment of estimates to targets: perm[t] is the estimate matched to
// target t. Maximizes the mean of score[perm[t]][t]; ties keep the
// lexicographically first permutation.
struct Assignment {
  std::vector<std::size_t> perm;
  double mean_score = 0.0;
};
Assignment best_permutation(const std::vector<std::vector<double>>& score);

struct SampleScore {
  std::string id;
  std::vector<std::size_t> perm;
  // Means over sources.
  double si_snr = 0.0;
  double si_snri = 0.0;
  double sid = 0.0;
  double sad = 0.0;
  double rmse = 0.0;
};

// Resolves the permutation by SI-SNR and applies it to every metric. SID, SAD
// and RMSE use max-normalized spectra. An all-zero estimate has no angle; it is
// scored as orthogonal (pi/2).
SampleScore score_sample(const std::vector<std::vector<double>>& estimates,
                         const std::vector<std::vector<double>>& targets, std::span<const double> mixture,
                         std::string id);

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population
};
Summary summarize(std::vector<double> values);

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"si_snr", "si_snri", "sid", "sad", "rmse"};
  return names;
}
double metric_value(const SampleScore& s, const std::string& name);

struct ScoreReport {
  std::string method;
  std::vector<SampleScore> samples;
  std::map<std::string, Summary> aggregate;
  // Method-specific scalars, e.g. support_error_rate for sparse baselines.
  std::map<std::string, double> extra;
};

ScoreReport build_report(std::string method, std::vector<SampleScore> samples);
std::string report_to_json(const ScoreReport& r);
std::string report_to_csv(const ScoreReport& r);

}  // namespace rssnet::metrics
