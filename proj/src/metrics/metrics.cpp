// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "rssnet/errors.hpp"

namespace rssnet::metrics {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": lengths differ (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw DimensionError(std::string(what) + ": empty input");
}

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double si_snr_with_grad(std::span<const double> est, std::span<const double> ref, std::span<double> grad) {
  require_same_length(est, ref, "si_snr");
  const std::size_t n = est.size();
  const double me = mean_of(est), mr = mean_of(ref);
  std::vector<double> x(n), r(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = est[i] - me;
    r[i] = ref[i] - mr;
  }
  const double rr = dot(r, r);
  if (!(rr > 0.0)) throw DomainError("si_snr: reference has zero power after mean removal");
  const double a = dot(x, r);
  const double scale = a / rr;
  double target = 0.0, resid = 0.0;
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double st = scale * r[i];
    e[i] = x[i] - st;
    target += st * st;
    resid += e[i] * e[i];
  }
  const bool want_grad = !grad.empty();
  if (want_grad) {
    if (grad.size() != n) throw DimensionError("si_snr: gradient buffer has the wrong length");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  // Floor first: an estimate with nothing left after mean removal has both
  // powers zero and must not score as perfect.
  if (target <= kSiSnrClampRatio * resid) return -kSiSnrCapDb;
  if (resid <= kSiSnrClampRatio * target) return kSiSnrCapDb;
  if (want_grad) {
    // v = 10 log10(S / E), S = a^2 / rr, E = |x|^2 - a^2 / rr (x, r zero-mean).
    // dS/dx = 2 a r / rr, dE/dx = 2 e. Both are zero-mean, so the mean removal
    // contributes nothing further.
    const double k = 10.0 / std::numbers::ln10;
    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = k * (2.0 * scale * r[i] / target - 2.0 * e[i] / resid);
    }
  }
  return 10.0 * std::log10(target / resid);
}

double si_snr(std::span<const double> est, std::span<const double> ref) { return si_snr_with_grad(est, ref, {}); }

double si_snr_improvement(std::span<const double> est, std::span<const double> ref,
                          std::span<const double> mixture) {
  return si_snr(est, ref) - si_snr(mixture, ref);
}

double sid(std::span<const double> est, std::span<const double> ref) {
  require_same_length(est, ref, "sid");
  const std::size_t n = est.size();
  std::vector<double> p(n), q(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = std::max(est[i], kSidEps);
    q[i] = std::max(ref[i], kSidEps);
  }
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pi = p[i] / sp, qi = q[i] / sq;
    // p log(p/q) + q log(q/p); the difference of logs keeps the swap exact.
    d += (pi - qi) * (std::log(pi) - std::log(qi));
  }
  return std::max(d, 0.0);
}

double sad(std::span<const double> est, std::span<const double> ref) {
  require_same_length(est, ref, "sad");
  const double ne = std::sqrt(dot(est, est)), nr = std::sqrt(dot(ref, ref));
  if (!(ne > 0.0) || !(nr > 0.0)) throw DomainError("sad: zero vector has no angle");
  // 2 atan2(|u - v|, |u + v|) on unit vectors; acos loses ~1e-8 near 0.
  double diff = 0.0, total = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double u = est[i] / ne, v = ref[i] / nr;
    diff += (u - v) * (u - v);
    total += (u + v) * (u + v);
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(total));
}

double rmse(std::span<const double> est, std::span<const double> ref) {
  require_same_length(est, ref, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double d = est[i] - ref[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(est.size()));
}

std::vector<double> max_normalized(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  if (m > 0.0) {
    for (auto& v : out) v /= m;
  }
  return out;
}

Assignment best_permutation(const std::vector<std::vector<double>>& score) {
  const std::size_t c = score.size();
  if (c == 0) throw DimensionError("best_permutation: empty score matrix");
  for (const auto& row : score) {
    if (row.size() != c) throw DimensionError("best_permutation: score matrix must be square");
  }
  std::vector<std::size_t> perm(c);
  std::iota(perm.begin(), perm.end(), 0);
  Assignment best;
  bool first = true;
  do {
    double s = 0.0;
    for (std::size_t t = 0; t < c; ++t) s += score[perm[t]][t];
    s /= static_cast<double>(c);
    if (first || s > best.mean_score) {
      best.perm = perm;
      best.mean_score = s;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

SampleScore score_sample(const std::vector<std::vector<double>>& estimates,
                         const std::vector<std::vector<double>>& targets, std::span<const double> mixture,
                         std::string id) {
  const std::size_t c = targets.size();
  if (estimates.size() != c) {
    throw DimensionError("score_sample: " + std::to_string(estimates.size()) + " estimates for " +
                         std::to_string(c) + " targets");
  }
  std::vector<std::vector<double>> snr(c, std::vector<double>(c));
  for (std::size_t e = 0; e < c; ++e) {
    for (std::size_t t = 0; t < c; ++t) snr[e][t] = si_snr(estimates[e], targets[t]);
  }
  const Assignment a = best_permutation(snr);
  SampleScore s;
  s.id = std::move(id);
  s.perm = a.perm;
  for (std::size_t t = 0; t < c; ++t) {
    const auto& est = estimates[a.perm[t]];
    const auto& ref = targets[t];
    s.si_snr += snr[a.perm[t]][t];
    s.si_snri += snr[a.perm[t]][t] - si_snr(mixture, ref);
    const auto en = max_normalized(est);
    const auto rn = max_normalized(ref);
    s.sid += sid(en, rn);
    const bool zero_est = std::all_of(en.begin(), en.end(), [](double v) { return v == 0.0; });
    s.sad += zero_est ? std::numbers::pi / 2.0 : sad(en, rn);
    s.rmse += rmse(en, rn);
  }
  const double inv = 1.0 / static_cast<double>(c);
  s.si_snr *= inv;
  s.si_snri *= inv;
  s.sid *= inv;
  s.sad *= inv;
  s.rmse *= inv;
  return s;
}

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / n);
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  s.median = values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
  return s;
}

double metric_value(const SampleScore& s, const std::string& name) {
  if (name == "si_snr") return s.si_snr;
  if (name == "si_snri") return s.si_snri;
  if (name == "sid") return s.sid;
  if (name == "sad") return s.sad;
  if (name == "rmse") return s.rmse;
  throw ContractError("unknown metric '" + name + "'");
}

ScoreReport build_report(std::string method, std::vector<SampleScore> samples) {
  ScoreReport r;
  r.method = std::move(method);
  r.samples = std::move(samples);
  for (const auto& name : metric_names()) {
    std::vector<double> v;
    v.reserve(r.samples.size());
    for (const auto& s : r.samples) v.push_back(metric_value(s, name));
    r.aggregate[name] = summarize(std::move(v));
  }
  return r;
}

std::string report_to_json(const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["method"] = r.method;
  j["count"] = r.samples.size();
  nlohmann::ordered_json agg = nlohmann::ordered_json::object();
  for (const auto& name : metric_names()) {
    const auto& s = r.aggregate.at(name);
    agg[name] = {{"mean", s.mean}, {"median", s.median}, {"std", s.std}};
  }
  j["aggregate"] = agg;
  j["extra"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.extra) j["extra"][k] = v;
  nlohmann::ordered_json samples = nlohmann::ordered_json::array();
  for (const auto& s : r.samples) {
    nlohmann::ordered_json o;
    o["id"] = s.id;
    o["permutation"] = s.perm;
    for (const auto& name : metric_names()) o[name] = metric_value(s, name);
    samples.push_back(std::move(o));
  }
  j["samples"] = std::move(samples);
  return j.dump(1) + "\n";
}

std::string report_to_csv(const ScoreReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "id,permutation";
  for (const auto& name : metric_names()) out << ',' << name;
  out << '\n';
  for (const auto& s : r.samples) {
    out << s.id << ',';
    for (std::size_t i = 0; i < s.perm.size(); ++i) out << (i ? " " : "") << s.perm[i];
    for (const auto& name : metric_names()) out << ',' << metric_value(s, name);
    out << '\n';
  }
  return out.str();
}

}  // namespace rssnet::metrics
