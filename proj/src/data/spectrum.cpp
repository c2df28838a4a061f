// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/data/spectrum.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "rssnet/errors.hpp"
#include "rssnet/io/hash.hpp"

namespace rssnet::data {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ' ' || c == '\t' || c == ',' || c == '\r'; };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_sep(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

// Tags for seeds derived inside the synthetic library generator.
constexpr std::uint64_t kTagPeaks = 0x5045414b;  // "PEAK"

}  // namespace

void normalize_max(std::vector<double>& values) {
  double mx = 0.0;
  for (auto& v : values) {
    if (v < 0.0) v = 0.0;
    mx = std::max(mx, v);
  }
  if (mx <= 0.0) throw EmptyInputError("spectrum has no positive intensity");
  for (auto& v : values) v /= mx;  // mx / mx is exactly 1
}

Spectrum parse_spectrum(std::istream& in, SpectrumFormat format, const std::string& origin) {
  Spectrum s;
  std::string line;
  std::size_t lineno = 0;
  std::size_t columns = 0;
  if (format == SpectrumFormat::kTwoColumn) columns = 2;
  if (format == SpectrumFormat::kSingleColumn) columns = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto fields = split_fields(line);
    if (columns == 0) {
      if (fields.size() != 1 && fields.size() != 2) {
        throw ParseError(origin + ":" + std::to_string(lineno) + ": expected 1 or 2 columns, found " +
                         std::to_string(fields.size()));
      }
      columns = fields.size();
    }
    if (fields.size() != columns) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                       " columns, found " + std::to_string(fields.size()));
    }
    double v = 0.0;
    for (const auto& f : fields) {
      if (!parse_double(f, v) || !std::isfinite(v)) {
        throw ParseError(origin + ":" + std::to_string(lineno) + ": not a finite number: '" + std::string(f) + "'");
      }
    }
    s.values.push_back(v);  // intensity is the last column
  }
  if (in.bad()) throw IoError(origin + ": read failed");
  if (s.values.empty()) throw EmptyInputError(origin + ": no data lines");
  try {
    normalize_max(s.values);
  } catch (const EmptyInputError&) {
    throw EmptyInputError(origin + ": spectrum has no positive intensity");
  }
  return s;
}

Spectrum load_spectrum(const std::filesystem::path& path, SpectrumFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spectrum file " + path.string());
  Spectrum s = parse_spectrum(in, format, path.string());
  s.id = path.stem().string();
  s.source_library = path.parent_path().filename().string();
  return s;
}

void write_spectrum(const std::filesystem::path& path, const std::vector<double>& values, const std::string& comment) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write spectrum file " + path.string());
  if (!comment.empty()) out << "# " << comment << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < values.size(); ++i) out << i << ' ' << values[i] << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Spectrum standardize_length(const Spectrum& s, std::size_t target) {
  if (target < 2) throw ConfigError("standardize_length: target length must be >= 2, got " + std::to_string(target));
  const std::size_t n = s.values.size();
  if (n < 2) throw DimensionError("standardize_length: input length must be >= 2, got " + std::to_string(n));
  Spectrum out{std::vector<double>(target), s.id, s.source_library};
  if (n == target) {
    out.values = s.values;
    return out;
  }
  const double span = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < target; ++i) {
    const double pos = static_cast<double>(i) * span / static_cast<double>(target - 1);
    const auto lo = std::min(static_cast<std::size_t>(pos), n - 2);
    const double t = pos - static_cast<double>(lo);
    out.values[i] = (1.0 - t) * s.values[lo] + t * s.values[lo + 1];
  }
  out.values.front() = s.values.front();
  out.values.back() = s.values.back();
  return out;
}

std::vector<Spectrum> load_library(const std::filesystem::path& dir, std::size_t length) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("library directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".txt" || ext == ".csv" || ext == ".dat") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Spectrum> lib;
  std::string failures;
  for (const auto& f : files) {
    try {
      lib.push_back(standardize_length(load_spectrum(f), length));
    } catch (const Error& e) {
      failures += "\n  " + f.string() + ": " + e.what();
    }
  }
  if (!failures.empty()) throw IoError("unreadable library files:" + failures);
  return lib;
}

std::vector<double> mix_spectra(const Spectrum& s1, const Spectrum& s2, double alpha) {
  if (s1.values.size() != s2.values.size()) {
    throw DimensionError("mix_spectra: lengths differ, " + std::to_string(s1.values.size()) + " vs " +
                         std::to_string(s2.values.size()));
  }
  if (!(alpha >= 0.05 && alpha <= 0.95)) {
    throw ConfigError("mix_spectra: alpha " + std::to_string(alpha) + " outside [0.05, 0.95]");
  }
  std::vector<double> m(s1.values.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = alpha * s1.values[i] + (1.0 - alpha) * s2.values[i];
  return m;
}

double mean_square(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc / static_cast<double>(v.size());
}

namespace {

void demean_unit_power(std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  for (double& x : v) x -= m;
  const double p = mean_square(v);
  if (!(p > 0.0)) throw DomainError("noise component has zero power");
  const double k = 1.0 / std::sqrt(p);
  for (double& x : v) x *= k;
}

}  // namespace

NoiseComponents noise_components(std::size_t length, std::uint64_t seed) {
  if (length < 2) throw ConfigError("noise length must be >= 2, got " + std::to_string(length));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  NoiseComponents c{std::vector<double>(length), std::vector<double>(length)};
  for (auto& x : c.white) x = gauss(rng);
  double run = 0.0;
  for (auto& x : c.brown) {
    run += gauss(rng);
    x = run;
  }
  demean_unit_power(c.white);
  demean_unit_power(c.brown);
  return c;
}

std::vector<double> synthesize_noise(std::size_t length, double snr_db, const std::vector<double>& signal,
                                     std::uint64_t seed) {
  if (!(snr_db > 0.0 && snr_db < 80.0)) {
    throw ConfigError("synthesize_noise: snr_db " + std::to_string(snr_db) + " outside (0, 80)");
  }
  if (signal.size() != length) {
    throw DimensionError("synthesize_noise: signal length " + std::to_string(signal.size()) + " != " +
                         std::to_string(length));
  }
  const double ps = mean_square(signal);
  if (!(ps > 0.0)) throw DomainError("synthesize_noise: SNR undefined for an all-zero signal");
  auto c = noise_components(length, seed);
  std::vector<double> e(length);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < length; ++i) e[i] = (c.white[i] + c.brown[i]) * inv_sqrt2;
  const double pe = mean_square(e);
  const double k = std::sqrt(ps / (pe * std::pow(10.0, snr_db / 10.0)));
  for (double& x : e) x *= k;
  return e;
}

std::vector<Spectrum> synthetic_library(std::size_t count, std::size_t length, std::uint64_t seed) {
  if (length < 2) throw ConfigError("synthetic_library: length must be >= 2");
  std::vector<Spectrum> lib(count);
  const double len = static_cast<double>(length);
  for (std::size_t s = 0; s < count; ++s) {
    std::mt19937_64 rng(io::derive_seed(seed, s, kTagPeaks));
    std::uniform_int_distribution<int> n_peaks(3, 9);
    std::uniform_real_distribution<double> centre(0.03 * len, 0.97 * len);
    std::uniform_real_distribution<double> width(0.003 * len, 0.02 * len);
    std::uniform_real_distribution<double> height(0.15, 1.0);
    std::vector<double> v(length, 0.0);
    const int peaks = n_peaks(rng);
    for (int p = 0; p < peaks; ++p) {
      const double c = centre(rng), g = width(rng), h = height(rng);
      for (std::size_t i = 0; i < length; ++i) {
        const double z = (static_cast<double>(i) - c) / g;
        v[i] += h / (1.0 + z * z);
      }
    }
    normalize_max(v);
    char id[32];
    std::snprintf(id, sizeof id, "syn%05zu", s);
    lib[s] = Spectrum{std::move(v), id, "synthetic"};
  }
  return lib;
}

}  // namespace rssnet::data
