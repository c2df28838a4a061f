// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace rssnet::data {

// Intensities are non-negative and max-normalized once loaded.
struct Spectrum {
  std::vector<double> values;
  std::string id;
  std::string source_library;
};

enum class SpectrumFormat { kAuto, kTwoColumn, kSingleColumn };

// Text spectrum: '#' comment lines, columns split on whitespace or commas.
// Two columns are (wavenumber, intensity). Negative intensities are clipped to
// zero, then the vector is scaled to max 1.
// Errors: ParseError with the 1-based line number; EmptyInputError when no
// data lines exist or every intensity is zero.
Spectrum parse_spectrum(std::istream& in, SpectrumFormat format = SpectrumFormat::kAuto,
                        const std::string& origin = "<stream>");
Spectrum load_spectrum(const std::filesystem::path& path, SpectrumFormat format = SpectrumFormat::kAuto);

// Two-column text, one row per sample index.
void write_spectrum(const std::filesystem::path& path, const std::vector<double>& values,
                    const std::string& comment = {});

// Clip at zero and scale to max 1. Throws EmptyInputError on an all-zero vector.
void normalize_max(std::vector<double>& values);

// Linear interpolation onto `target` evenly spaced positions spanning the
// original index range; both endpoints are kept.
Spectrum standardize_length(const Spectrum& s, std::size_t target);

// Every *.txt / *.csv / *.dat file in `dir` (sorted by file name), loaded and
// standardized to `length`. Unreadable files are collected and reported in a
// single IoError.
std::vector<Spectrum> load_library(const std::filesystem::path& dir, std::size_t length);

// alpha * s1 + (1 - alpha) * s2, alpha in [0.05, 0.95].
std::vector<double> mix_spectra(const Spectrum& s1, const Spectrum& s2, double alpha);

struct NoiseComponents {
  std::vector<double> white;  // de-meaned, unit mean-square
  std::vector<double> brown;  // cumulative sum, de-meaned, unit mean-square
};

NoiseComponents noise_components(std::size_t length, std::uint64_t seed);

// (white + brown) / sqrt(2), scaled so 10 log10(P_signal / P_noise) = snr_db
// with P the mean square. Throws DomainError for an all-zero signal.
std::vector<double> synthesize_noise(std::size_t length, double snr_db, const std::vector<double>& signal,
                                     std::uint64_t seed);

double mean_square(const std::vector<double>& v);

// Lorentzian-peak spectra for tests and the desk-scale experiments.
std::vector<Spectrum> synthetic_library(std::size_t count, std::size_t length, std::uint64_t seed);

}  // namespace rssnet::data
