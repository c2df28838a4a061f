// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Seeded mixture datasets. A dataset directory holds
//   manifest.json  generation parameters and one record per sample
//   library.bin    the standardized pure spectra the records index into
//   train.bin, val.bin, test.bin   float32 sample records
// Layouts are documented in docs/formats.md.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rssnet/data/spectrum.hpp"

namespace rssnet::data {

enum class Split { kTrain = 0, kVal = 1, kTest = 2 };
const char* split_name(Split s);
Split parse_split(const std::string& name);

struct GenerationConfig {
  std::string name = "dataset";
  std::size_t length = 1024;
  std::size_t sources = 2;
  std::array<std::size_t, 3> sizes{0, 0, 0};  // train, val, test
  double snr_min_db = 10.0;
  double snr_max_db = 20.0;
  double alpha_min = 0.05;
  double alpha_max = 0.95;
  std::uint64_t master_seed = 0;

  bool operator==(const GenerationConfig&) const = default;
};

struct SampleRecord {
  std::size_t index = 0;  // global position across all splits
  Split split = Split::kTrain;
  std::vector<std::size_t> source_indices;  // into the library
  std::vector<std::string> source_ids;
  // Mixing weights; for two sources {alpha, 1 - alpha}.
  std::vector<double> weights;
  double snr_db = 0.0;
  std::uint64_t noise_seed = 0;

  bool operator==(const SampleRecord&) const = default;
};

struct DatasetManifest {
  static constexpr int kFormatVersion = 1;
  int format_version = kFormatVersion;
  GenerationConfig config;
  std::string library_sha256;  // of library.bin
  std::vector<std::string> library_ids;
  std::vector<SampleRecord> records;

  std::size_t count(Split s) const { return config.sizes[static_cast<int>(s)]; }
  bool operator==(const DatasetManifest&) const = default;
};

// One materialized sample in training precision.
struct Sample {
  std::vector<float> mixed;                 // [L]
  std::vector<std::vector<float>> sources;  // C x [L], the pure library spectra
};

// Sample i in double precision, before float conversion. Pure function of
// (library, config, i): generation order never matters.
struct ExactSample {
  SampleRecord record;
  std::vector<double> clean;                 // weighted sum of sources
  std::vector<std::vector<double>> sources;  // pure, max-normalized
  std::vector<double> noise;
  std::vector<double> mixed;                 // clean + noise
};

SampleRecord draw_record(const GenerationConfig& config, const std::vector<Spectrum>& library, std::size_t index);
ExactSample realize(const SampleRecord& record, const std::vector<Spectrum>& library, std::size_t length);

struct GenerationResult {
  DatasetManifest manifest;
  std::vector<std::string> warnings;
};

// Validates the config, draws every record and writes the dataset directory.
GenerationResult generate_dataset(const std::vector<Spectrum>& library, const GenerationConfig& config,
                                  const std::filesystem::path& out_dir);

// Rewrites every split file from the manifest and library stored in `dir`.
void regenerate_samples(const std::filesystem::path& dir, const std::filesystem::path& out_dir);

// Manifest JSON round trip.
std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);
DatasetManifest read_manifest(const std::filesystem::path& dir);

std::string encode_library(const std::vector<Spectrum>& library);
std::vector<Spectrum> decode_library(const std::string& bytes);
// Reads library.bin and checks it against the manifest hash.
std::vector<Spectrum> read_library(const std::filesystem::path& dir, const DatasetManifest& m);

// Split file I/O. `dataset_id` ties a split file to its manifest.
std::string encode_split(const std::vector<Sample>& samples, std::size_t length, std::size_t sources,
                         const std::string& dataset_id);
std::vector<Sample> read_split(const std::filesystem::path& dir, Split split);

// sha256 over the canonical manifest JSON; stamped into every split file.
std::string dataset_id(const DatasetManifest& m);

Sample to_float(const ExactSample& s);

}  // namespace rssnet::data
