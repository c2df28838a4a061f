// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "doctest.h"
#include "rssnet/data/dataset.hpp"
#include "rssnet/errors.hpp"
#include "rssnet/io/binary.hpp"
#include "temp_dir.hpp"

using namespace rssnet;
using namespace rssnet::data;

namespace {

Spectrum spec(std::vector<double> v, std::string id = "s") { return Spectrum{std::move(v), std::move(id), "test"}; }

// Power ratio in dB measured independently of the library helpers.
double measured_snr_db(const std::vector<double>& signal, const std::vector<double>& noise) {
  long double ps = 0, pn = 0;
  for (double v : signal) ps += static_cast<long double>(v) * v;
  for (double v : noise) pn += static_cast<long double>(v) * v;
  return static_cast<double>(10.0L * std::log10(ps / pn));
}

}  // namespace

TEST_CASE("parse two-column spectrum with comment header") {
  std::ostringstream text;
  text << "# RRUFF-style export\n# wavenumber, intensity\n";
  for (int i = 0; i < 1200; ++i) text << 100 + i << ", " << (i % 7) << "\n";
  std::istringstream in(text.str());
  const auto s = parse_spectrum(in);
  CHECK(s.values.size() == 1200);
  CHECK(*std::max_element(s.values.begin(), s.values.end()) == 1.0);
}

TEST_CASE("parse single-column spectrum normalizes to max 1 and clips negatives") {
  std::istringstream in("0\n5\n10\n");
  CHECK(parse_spectrum(in).values == std::vector<double>{0.0, 0.5, 1.0});
  std::istringstream neg("-3\n2\n4\n");
  CHECK(parse_spectrum(neg).values == std::vector<double>{0.0, 0.5, 1.0});
}

TEST_CASE("parse errors carry the line number") {
  std::istringstream bad("# header\n1 2\n3 x\n");
  try {
    parse_spectrum(bad, SpectrumFormat::kAuto, "f.txt");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("f.txt:3") != std::string::npos);
  }
  std::istringstream ragged("1 2\n3\n");
  CHECK_THROWS_AS(parse_spectrum(ragged), ParseError);
  std::istringstream empty("# only comments\n\n");
  CHECK_THROWS_AS(parse_spectrum(empty), EmptyInputError);
  std::istringstream zeros("0\n0\n");
  CHECK_THROWS_AS(parse_spectrum(zeros), EmptyInputError);
}

TEST_CASE("load_spectrum reads files and library directories") {
  rssnet::testing::TempDir dir;
  write_spectrum(dir.path() / "lib" / "b.txt", {0.0, 2.0, 4.0});
  write_spectrum(dir.path() / "lib" / "a.txt", {1.0, 1.0, 0.5, 0.0});
  const auto s = load_spectrum(dir.path() / "lib" / "b.txt");
  CHECK(s.id == "b");
  CHECK(s.source_library == "lib");
  CHECK(s.values == std::vector<double>{0.0, 0.5, 1.0});
  const auto lib = load_library(dir.path() / "lib", 5);
  REQUIRE(lib.size() == 2);
  CHECK(lib[0].id == "a");
  CHECK(lib[0].values.size() == 5);
  CHECK_THROWS_AS(load_spectrum(dir.path() / "missing.txt"), IoError);

  io::write_file(dir.path() / "lib" / "c.txt", "1 2\n oops\n");
  try {
    load_library(dir.path() / "lib", 5);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("c.txt") != std::string::npos);
  }
}

TEST_CASE("standardize_length") {
  std::vector<double> v(1024);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.01 * i) + 1.0;
  CHECK(standardize_length(spec(v), 1024).values == v);
  CHECK(standardize_length(spec({0, 1}), 3).values == std::vector<double>{0.0, 0.5, 1.0});

  std::vector<double> ramp(512);
  for (std::size_t i = 0; i < 512; ++i) ramp[i] = static_cast<double>(i) / 511.0;
  const auto r = standardize_length(spec(ramp), 1024).values;
  double dev = 0.0;
  for (std::size_t i = 0; i < 1024; ++i) dev = std::max(dev, std::abs(r[i] - static_cast<double>(i) / 1023.0));
  CHECK(dev < 1e-6);
  CHECK(r.front() == ramp.front());
  CHECK(r.back() == ramp.back());
  CHECK_THROWS_AS(standardize_length(spec({0, 1}), 1), ConfigError);
}

TEST_CASE("mix_spectra") {
  const auto a = spec({1, 0}), b = spec({0, 1});
  const auto m = mix_spectra(a, b, 0.3);
  CHECK(m[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(m[1] == doctest::Approx(0.7).epsilon(1e-15));
  const auto s = spec({0.2, 1.0, 0.4});
  CHECK(mix_spectra(s, s, 0.5) == s.values);
  const auto edge = mix_spectra(a, b, 0.95);
  CHECK(edge[0] == 0.95);
  CHECK(edge[1] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK_THROWS_AS(mix_spectra(a, spec({1, 2, 3}), 0.5), DimensionError);
  CHECK_THROWS_AS(mix_spectra(a, b, 0.99), ConfigError);
}

TEST_CASE("noise meets the requested SNR and equal white/brown power") {
  std::vector<double> signal(1024);
  for (std::size_t i = 0; i < signal.size(); ++i) signal[i] = 0.5 + 0.5 * std::sin(0.05 * i);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const double snr = 10.0 + 0.05 * static_cast<double>(seed);
    const auto e = synthesize_noise(signal.size(), snr, signal, seed);
    CHECK(std::abs(measured_snr_db(signal, e) - snr) <= 0.05);
    const auto c = noise_components(signal.size(), seed);
    const double pw = mean_square(c.white), pb = mean_square(c.brown);
    CHECK(std::abs(pw / pb - 1.0) <= 1e-9);
  }
  const auto e1 = synthesize_noise(256, 12.0, std::vector<double>(256, 1.0), 42);
  const auto e2 = synthesize_noise(256, 12.0, std::vector<double>(256, 1.0), 42);
  CHECK(e1 == e2);
  CHECK_THROWS_AS(synthesize_noise(4, 10.0, std::vector<double>(4, 0.0), 1), DomainError);
  CHECK_THROWS_AS(synthesize_noise(4, 90.0, std::vector<double>(4, 1.0), 1), ConfigError);
}

TEST_CASE("brown component is a de-meaned cumulative sum") {
  const auto c = noise_components(512, 3);
  double m = 0.0;
  for (double v : c.brown) m += v;
  CHECK(std::abs(m / 512.0) < 1e-12);
  // Random-walk increments are far smoother than white noise.
  double dw = 0.0, db = 0.0;
  for (std::size_t i = 1; i < 512; ++i) {
    dw += std::abs(c.white[i] - c.white[i - 1]);
    db += std::abs(c.brown[i] - c.brown[i - 1]);
  }
  CHECK(db < 0.5 * dw);
}

TEST_CASE("synthetic library spectra are max-normalized and distinct") {
  const auto lib = synthetic_library(10, 128, 5);
  std::set<std::vector<double>> uniq;
  for (const auto& s : lib) {
    CHECK(*std::max_element(s.values.begin(), s.values.end()) == 1.0);
    CHECK(*std::min_element(s.values.begin(), s.values.end()) >= 0.0);
    uniq.insert(s.values);
  }
  CHECK(uniq.size() == 10);
  CHECK(synthetic_library(3, 64, 9)[2].values == synthetic_library(3, 64, 9)[2].values);
}

TEST_CASE("single-sample dataset from a two-spectrum library uses both spectra") {
  rssnet::testing::TempDir dir;
  GenerationConfig c;
  c.length = 32;
  c.sizes = {1, 0, 0};
  c.master_seed = 1;
  const auto lib = synthetic_library(2, 32, 1);
  const auto res = generate_dataset(lib, c, dir.path());
  REQUIRE(res.manifest.records.size() == 1);
  const auto& r = res.manifest.records[0];
  CHECK(std::set<std::size_t>(r.source_indices.begin(), r.source_indices.end()) == std::set<std::size_t>{0, 1});
  CHECK(read_split(dir.path(), Split::kTrain).size() == 1);
  CHECK(read_split(dir.path(), Split::kVal).empty());
}

TEST_CASE("reference split sizes give 70000 records") {
  rssnet::testing::TempDir dir;
  GenerationConfig c;
  c.length = 8;
  c.sizes = {60000, 5000, 5000};
  c.master_seed = 7;
  const auto res = generate_dataset(synthetic_library(400, 8, 2), c, dir.path());
  CHECK(res.manifest.records.size() == 70000);
  CHECK(res.warnings.empty());
  CHECK(read_manifest(dir.path()).count(Split::kTest) == 5000);
}

TEST_CASE("dataset invariants, regeneration and manifest round trip") {
  rssnet::testing::TempDir dir;
  GenerationConfig c;
  c.name = "unit";
  c.length = 64;
  c.sizes = {40, 10, 10};
  c.master_seed = 1234;
  const auto lib = synthetic_library(6, 64, 3);
  const auto res = generate_dataset(lib, c, dir.path());
  const auto& m = res.manifest;
  CHECK(res.warnings.size() == 1);  // 60 samples > 15 distinct pairs

  for (const auto& r : m.records) {
    CHECK(r.source_indices.size() == 2);
    CHECK(r.source_indices[0] != r.source_indices[1]);
    CHECK(r.weights[0] >= 0.05);
    CHECK(r.weights[0] <= 0.95);
    CHECK(r.weights[0] + r.weights[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.snr_db >= 10.0);
    CHECK(r.snr_db <= 20.0);
    // Order independence: record i is a function of (seed, i) alone.
    CHECK(draw_record(c, lib, r.index) == r);
    const auto ex = realize(r, lib, c.length);
    std::vector<double> e(c.length);
    for (std::size_t i = 0; i < c.length; ++i) {
      e[i] = ex.mixed[i] - (r.weights[0] * lib[r.source_indices[0]].values[i] +
                            r.weights[1] * lib[r.source_indices[1]].values[i]);
    }
    CHECK(std::abs(measured_snr_db(ex.clean, e) - r.snr_db) <= 0.05);
  }

  const auto text = io::read_file(dir.path() / "manifest.json");
  const auto back = manifest_from_json(text);
  CHECK(back == m);
  CHECK(manifest_to_json(back) == text);

  rssnet::testing::TempDir again;
  regenerate_samples(dir.path(), again.path());
  for (const char* f : {"train.bin", "val.bin", "test.bin"}) {
    CHECK(io::read_file(dir.path() / f) == io::read_file(again.path() / f));
  }

  // float32 records reproduce the manifest's noise to within float rounding.
  const auto train = read_split(dir.path(), Split::kTrain);
  REQUIRE(train.size() == 40);
  CHECK(train[0].sources[0] == std::vector<float>(lib[m.records[0].source_indices[0]].values.begin(),
                                                  lib[m.records[0].source_indices[0]].values.end()));
}

TEST_CASE("dataset files detect tampering") {
  rssnet::testing::TempDir dir;
  GenerationConfig c;
  c.length = 16;
  c.sizes = {4, 2, 2};
  generate_dataset(synthetic_library(4, 16, 3), c, dir.path());
  auto lib = io::read_file(dir.path() / "library.bin");
  lib[lib.size() - 1] ^= 1;
  io::write_file(dir.path() / "library.bin", lib);
  CHECK_THROWS_AS(read_library(dir.path(), read_manifest(dir.path())), CompatibilityError);
  auto train = io::read_file(dir.path() / "train.bin");
  io::write_file(dir.path() / "train.bin", train.substr(0, train.size() - 3));
  CHECK_THROWS_AS(read_split(dir.path(), Split::kTrain), ParseError);
}

TEST_CASE("generation config validation") {
  rssnet::testing::TempDir dir;
  GenerationConfig c;
  c.length = 16;
  c.sizes = {1, 0, 0};
  CHECK_THROWS_AS(generate_dataset(synthetic_library(1, 16, 1), c, dir.path()), ConfigError);
  CHECK_THROWS_AS(generate_dataset(synthetic_library(3, 8, 1), c, dir.path()), DimensionError);
  c.snr_max_db = 90;
  CHECK_THROWS_AS(generate_dataset(synthetic_library(3, 16, 1), c, dir.path()), ConfigError);
}
