// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"
#include "rssnet/errors.hpp"
#include "rssnet/io/binary.hpp"
#include "rssnet/io/hash.hpp"

namespace rssnet::data {

namespace {

using nlohmann::json;

// Field tags for derive_seed(master, index, tag).
constexpr std::uint64_t kTagSources = 0x50414952;  // "PAIR"
constexpr std::uint64_t kTagWeights = 0x414c5048;  // "ALPH"
constexpr std::uint64_t kTagSnr = 0x534e5244;      // "SNRD"
constexpr std::uint64_t kTagNoise = 0x4e4f4953;    // "NOIS"

constexpr char kLibraryMagic[] = "RSSDLIBR";
constexpr char kSplitMagic[] = "RSSDSAMP";
constexpr std::uint32_t kBinaryVersion = 1;

const char* const kSplitNames[] = {"train", "val", "test"};

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 0; i < k; ++i) r = r * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return r;
}

void validate(const GenerationConfig& c, const std::vector<Spectrum>& library) {
  if (c.sources < 2) throw ConfigError("sources must be >= 2, got " + std::to_string(c.sources));
  if (library.size() < c.sources) {
    throw ConfigError("library has " + std::to_string(library.size()) + " spectra; at least " +
                      std::to_string(c.sources) + " are needed");
  }
  if (c.length < 2) throw ConfigError("length must be >= 2");
  for (const auto& s : library) {
    if (s.values.size() != c.length) {
      throw DimensionError("library spectrum '" + s.id + "' has length " + std::to_string(s.values.size()) +
                           ", expected " + std::to_string(c.length));
    }
  }
  if (!(c.snr_min_db > 0.0 && c.snr_max_db < 80.0 && c.snr_min_db <= c.snr_max_db)) {
    throw ConfigError("snr range must satisfy 0 < min <= max < 80");
  }
  if (!(c.alpha_min >= 0.05 && c.alpha_max <= 0.95 && c.alpha_min <= c.alpha_max)) {
    throw ConfigError("alpha range must lie within [0.05, 0.95]");
  }
  if (c.sizes[0] + c.sizes[1] + c.sizes[2] == 0) throw ConfigError("dataset sizes are all zero");
}

Split split_of(const GenerationConfig& c, std::size_t index) {
  if (index < c.sizes[0]) return Split::kTrain;
  if (index < c.sizes[0] + c.sizes[1]) return Split::kVal;
  return Split::kTest;
}

std::size_t split_offset(const GenerationConfig& c, Split s) {
  std::size_t off = 0;
  for (int i = 0; i < static_cast<int>(s); ++i) off += c.sizes[i];
  return off;
}

std::vector<float> to_f32(const std::vector<double>& v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

std::string split_file(Split s) { return std::string(split_name(s)) + ".bin"; }

}  // namespace

const char* split_name(Split s) { return kSplitNames[static_cast<int>(s)]; }

Split parse_split(const std::string& name) {
  for (int i = 0; i < 3; ++i) {
    if (name == kSplitNames[i]) return static_cast<Split>(i);
  }
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

SampleRecord draw_record(const GenerationConfig& c, const std::vector<Spectrum>& library, std::size_t index) {
  SampleRecord r;
  r.index = index;
  r.split = split_of(c, index);

  // Distinct sources: partial Fisher-Yates over library positions.
  std::mt19937_64 pick(io::derive_seed(c.master_seed, index, kTagSources));
  std::vector<std::size_t> order(library.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = 0; k < c.sources; ++k) {
    std::uniform_int_distribution<std::size_t> d(k, order.size() - 1);
    std::swap(order[k], order[d(pick)]);
    r.source_indices.push_back(order[k]);
    r.source_ids.push_back(library[order[k]].id);
  }

  std::mt19937_64 wrng(io::derive_seed(c.master_seed, index, kTagWeights));
  std::uniform_real_distribution<double> alpha(c.alpha_min, c.alpha_max);
  if (c.sources == 2) {
    const double a = alpha(wrng);
    r.weights = {a, 1.0 - a};
  } else {
    double total = 0.0;
    for (std::size_t k = 0; k < c.sources; ++k) {
      r.weights.push_back(alpha(wrng));
      total += r.weights.back();
    }
    for (double& w : r.weights) w /= total;
  }

  std::mt19937_64 srng(io::derive_seed(c.master_seed, index, kTagSnr));
  r.snr_db = std::uniform_real_distribution<double>(c.snr_min_db, c.snr_max_db)(srng);
  r.noise_seed = io::derive_seed(c.master_seed, index, kTagNoise);
  return r;
}

ExactSample realize(const SampleRecord& record, const std::vector<Spectrum>& library, std::size_t length) {
  ExactSample s;
  s.record = record;
  for (auto idx : record.source_indices) {
    if (idx >= library.size()) throw InvariantError("record references library entry " + std::to_string(idx));
    s.sources.push_back(library[idx].values);
  }
  if (record.weights.size() == 2) {
    s.clean = mix_spectra(library[record.source_indices[0]], library[record.source_indices[1]], record.weights[0]);
  } else {
    s.clean.assign(length, 0.0);
    for (std::size_t k = 0; k < s.sources.size(); ++k) {
      for (std::size_t i = 0; i < length; ++i) s.clean[i] += record.weights[k] * s.sources[k][i];
    }
  }
  s.noise = synthesize_noise(length, record.snr_db, s.clean, record.noise_seed);
  s.mixed.resize(length);
  for (std::size_t i = 0; i < length; ++i) s.mixed[i] = s.clean[i] + s.noise[i];
  return s;
}

Sample to_float(const ExactSample& s) {
  Sample out;
  out.mixed = to_f32(s.mixed);
  for (const auto& src : s.sources) out.sources.push_back(to_f32(src));
  return out;
}

// ------------------------------------------------------------------ manifest

std::string manifest_to_json(const DatasetManifest& m) {
  const auto& c = m.config;
  json records = json::array();
  for (const auto& r : m.records) {
    records.push_back({{"index", r.index},
                       {"split", split_name(r.split)},
                       {"sources", r.source_indices},
                       {"source_ids", r.source_ids},
                       {"alpha", r.weights.front()},
                       {"weights", r.weights},
                       {"snr_db", r.snr_db},
                       {"noise_seed", r.noise_seed}});
  }
  json j = {
      {"format_version", m.format_version},
      {"name", c.name},
      {"length", c.length},
      {"sources", c.sources},
      {"sizes", {{"train", c.sizes[0]}, {"val", c.sizes[1]}, {"test", c.sizes[2]}}},
      {"snr_db_range", {c.snr_min_db, c.snr_max_db}},
      {"alpha_range", {c.alpha_min, c.alpha_max}},
      {"master_seed", c.master_seed},
      {"seed_rule", "splitmix64(splitmix64(splitmix64(master_seed) ^ index) ^ tag); tags PAIR, ALPH, SNRD, NOIS"},
      {"library", {{"file", "library.bin"}, {"sha256", m.library_sha256}, {"ids", m.library_ids}}},
      {"records", std::move(records)},
  };
  return j.dump(1) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != DatasetManifest::kFormatVersion) {
      throw CompatibilityError("manifest format version " + std::to_string(m.format_version) + " is not supported (expected " +
                               std::to_string(DatasetManifest::kFormatVersion) + ")");
    }
    auto& c = m.config;
    c.name = j.at("name").get<std::string>();
    c.length = j.at("length").get<std::size_t>();
    c.sources = j.at("sources").get<std::size_t>();
    const auto& sizes = j.at("sizes");
    c.sizes = {sizes.at("train").get<std::size_t>(), sizes.at("val").get<std::size_t>(),
               sizes.at("test").get<std::size_t>()};
    c.snr_min_db = j.at("snr_db_range").at(0).get<double>();
    c.snr_max_db = j.at("snr_db_range").at(1).get<double>();
    c.alpha_min = j.at("alpha_range").at(0).get<double>();
    c.alpha_max = j.at("alpha_range").at(1).get<double>();
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.library_sha256 = j.at("library").at("sha256").get<std::string>();
    m.library_ids = j.at("library").at("ids").get<std::vector<std::string>>();
    for (const auto& jr : j.at("records")) {
      SampleRecord r;
      r.index = jr.at("index").get<std::size_t>();
      r.split = parse_split(jr.at("split").get<std::string>());
      r.source_indices = jr.at("sources").get<std::vector<std::size_t>>();
      r.source_ids = jr.at("source_ids").get<std::vector<std::string>>();
      r.weights = jr.at("weights").get<std::vector<double>>();
      r.snr_db = jr.at("snr_db").get<double>();
      r.noise_seed = jr.at("noise_seed").get<std::uint64_t>();
      m.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what());
  }
  const std::size_t total = m.config.sizes[0] + m.config.sizes[1] + m.config.sizes[2];
  if (m.records.size() != total) {
    throw ParseError("manifest declares " + std::to_string(total) + " samples but lists " +
                     std::to_string(m.records.size()));
  }
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  return manifest_from_json(io::read_file(dir / "manifest.json"));
}

std::string dataset_id(const DatasetManifest& m) { return io::sha256_hex(manifest_to_json(m)); }

// ------------------------------------------------------------------- library

std::string encode_library(const std::vector<Spectrum>& library) {
  io::ByteWriter w;
  w.tag({kLibraryMagic, 8});
  w.u32(kBinaryVersion);
  w.u64(library.size());
  w.u64(library.empty() ? 0 : library.front().values.size());
  for (const auto& s : library) {
    w.str(s.id);
    w.str(s.source_library);
    w.array<double>(s.values);
  }
  return w.release();
}

std::vector<Spectrum> decode_library(const std::string& bytes) {
  io::ByteReader r(bytes, "library.bin");
  r.expect_tag({kLibraryMagic, 8});
  if (const auto v = r.u32(); v != kBinaryVersion) {
    throw CompatibilityError("library.bin version " + std::to_string(v) + " is not supported");
  }
  const auto count = r.u64();
  const auto length = r.u64();
  std::vector<Spectrum> lib(count);
  for (auto& s : lib) {
    s.id = r.str();
    s.source_library = r.str();
    s.values.resize(length);
    r.array<double>(s.values);
  }
  return lib;
}

std::vector<Spectrum> read_library(const std::filesystem::path& dir, const DatasetManifest& m) {
  const std::string bytes = io::read_file(dir / "library.bin");
  const std::string digest = io::sha256_hex(bytes);
  if (digest != m.library_sha256) {
    throw CompatibilityError("library.bin hash " + digest + " does not match manifest " + m.library_sha256);
  }
  return decode_library(bytes);
}

// --------------------------------------------------------------- split files

std::string encode_split(const std::vector<Sample>& samples, std::size_t length, std::size_t sources,
                         const std::string& id) {
  io::ByteWriter w;
  w.tag({kSplitMagic, 8});
  w.u32(kBinaryVersion);
  w.u32(static_cast<std::uint32_t>(length));
  w.u32(static_cast<std::uint32_t>(sources));
  w.u64(samples.size());
  w.str(id);
  for (const auto& s : samples) {
    if (s.mixed.size() != length || s.sources.size() != sources) {
      throw InvariantError("sample does not match split geometry");
    }
    w.array<float>(s.mixed);
    for (const auto& src : s.sources) w.array<float>(src);
  }
  return w.release();
}

std::vector<Sample> read_split(const std::filesystem::path& dir, Split split) {
  const auto path = dir / split_file(split);
  const std::string bytes = io::read_file(path);
  io::ByteReader r(bytes, path.string());
  r.expect_tag({kSplitMagic, 8});
  if (const auto v = r.u32(); v != kBinaryVersion) {
    throw CompatibilityError(path.string() + ": version " + std::to_string(v) + " is not supported");
  }
  const std::size_t length = r.u32();
  const std::size_t sources = r.u32();
  const std::size_t count = r.u64();
  const std::string id = r.str();
  const DatasetManifest m = read_manifest(dir);
  if (id != dataset_id(m)) {
    throw CompatibilityError(path.string() + " belongs to dataset " + id + ", manifest is " + dataset_id(m));
  }
  if (count != m.count(split) || length != m.config.length || sources != m.config.sources) {
    throw CompatibilityError(path.string() + ": geometry disagrees with the manifest");
  }
  std::vector<Sample> out(count);
  for (auto& s : out) {
    s.mixed.resize(length);
    r.array<float>(s.mixed);
    s.sources.assign(sources, std::vector<float>(length));
    for (auto& src : s.sources) r.array<float>(src);
  }
  if (r.remaining() != 0) throw ParseError(path.string() + ": trailing bytes");
  return out;
}

// ---------------------------------------------------------------- generation

namespace {

void write_splits(const DatasetManifest& m, const std::vector<Spectrum>& library, const std::filesystem::path& out) {
  const std::string id = dataset_id(m);
  const auto& c = m.config;
  const std::size_t total = m.records.size();
  std::vector<Sample> samples(total);
  std::vector<std::string> errors(total);
  // Records are independent; each thread writes only its own slot.
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < total; ++i) {
    try {
      samples[i] = to_float(realize(m.records[i], library, c.length));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < total; ++i) {
    if (!errors[i].empty()) throw NumericalError("sample " + std::to_string(i) + ": " + errors[i]);
  }
  for (int s = 0; s < 3; ++s) {
    const auto split = static_cast<Split>(s);
    const std::size_t off = split_offset(c, split);
    std::vector<Sample> part(std::make_move_iterator(samples.begin() + off),
                             std::make_move_iterator(samples.begin() + off + c.sizes[s]));
    io::write_file(out / split_file(split), encode_split(part, c.length, c.sources, id));
  }
}

}  // namespace

GenerationResult generate_dataset(const std::vector<Spectrum>& library, const GenerationConfig& config,
                                  const std::filesystem::path& out_dir) {
  validate(config, library);
  GenerationResult result;
  DatasetManifest& m = result.manifest;
  m.config = config;
  const std::size_t total = config.sizes[0] + config.sizes[1] + config.sizes[2];
  const double combos = binomial(library.size(), config.sources);
  if (static_cast<double>(total) > combos) {
    result.warnings.push_back("requested " + std::to_string(total) + " samples but the library offers only " +
                              std::to_string(static_cast<std::uint64_t>(combos)) +
                              " distinct source sets; sets will repeat with fresh weights and noise");
  }
  m.records.resize(total);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < total; ++i) m.records[i] = draw_record(config, library, i);

  const std::string lib_bytes = encode_library(library);
  m.library_sha256 = io::sha256_hex(lib_bytes);
  for (const auto& s : library) m.library_ids.push_back(s.id);

  std::filesystem::create_directories(out_dir);
  io::write_file(out_dir / "library.bin", lib_bytes);
  io::write_file(out_dir / "manifest.json", manifest_to_json(m));
  write_splits(m, library, out_dir);
  return result;
}

void regenerate_samples(const std::filesystem::path& dir, const std::filesystem::path& out_dir) {
  const DatasetManifest m = read_manifest(dir);
  const auto library = read_library(dir, m);
  for (const auto& r : m.records) {
    for (std::size_t k = 0; k < r.source_indices.size(); ++k) {
      if (r.source_indices[k] >= library.size() || library[r.source_indices[k]].id != r.source_ids[k]) {
        throw CompatibilityError("record " + std::to_string(r.index) + " does not match the stored library");
      }
    }
  }
  write_splits(m, library, out_dir);
}

}  // namespace rssnet::data
