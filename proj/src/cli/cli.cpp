// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rssnet/data/dataset.hpp"
#include "rssnet/errors.hpp"
#include "rssnet/io/binary.hpp"
#include "rssnet/io/hash.hpp"
#include "rssnet/metrics/metrics.hpp"
#include "rssnet/model/rssnet.hpp"
#include "rssnet/sparse/sparse.hpp"
#include "rssnet/train/checkpoint.hpp"
#include "rssnet/train/trainer.hpp"

namespace rssnet::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DimensionError*>(&e)) return kShape;
  if (dynamic_cast<const CompatibilityError*>(&e)) return kCompatibility;
  if (dynamic_cast<const NumericalError*>(&e)) return kNumerical;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const IoError*>(&e)) {
    return kInput;
  }
  return kInternal;
}

namespace {

// Flags shared by every subcommand.
struct Common {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* app, Common& c, bool out_required = true) {
  c.seed_opt = app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--config", c.config_path, "JSON config file (flags take precedence)");
  auto* o = app->add_option("--out", c.out, "Output directory");
  if (out_required) o->required();
}

// Top-level config file: an object whose sections each subcommand picks from.
json load_config(const std::string& path, const std::set<std::string>& allowed) {
  if (path.empty()) return json::object();
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ParseError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + path + " must hold a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("config " + path + ": unknown section '" + key + "'");
  }
  return j;
}

// flag > config file > default.
template <typename T>
T resolve(const CLI::Option* flag, const T& flag_value, const json& section, const char* key, const T& fallback) {
  if (flag && flag->count() > 0) return flag_value;
  if (section.is_object() && section.contains(key)) {
    try {
      return section.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
  return fallback;
}

void require_dir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) throw IoError(std::string(what) + " not found: " + path);
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " not found: " + path);
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

void write_snapshot(const fs::path& dir, const std::string& command, json resolved) {
  json j;
  j["command"] = command;
  for (auto& [k, v] : resolved.items()) j[k] = v;
  write_json(dir / "resolved_config.json", j);
}

std::vector<double> parse_pair(const std::string& s, const char* what) {
  std::vector<double> v;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": cannot parse '" + s + "'");
    }
  }
  return v;
}

// ---------------------------------------------------------------- make-library

int cmd_make_library(std::size_t count, std::size_t length, const Common& c, std::ostream& out) {
  if (count < 1) throw ConfigError("--count must be >= 1");
  fs::create_directories(c.out);
  const auto lib = data::synthetic_library(count, length, c.seed);
  for (const auto& s : lib) data::write_spectrum(fs::path(c.out) / (s.id + ".txt"), s.values, "synthetic " + s.id);
  write_snapshot(c.out, "make-library", {{"count", count}, {"length", length}, {"seed", c.seed}});
  out << "wrote " << count << " spectra to " << c.out << "\n";
  return kOk;
}

// -------------------------------------------------------------------- gen-data

struct GenFlags {
  std::string library, sizes, snr, alpha, name;
  std::size_t length = 1024;
  CLI::Option *length_opt = nullptr, *sizes_opt = nullptr, *snr_opt = nullptr, *alpha_opt = nullptr,
              *name_opt = nullptr;
};

int cmd_gen_data(const GenFlags& f, const Common& c, std::ostream& out, std::ostream& err) {
  const json cfg = load_config(c.config_path, {"data"});
  const json sec = cfg.value("data", json::object());
  for (const auto& [key, _] : sec.items()) {
    static const std::set<std::string> known{"length", "sizes", "snr", "alpha", "name", "seed"};
    if (!known.count(key)) throw ConfigError("config data section: unknown key '" + key + "'");
  }
  require_dir(f.library, "library directory");
  data::GenerationConfig g;
  g.length = resolve<std::size_t>(f.length_opt, f.length, sec, "length", g.length);
  g.name = resolve<std::string>(f.name_opt, f.name, sec, "name", g.name);
  g.master_seed = resolve<std::uint64_t>(c.seed_opt, c.seed, sec, "seed", 0);
  auto take = [&](CLI::Option* opt, const std::string& flag, const char* key, std::size_t n) -> std::vector<double> {
    std::vector<double> v;
    if (opt->count() > 0) {
      v = parse_pair(flag, key);
    } else if (sec.contains(key)) {
      try {
        v = sec.at(key).get<std::vector<double>>();
      } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
      }
    } else {
      return {};
    }
    if (v.size() != n) throw ConfigError(std::string(key) + " needs " + std::to_string(n) + " values");
    return v;
  };
  if (auto v = take(f.sizes_opt, f.sizes, "sizes", 3); !v.empty()) {
    for (std::size_t i = 0; i < 3; ++i) {
      if (v[i] < 0 || v[i] != std::floor(v[i])) throw ConfigError("sizes must be nonnegative integers");
      g.sizes[i] = static_cast<std::size_t>(v[i]);
    }
  } else {
    throw ConfigError("--sizes train,val,test is required");
  }
  if (auto v = take(f.snr_opt, f.snr, "snr", 2); !v.empty()) {
    g.snr_min_db = v[0];
    g.snr_max_db = v[1];
  }
  if (auto v = take(f.alpha_opt, f.alpha, "alpha", 2); !v.empty()) {
    g.alpha_min = v[0];
    g.alpha_max = v[1];
  }
  const auto lib = data::load_library(f.library, g.length);
  const auto res = data::generate_dataset(lib, g, c.out);
  for (const auto& w : res.warnings) err << "warning: " << w << "\n";
  write_snapshot(c.out, "gen-data",
                 {{"library", f.library},
                  {"data", {{"name", g.name}, {"length", g.length}, {"sizes", g.sizes},
                            {"snr", {g.snr_min_db, g.snr_max_db}}, {"alpha", {g.alpha_min, g.alpha_max}},
                            {"seed", g.master_seed}}}});
  out << "manifest: " << (fs::path(c.out) / "manifest.json").string() << "\n"
      << "samples: train " << g.sizes[0] << ", val " << g.sizes[1] << ", test " << g.sizes[2] << " (library "
      << lib.size() << " spectra)\n";
  return kOk;
}

// ----------------------------------------------------------------------- train

struct TrainFlags {
  std::string data, preset = "reference";
  std::vector<std::string> ablations;
  std::size_t epochs = 0, batch_size = 0, eval_every = 0;
  double lr = 0, clip_norm = 0;
  bool resume = false;
  CLI::Option *preset_opt = nullptr, *epochs_opt = nullptr, *batch_opt = nullptr, *eval_opt = nullptr,
              *lr_opt = nullptr, *clip_opt = nullptr;
};

json preset_json(const std::string& name) {
  model::RssNetConfig c;
  if (name == "desk") {
    c.N = 32;
    c.K = 16;
    c.iter = 2;
    c.S = 2;
    c.heads = 4;
    c.d_model = 64;
    c.ffn_dim = 128;
    c.L = 256;
  } else if (name != "reference") {
    throw ConfigError("--preset must be reference or desk, got '" + name + "'");
  }
  return json::parse(model::to_json(c));
}

// Preset, then the config file's model section, then --ablation flags. L and C
// follow the dataset unless set explicitly.
model::RssNetConfig resolve_model(const std::string& preset, const json& model_section,
                                  const std::vector<std::string>& ablations, const data::DatasetManifest* m) {
  json j = preset_json(preset);
  if (!model_section.is_null()) {
    if (!model_section.is_object()) throw ConfigError("config model section must be an object");
    for (const auto& [k, v] : model_section.items()) j[k] = v;
  }
  if (m) {
    if (!model_section.contains("L")) j["L"] = m->config.length;
    if (!model_section.contains("C")) j["C"] = m->config.sources;
  }
  for (const auto& a : ablations) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("--ablation expects key=value, got '" + a + "'");
    const std::string key = a.substr(0, eq), value = a.substr(eq + 1);
    if (key == "dwconv-path") {
      j["dwconv_path"] = value;
    } else if (key == "dwconv-kernel") {
      j["dwconv_kernel"] = std::stoul(value);
    } else if (key == "weight-sharing") {
      if (value != "on" && value != "off") throw ConfigError("weight-sharing must be on or off");
      j["weight_sharing"] = value == "on";
    } else {
      throw ConfigError("unknown ablation '" + key + "' (dwconv-path, dwconv-kernel, weight-sharing)");
    }
  }
  return model::config_from_json(j.dump());
}

int cmd_train(const TrainFlags& f, const Common& c, std::ostream& out) {
  const json cfg = load_config(c.config_path, {"model", "train", "preset"});
  require_dir(f.data, "dataset directory");
  const auto manifest = data::read_manifest(f.data);
  const std::string preset = resolve<std::string>(f.preset_opt, f.preset, cfg, "preset", "reference");
  const auto mc = resolve_model(preset, cfg.value("model", json()), f.ablations, &manifest);

  train::TrainConfig tc =
      cfg.contains("train") ? train::train_config_from_json(cfg["train"].dump()) : train::TrainConfig{};
  if (c.seed_opt->count()) tc.seed = c.seed;
  if (f.epochs_opt->count()) tc.epochs = f.epochs;
  if (f.batch_opt->count()) tc.batch_size = f.batch_size;
  if (f.eval_opt->count()) tc.eval_every = f.eval_every;
  if (f.lr_opt->count()) tc.lr = f.lr;
  if (f.clip_opt->count()) tc.clip_norm = f.clip_norm;
  tc.validate();

  const auto train_set = train::load_split(f.data, data::Split::kTrain);
  const auto val_set = train::load_split(f.data, data::Split::kVal);
  fs::create_directories(c.out);
  write_snapshot(c.out, "train",
                 {{"data", f.data},
                  {"dataset_id", data::dataset_id(manifest)},
                  {"preset", preset},
                  {"model", json::parse(model::to_json(mc))},
                  {"train", json::parse(train::to_json(tc))},
                  {"resume", f.resume}});
  out << "model " << model::config_hash(mc).substr(0, 12) << ": " << model::count_params(mc) << " parameters; "
      << train_set.samples.size() << " train / " << val_set.samples.size() << " val samples\n";
  train::TrainOptions opt;
  opt.out_dir = c.out;
  opt.resume = f.resume;
  opt.on_epoch = [&](const train::EpochRecord& r) {
    out << "epoch " << r.epoch << ": train_loss " << r.train_loss << ", val_si_snr " << r.val_si_snr
        << ", val_si_snri " << r.val_si_snri << " (" << r.wall_time << " s)\n"
        << std::flush;
  };
  const auto res = train::train(mc, tc, train_set, val_set, opt);
  out << "best epoch " << res.best_epoch << ": val_si_snri " << res.best_val_si_snri << "\n";
  return kOk;
}

// ------------------------------------------------------------------------ eval

std::vector<double> as_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

metrics::ScoreReport eval_checkpoint(const train::Checkpoint& ckpt, const train::LabeledSplit& split,
                                     std::size_t batch_size) {
  const auto& mc = ckpt.config;
  std::vector<metrics::SampleScore> scores;
  NoGradGuard no_grad;
  for (std::size_t begin = 0; begin < split.samples.size(); begin += batch_size) {
    const std::size_t end = std::min(split.samples.size(), begin + batch_size);
    Tensor<float> mixed(Shape{end - begin, mc.L});
    for (std::size_t i = begin; i < end; ++i) {
      const auto& s = split.samples[i];
      if (s.mixed.size() != mc.L || s.sources.size() != mc.C) {
        throw DimensionError("sample " + split.ids[i] + " has length " + std::to_string(s.mixed.size()) + " and " +
                             std::to_string(s.sources.size()) + " sources; checkpoint expects L=" +
                             std::to_string(mc.L) + ", C=" + std::to_string(mc.C));
      }
      std::copy(s.mixed.begin(), s.mixed.end(), mixed.ptr() + (i - begin) * mc.L);
    }
    const auto est = model::forward(Var<float>::constant(mixed), ckpt.params, mc);
    for (std::size_t i = begin; i < end; ++i) {
      std::vector<std::vector<double>> e(mc.C), t(mc.C);
      for (std::size_t k = 0; k < mc.C; ++k) {
        const float* p = est.value().ptr() + ((i - begin) * mc.C + k) * mc.L;
        e[k].assign(p, p + mc.L);
        t[k] = as_double(split.samples[i].sources[k]);
      }
      scores.push_back(metrics::score_sample(e, t, as_double(split.samples[i].mixed), split.ids[i]));
    }
  }
  return metrics::build_report("rssnet", std::move(scores));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

struct EvalFlags {
  std::string checkpoint, data, split = "test", estimates, truth, mixture;
  std::size_t batch_size = 8;
};

void write_report(const fs::path& dir, const metrics::ScoreReport& r) {
  io::write_file(dir / "report.json", metrics::report_to_json(r));
  io::write_file(dir / "report.csv", metrics::report_to_csv(r));
}

void print_summary(std::ostream& out, const metrics::ScoreReport& r) {
  out << r.method << " on " << r.samples.size() << " samples:";
  for (const auto& name : metrics::metric_names()) out << " " << name << " " << r.aggregate.at(name).mean;
  for (const auto& [k, v] : r.extra) out << " " << k << " " << v;
  out << "\n";
}

int cmd_eval(const EvalFlags& f, const Common& c, std::ostream& out) {
  const json cfg = load_config(c.config_path, {"model", "preset"});
  const bool files_mode = !f.estimates.empty() || !f.truth.empty() || !f.mixture.empty();
  if (files_mode == !f.checkpoint.empty()) {
    throw ConfigError("eval needs either --checkpoint with --data, or --estimates, --truth and --mixture");
  }
  metrics::ScoreReport report;
  json resolved;
  if (files_mode) {
    const auto est_files = split_list(f.estimates), truth_files = split_list(f.truth);
    if (est_files.empty() || f.mixture.empty() || est_files.size() != truth_files.size()) {
      throw ConfigError("--estimates and --truth need the same number of files, plus one --mixture file");
    }
    std::vector<std::vector<double>> e, t;
    for (const auto& p : est_files) e.push_back(data::load_spectrum(p).values);
    for (const auto& p : truth_files) t.push_back(data::load_spectrum(p).values);
    const auto mix = data::load_spectrum(f.mixture).values;
    for (const auto& v : e) {
      if (v.size() != mix.size()) throw DimensionError("estimate length " + std::to_string(v.size()) +
                                                       " differs from mixture length " + std::to_string(mix.size()));
    }
    for (const auto& v : t) {
      if (v.size() != mix.size()) throw DimensionError("truth length " + std::to_string(v.size()) +
                                                       " differs from mixture length " + std::to_string(mix.size()));
    }
    report = metrics::build_report("files", {metrics::score_sample(e, t, mix, fs::path(f.mixture).stem().string())});
    resolved = {{"estimates", est_files}, {"truth", truth_files}, {"mixture", f.mixture}};
  } else {
    require_file(f.checkpoint, "checkpoint");
    require_dir(f.data, "dataset directory");
    const auto ckpt = train::load_checkpoint(f.checkpoint);
    if (cfg.contains("model") || cfg.contains("preset")) {
      const auto expected =
          resolve_model(cfg.value("preset", std::string("reference")), cfg.value("model", json()), {}, nullptr);
      train::require_config(ckpt, expected);
    }
    if (f.batch_size < 1) throw ConfigError("--batch-size must be >= 1");
    const auto split = train::load_split(f.data, data::parse_split(f.split));
    if (split.samples.empty()) throw ConfigError("split " + f.split + " is empty");
    report = eval_checkpoint(ckpt, split, f.batch_size);
    resolved = {{"checkpoint", f.checkpoint},
                {"checkpoint_sha256", io::sha256_hex(io::read_file(f.checkpoint))},
                {"config_hash", ckpt.config_hash},
                {"data", f.data},
                {"split", f.split},
                {"batch_size", f.batch_size}};
  }
  fs::create_directories(c.out);
  write_report(c.out, report);
  write_snapshot(c.out, "eval", resolved);
  print_summary(out, report);
  return kOk;
}

// ----------------------------------------------------------------------- unmix

int cmd_unmix(const std::string& checkpoint, const std::string& input, const Common& c, std::ostream& out) {
  require_file(checkpoint, "checkpoint");
  require_file(input, "input spectrum");
  const std::string ckpt_bytes = io::read_file(checkpoint);
  const auto ckpt = train::decode_checkpoint(ckpt_bytes, checkpoint);
  const auto& mc = ckpt.config;
  const auto spec = data::load_spectrum(input);
  if (spec.values.size() != mc.L) {
    throw DimensionError("input " + input + " has length " + std::to_string(spec.values.size()) +
                         " but the model expects L = " + std::to_string(mc.L));
  }
  Tensor<float> y(Shape{1, mc.L});
  for (std::size_t i = 0; i < mc.L; ++i) y.ptr()[i] = static_cast<float>(spec.values[i]);
  NoGradGuard no_grad;
  const auto est = model::forward(Var<float>::constant(y), ckpt.params, mc);
  fs::create_directories(c.out);
  json outputs = json::array();
  for (std::size_t k = 0; k < mc.C; ++k) {
    const float* p = est.value().ptr() + k * mc.L;
    const std::string name = "source_" + std::to_string(k) + ".txt";
    data::write_spectrum(fs::path(c.out) / name, std::vector<double>(p, p + mc.L),
                         "estimated source " + std::to_string(k) + " of " + spec.id);
    outputs.push_back(name);
  }
  const json provenance{{"checkpoint", checkpoint},
                        {"checkpoint_sha256", io::sha256_hex(ckpt_bytes)},
                        {"config_hash", ckpt.config_hash},
                        {"config", json::parse(model::to_json(mc))},
                        {"input", input},
                        {"input_sha256", io::sha256_hex(io::read_file(input))},
                        {"outputs", outputs}};
  write_json(fs::path(c.out) / "provenance.json", provenance);
  write_snapshot(c.out, "unmix", {{"checkpoint", checkpoint}, {"input", input}});
  out << "wrote " << mc.C << " sources to " << c.out << "\n";
  return kOk;
}

// -------------------------------------------------------------------- baseline

struct BaselineFlags {
  std::string method, dictionary, data, split = "test";
  double lambda = 0, mu = 0, tol = 0, threshold = 0, residual_tol = 0;
  std::size_t max_iter = 0, max_atoms = 0;
  bool sum_to_one = false;
  CLI::Option *lambda_opt = nullptr, *mu_opt = nullptr, *tol_opt = nullptr, *threshold_opt = nullptr,
              *residual_tol_opt = nullptr, *max_iter_opt = nullptr, *max_atoms_opt = nullptr,
              *sum_to_one_opt = nullptr;
};

// A directory of spectrum files, or one text file with an atom per line.
sparse::Dictionary load_dictionary(const std::string& path, std::size_t length) {
  if (fs::is_directory(path)) return sparse::make_dictionary(data::load_library(path, length));
  require_file(path, "dictionary");
  std::istringstream in(io::read_file(path));
  std::vector<data::Spectrum> atoms;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    data::Spectrum s;
    double v;
    while (row >> v) s.values.push_back(v);
    if (!row.eof()) throw ParseError(path + ":" + std::to_string(lineno) + ": non-numeric entry");
    char id[32];
    std::snprintf(id, sizeof id, "atom%05zu", atoms.size());
    s.id = id;
    atoms.push_back(data::standardize_length(s, length));
  }
  if (atoms.empty()) throw EmptyInputError("dictionary file " + path + " holds no atoms");
  return sparse::make_dictionary(atoms);
}

int cmd_baseline(const BaselineFlags& f, const Common& c, std::ostream& out) {
  const json cfg = load_config(c.config_path, {"solver"});
  const json sec = cfg.value("solver", json::object());
  const bool is_sunsal = f.method == "sunsal";
  if (!is_sunsal && f.method != "nnomp") throw ConfigError("--method must be sunsal or nnomp");
  // Solver flags that do not apply to the chosen method are conflicts.
  const std::vector<std::pair<CLI::Option*, bool>> scoped{
      {f.lambda_opt, true},     {f.mu_opt, true},           {f.tol_opt, true}, {f.max_iter_opt, true},
      {f.sum_to_one_opt, true}, {f.max_atoms_opt, false}, {f.residual_tol_opt, false}};
  for (const auto& [opt, sunsal_only] : scoped) {
    if (opt->count() && sunsal_only != is_sunsal) {
      throw ConfigError(opt->get_name() + " does not apply to --method " + f.method);
    }
  }
  static const std::set<std::string> sunsal_keys{"lambda", "mu", "tol", "max_iter", "sum_to_one", "threshold"};
  static const std::set<std::string> nnomp_keys{"max_atoms", "residual_tol", "threshold"};
  for (const auto& [key, _] : sec.items()) {
    if (!(is_sunsal ? sunsal_keys : nnomp_keys).count(key)) {
      throw ConfigError("config solver key '" + key + "' does not apply to " + f.method);
    }
  }
  require_dir(f.data, "dataset directory");
  const auto manifest = data::read_manifest(f.data);
  const auto dict = load_dictionary(f.dictionary, manifest.config.length);
  const auto split_id = data::parse_split(f.split);
  const auto split = train::load_split(f.data, split_id);
  if (split.samples.empty()) throw ConfigError("split " + f.split + " is empty");

  std::map<std::string, std::size_t> atom_of;
  for (std::size_t i = 0; i < dict.ids.size(); ++i) atom_of.emplace(dict.ids[i], i);
  std::vector<const data::SampleRecord*> records;
  for (const auto& r : manifest.records) {
    if (r.split == split_id) records.push_back(&r);
  }
  std::vector<std::vector<std::size_t>> truth(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto& id : records[i]->source_ids) {
      const auto it = atom_of.find(id);
      if (it == atom_of.end()) throw ConfigError("true source '" + id + "' is not in the dictionary");
      truth[i].push_back(it->second);
    }
  }

  sparse::SunsalOptions so;
  sparse::NnompOptions no;
  json solver;
  if (is_sunsal) {
    so.lambda = resolve<double>(f.lambda_opt, f.lambda, sec, "lambda", so.lambda);
    so.mu = resolve<double>(f.mu_opt, f.mu, sec, "mu", so.mu);
    so.tol = resolve<double>(f.tol_opt, f.tol, sec, "tol", so.tol);
    so.max_iter = resolve<std::size_t>(f.max_iter_opt, f.max_iter, sec, "max_iter", so.max_iter);
    so.sum_to_one = resolve<bool>(f.sum_to_one_opt, f.sum_to_one, sec, "sum_to_one", so.sum_to_one);
    so.threshold = resolve<double>(f.threshold_opt, f.threshold, sec, "threshold", so.threshold);
    solver = {{"lambda", so.lambda}, {"mu", so.mu},           {"tol", so.tol},
              {"max_iter", so.max_iter}, {"sum_to_one", so.sum_to_one}, {"threshold", so.threshold}};
  } else {
    no.max_atoms = resolve<std::size_t>(f.max_atoms_opt, f.max_atoms, sec, "max_atoms", manifest.config.sources);
    no.residual_tol = resolve<double>(f.residual_tol_opt, f.residual_tol, sec, "residual_tol", no.residual_tol);
    no.threshold = resolve<double>(f.threshold_opt, f.threshold, sec, "threshold", no.threshold);
    solver = {{"max_atoms", no.max_atoms}, {"residual_tol", no.residual_tol}, {"threshold", no.threshold}};
  }

  const std::size_t n = split.samples.size();
  std::vector<metrics::SampleScore> scores(n);
  std::vector<char> missed(n), converged(n);
  std::vector<std::size_t> support_size(n);
  std::vector<std::string> failures(n);
  // Samples are independent; results land in fixed slots, so order is stable.
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const auto& s = split.samples[i];
      const auto mix = as_double(s.mixed);
      const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(mix.data(), static_cast<Eigen::Index>(mix.size()));
      const auto sol = is_sunsal ? sparse::sunsal(dict, y, so) : sparse::nnomp(dict, y, no);
      missed[i] = sparse::support_misses(sol, truth[i]);
      converged[i] = sol.converged;
      support_size[i] = sol.support.size();
      std::vector<std::vector<double>> t;
      for (const auto& src : s.sources) t.push_back(as_double(src));
      scores[i] = metrics::score_sample(sparse::top_estimates(dict, sol, t.size()), t, mix, split.ids[i]);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i].empty()) throw NumericalError("sample " + split.ids[i] + ": " + failures[i]);
  }
  auto report = metrics::build_report(f.method, std::move(scores));
  const double dn = static_cast<double>(n);
  report.extra["support_error_rate"] = std::accumulate(missed.begin(), missed.end(), 0.0) / dn;
  report.extra["converged_fraction"] = std::accumulate(converged.begin(), converged.end(), 0.0) / dn;
  report.extra["mean_support_size"] = std::accumulate(support_size.begin(), support_size.end(), 0.0) / dn;
  report.extra["dictionary_atoms"] = static_cast<double>(dict.size());

  fs::create_directories(c.out);
  write_report(c.out, report);
  write_snapshot(c.out, "baseline",
                 {{"method", f.method}, {"dictionary", f.dictionary}, {"data", f.data}, {"split", f.split},
                  {"solver", solver}});
  print_summary(out, report);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"rssnet: Raman spectral separation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common c_lib, c_gen, c_train, c_eval, c_unmix, c_base;

  std::size_t lib_count = 20, lib_length = 1024;
  auto* mk = app.add_subcommand("make-library", "Write synthetic Lorentzian-peak spectra");
  add_common(mk, c_lib);
  mk->add_option("--count", lib_count, "Number of spectra");
  mk->add_option("--length", lib_length, "Samples per spectrum");

  GenFlags gf;
  auto* gen = app.add_subcommand("gen-data", "Generate a seeded mixture dataset from a spectral library");
  add_common(gen, c_gen);
  gen->add_option("--library", gf.library, "Directory of pure spectra")->required();
  gf.length_opt = gen->add_option("--length", gf.length, "Standardized spectrum length");
  gf.sizes_opt = gen->add_option("--sizes", gf.sizes, "train,val,test sample counts");
  gf.snr_opt = gen->add_option("--snr", gf.snr, "min,max SNR in dB");
  gf.alpha_opt = gen->add_option("--alpha", gf.alpha, "min,max mixing factor");
  gf.name_opt = gen->add_option("--name", gf.name, "Dataset name");

  TrainFlags tf;
  auto* tr = app.add_subcommand("train", "Train RSSNet on a dataset");
  add_common(tr, c_train);
  tr->add_option("--data", tf.data, "Dataset directory")->required();
  tf.preset_opt = tr->add_option("--preset", tf.preset, "Model preset: reference or desk");
  tr->add_option("--ablation", tf.ablations, "key=value model override, e.g. dwconv-path=p2");
  tf.epochs_opt = tr->add_option("--epochs", tf.epochs);
  tf.batch_opt = tr->add_option("--batch-size", tf.batch_size);
  tf.eval_opt = tr->add_option("--eval-every", tf.eval_every);
  tf.lr_opt = tr->add_option("--lr", tf.lr);
  tf.clip_opt = tr->add_option("--clip-norm", tf.clip_norm);
  tr->add_flag("--resume", tf.resume, "Continue from OUT/last.ckpt");

  EvalFlags ef;
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on a split, or score estimate files");
  add_common(ev, c_eval);
  ev->add_option("--checkpoint", ef.checkpoint);
  ev->add_option("--data", ef.data, "Dataset directory");
  ev->add_option("--split", ef.split, "train, val or test");
  ev->add_option("--batch-size", ef.batch_size);
  ev->add_option("--estimates", ef.estimates, "Comma-separated estimate files");
  ev->add_option("--truth", ef.truth, "Comma-separated ground-truth files");
  ev->add_option("--mixture", ef.mixture, "Mixture file");

  std::string un_ckpt, un_input;
  auto* un = app.add_subcommand("unmix", "Separate one spectrum file");
  add_common(un, c_unmix);
  un->add_option("--checkpoint", un_ckpt)->required();
  un->add_option("--input", un_input)->required();

  BaselineFlags bf;
  auto* bl = app.add_subcommand("baseline", "Run SUnSAL or NNOMP over a split");
  add_common(bl, c_base);
  bl->add_option("--method", bf.method, "sunsal or nnomp")->required();
  bl->add_option("--dictionary", bf.dictionary, "Directory of spectra or packed atom-per-line file")->required();
  bl->add_option("--data", bf.data, "Dataset directory")->required();
  bl->add_option("--split", bf.split);
  bf.lambda_opt = bl->add_option("--lambda", bf.lambda);
  bf.mu_opt = bl->add_option("--mu", bf.mu);
  bf.tol_opt = bl->add_option("--tol", bf.tol);
  bf.max_iter_opt = bl->add_option("--max-iter", bf.max_iter);
  bf.sum_to_one_opt = bl->add_flag("--sum-to-one", bf.sum_to_one);
  bf.threshold_opt = bl->add_option("--threshold", bf.threshold);
  bf.max_atoms_opt = bl->add_option("--max-atoms", bf.max_atoms);
  bf.residual_tol_opt = bl->add_option("--residual-tol", bf.residual_tol);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*mk) return cmd_make_library(lib_count, lib_length, c_lib, out);
    if (*gen) return cmd_gen_data(gf, c_gen, out, err);
    if (*tr) return cmd_train(tf, c_train, out);
    if (*ev) return cmd_eval(ef, c_eval, out);
    if (*un) return cmd_unmix(un_ckpt, un_input, c_unmix, out);
    if (*bl) return cmd_baseline(bf, c_base, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kInternal;
}

}  // namespace rssnet::cli
