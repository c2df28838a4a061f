// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rssnet/io/binary.hpp"
#include "rssnet/io/hash.hpp"
#include "rssnet/metrics/metrics.hpp"
#include "rssnet/model/rssnet.hpp"
#include "rssnet/train/checkpoint.hpp"
#include "rssnet/train/loss.hpp"
#include "rssnet/train/optim.hpp"

namespace rssnet::train {

using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kShuffleTag = 0x53485546;  // "SHUF"
constexpr std::uint64_t kDropoutTag = 0x44524f50;  // "DROP"
constexpr std::uint64_t kInitTag = 0x4d4f444c;     // "MODL"

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double from_nullable(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json record_json(const EpochRecord& r, bool with_time) {
  json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = nullable(r.train_loss);
  j["val_si_snr"] = nullable(r.val_si_snr);
  j["val_si_snri"] = nullable(r.val_si_snri);
  j["val_loss"] = nullable(r.val_loss);
  if (with_time) j["wall_time"] = r.wall_time;
  return j;
}

EpochRecord record_from(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.train_loss = from_nullable(j.at("train_loss"));
  r.val_si_snr = from_nullable(j.at("val_si_snr"));
  r.val_si_snri = from_nullable(j.at("val_si_snri"));
  r.val_loss = from_nullable(j.at("val_loss"));
  if (j.contains("wall_time")) r.wall_time = j.at("wall_time").get<double>();
  return r;
}

// Fisher-Yates on raw 64-bit draws so the order does not depend on the
// standard library's distribution implementations.
void shuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

struct Batch {
  Tensor<float> mixed;    // [B, L]
  Tensor<float> targets;  // [B, C, L]
};

Batch make_batch(const LabeledSplit& split, const std::vector<std::size_t>& order, std::size_t begin,
                 std::size_t end, const model::RssNetConfig& c) {
  const std::size_t B = end - begin;
  Batch b{Tensor<float>(Shape{B, c.L}), Tensor<float>(Shape{B, c.C, c.L})};
  for (std::size_t i = 0; i < B; ++i) {
    const auto& s = split.samples[order[begin + i]];
    if (s.mixed.size() != c.L || s.sources.size() != c.C) {
      throw DimensionError("sample " + split.ids[order[begin + i]] + " has length " + std::to_string(s.mixed.size()) +
                           " and " + std::to_string(s.sources.size()) + " sources; model expects L=" +
                           std::to_string(c.L) + ", C=" + std::to_string(c.C));
    }
    std::copy(s.mixed.begin(), s.mixed.end(), b.mixed.ptr() + i * c.L);
    for (std::size_t k = 0; k < c.C; ++k) {
      std::copy(s.sources[k].begin(), s.sources[k].end(), b.targets.ptr() + (i * c.C + k) * c.L);
    }
  }
  return b;
}

std::string progress_json(std::size_t epoch, std::size_t best_epoch, double best, const std::vector<EpochRecord>& log) {
  json j;
  j["epoch"] = epoch;
  j["best_epoch"] = best_epoch;
  j["best_val_si_snri"] = nullable(best);
  json records = json::array();
  for (const auto& r : log) records.push_back(record_json(r, false));
  j["log"] = std::move(records);
  return j.dump();
}

void write_log(const std::filesystem::path& path, const std::vector<EpochRecord>& log) {
  std::string text;
  for (const auto& r : log) text += to_json_line(r);
  io::write_file(path, text);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
}

std::string to_json(const TrainConfig& c) {
  json j{{"lr", c.lr},         {"clip_norm", c.clip_norm}, {"epochs", c.epochs},
         {"batch_size", c.batch_size}, {"seed", c.seed},  {"eval_every", c.eval_every}};
  return j.dump(2) + "\n";
}

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("training config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  static const std::set<std::string> known = {"lr", "clip_norm", "epochs", "batch_size", "seed", "eval_every"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("training config: unknown key '" + key + "'");
  }
  TrainConfig c;
  try {
    if (j.contains("lr")) c.lr = j["lr"].get<double>();
    if (j.contains("clip_norm")) c.clip_norm = j["clip_norm"].get<double>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("eval_every")) c.eval_every = j["eval_every"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string to_json_line(const EpochRecord& r) { return record_json(r, true).dump() + "\n"; }

EpochRecord epoch_record_from_json(const std::string& line) {
  try {
    return record_from(json::parse(line));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed epoch record: ") + e.what());
  }
}

LabeledSplit load_split(const std::filesystem::path& dataset_dir, data::Split split) {
  const auto manifest = data::read_manifest(dataset_dir);
  LabeledSplit out;
  out.samples = data::read_split(dataset_dir, split);
  for (const auto& r : manifest.records) {
    if (r.split == split) out.ids.push_back(std::to_string(r.index));
  }
  if (out.ids.size() != out.samples.size()) {
    throw InvariantError(std::string(data::split_name(split)) + " split holds " + std::to_string(out.samples.size()) +
                         " samples but the manifest lists " + std::to_string(out.ids.size()));
  }
  return out;
}

ValidationScore evaluate_split(const model::ParamStore<float>& params, const model::RssNetConfig& config,
                               const LabeledSplit& split, std::size_t batch_size) {
  if (split.samples.empty()) throw ContractError("evaluate_split: empty split");
  NoGradGuard no_grad;
  std::vector<std::size_t> order(split.samples.size());
  std::iota(order.begin(), order.end(), 0);
  double snr = 0.0, snri = 0.0;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    const Batch b = make_batch(split, order, begin, end, config);
    const auto est = model::forward(Var<float>::constant(b.mixed), params, config);
    const auto pit = pit_si_snr_loss(est, b.targets);
    for (std::size_t i = 0; i < end - begin; ++i) {
      const auto& s = split.samples[begin + i];
      const std::vector<double> mix(s.mixed.begin(), s.mixed.end());
      double base = 0.0;
      for (const auto& src : s.sources) {
        const std::vector<double> ref(src.begin(), src.end());
        base += metrics::si_snr(mix, ref);
      }
      base /= static_cast<double>(s.sources.size());
      snr += pit.sample_si_snr[i];
      snri += pit.sample_si_snr[i] - base;
    }
  }
  const double n = static_cast<double>(split.samples.size());
  return {snr / n, snri / n};
}

TrainResult train(const model::RssNetConfig& mc, const TrainConfig& config, const LabeledSplit& train_set,
                  const LabeledSplit& val_set, const TrainOptions& options) {
  mc.validate();
  config.validate();
  if (train_set.samples.empty()) throw ConfigError("training split is empty");
  if (val_set.samples.empty()) throw ConfigError("validation split is empty");
  const bool write = !options.out_dir.empty();
  if (write) std::filesystem::create_directories(options.out_dir);
  const auto log_path = options.out_dir / "train_log.jsonl";
  const auto last_path = options.out_dir / "last.ckpt";
  const auto best_path = options.out_dir / "best.ckpt";

  TrainResult result;
  model::ParamStore<float> params = model::init_params<float>(mc, io::derive_seed(config.seed, 0, kInitTag));
  AdamState<float> adam;
  std::size_t start_epoch = 1;
  double time_offset = 0.0;

  if (options.resume) {
    if (!write) throw ConfigError("resume needs an output directory");
    Checkpoint ckpt = load_checkpoint(last_path);
    require_config(ckpt, mc);
    if (!ckpt.adam) throw CompatibilityError(last_path.string() + " carries no optimizer state");
    params = std::move(ckpt.params);
    adam = std::move(*ckpt.adam);
    const json p = json::parse(ckpt.progress);
    start_epoch = p.at("epoch").get<std::size_t>() + 1;
    result.best_epoch = p.at("best_epoch").get<std::size_t>();
    if (!p.at("best_val_si_snri").is_null()) result.best_val_si_snri = p.at("best_val_si_snri").get<double>();
    for (const auto& r : p.at("log")) result.log.push_back(record_from(r));
    // Wall times live only in the log file.
    if (std::filesystem::exists(log_path)) {
      std::istringstream lines(io::read_file(log_path));
      std::string line;
      for (std::size_t i = 0; std::getline(lines, line) && i < result.log.size(); ++i) {
        if (!line.empty()) result.log[i].wall_time = epoch_record_from_json(line).wall_time;
      }
    }
    if (!result.log.empty()) time_offset = result.log.back().wall_time;
    if (result.best_epoch > 0) {
      Checkpoint best = load_checkpoint(best_path);
      require_config(best, mc);
      result.best_params = std::move(best.params);
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t step = adam.step;
  std::vector<std::size_t> order(train_set.samples.size());
  for (std::size_t epoch = start_epoch; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, io::derive_seed(config.seed, epoch, kShuffleTag));
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const Batch b = make_batch(train_set, order, begin, end, mc);
      std::mt19937_64 dropout_rng(io::derive_seed(config.seed, step, kDropoutTag));
      params.zero_grad();
      model::ForwardOptions fo;
      fo.training = true;
      fo.rng = &dropout_rng;
      const auto est = model::forward(Var<float>::constant(b.mixed), params, mc, fo);
      const auto pit = pit_si_snr_loss(est, b.targets);
      const double loss = static_cast<double>(pit.loss.item());
      if (!std::isfinite(loss)) {
        std::string ids;
        for (std::size_t i = begin; i < end; ++i) ids += (ids.empty() ? "" : ",") + train_set.ids[order[i]];
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                             "; batch samples [" + ids + "]");
      }
      backward(pit.loss);
      clip_grad_norm(params, config.clip_norm);
      adam_step(params, adam, config.lr);
      ++step;
      loss_sum += loss * static_cast<double>(end - begin);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      const auto v = evaluate_split(params, mc, val_set, config.batch_size);
      rec.val_si_snr = v.si_snr;
      rec.val_si_snri = v.si_snri;
      rec.val_loss = -v.si_snr;
      if (v.si_snri > result.best_val_si_snri) {
        result.best_val_si_snri = v.si_snri;
        result.best_epoch = epoch;
        result.best_params = params.cast<float>();
        if (write) {
          json p{{"epoch", epoch}, {"val_si_snr", v.si_snr}, {"val_si_snri", v.si_snri}};
          save_checkpoint(best_path, mc, params, nullptr, p.dump());
        }
      }
    }
    rec.wall_time = time_offset + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
    if (write) {
      save_checkpoint(last_path, mc, params, &adam,
                      progress_json(epoch, result.best_epoch, result.best_val_si_snri, result.log));
      write_log(log_path, result.log);
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  return result;
}

}  // namespace rssnet::train
