// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "rssnet/data/dataset.hpp"
#include "rssnet/model/config.hpp"
#include "rssnet/model/params.hpp"

namespace rssnet::train {

struct TrainConfig {
  double lr = 1e-3;
  double clip_norm = 5.0;
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;  // validation every n-th epoch and always after the last

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::string to_json(const TrainConfig& c);
// Missing keys keep defaults; unknown keys are a ConfigError.
TrainConfig train_config_from_json(const std::string& text);

struct LabeledSplit {
  std::vector<data::Sample> samples;
  std::vector<std::string> ids;  // provenance for error messages and reports
};

// Loads a split and labels each sample with its manifest record index.
LabeledSplit load_split(const std::filesystem::path& dataset_dir, data::Split split);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  // Validation fields are NaN for epochs without evaluation.
  double val_si_snr = std::numeric_limits<double>::quiet_NaN();
  double val_si_snri = std::numeric_limits<double>::quiet_NaN();
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double wall_time = 0.0;  // seconds since the run (not the resume) started
};

std::string to_json_line(const EpochRecord& r);
EpochRecord epoch_record_from_json(const std::string& line);

struct TrainOptions {
  // Receives train_log.jsonl, best.ckpt (best validation SI-SNRi) and last.ckpt
  // (resume point). Empty: nothing is written.
  std::filesystem::path out_dir;
  // Continue from out_dir/last.ckpt.
  bool resume = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_val_si_snri = -std::numeric_limits<double>::infinity();
  model::ParamStore<float> best_params;
};

struct ValidationScore {
  double si_snr = 0.0;
  double si_snri = 0.0;
};

// Eval-mode PIT scoring of a split.
ValidationScore evaluate_split(const model::ParamStore<float>& params, const model::RssNetConfig& config,
                               const LabeledSplit& split, std::size_t batch_size);

// Shuffled epochs of forward, PIT loss, backward, clipping and Adam. The
// shuffle and dropout streams derive from TrainConfig::seed, so a run is a
// pure function of its inputs. NumericalError names the batch's sample ids
// when the loss turns non-finite.
TrainResult train(const model::RssNetConfig& model_config, const TrainConfig& config, const LabeledSplit& train_set,
                  const LabeledSplit& val_set, const TrainOptions& options = {});

}  // namespace rssnet::train
