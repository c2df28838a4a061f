// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Checkpoint file: named float32 arrays, the model config and its hash, an
// optional Adam section, a free-form progress document, and a trailing
// SHA-256 over everything before it. Layout in docs/formats.md.

#include <filesystem>
#include <optional>
#include <string>

#include "rssnet/model/config.hpp"
#include "rssnet/model/params.hpp"
#include "rssnet/train/optim.hpp"

namespace rssnet::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  model::RssNetConfig config;
  std::string config_hash;
  model::ParamStore<float> params;
  std::optional<AdamState<float>> adam;
  std::string progress;  // JSON text, "{}" when absent
};

std::string encode_checkpoint(const model::RssNetConfig& config, const model::ParamStore<float>& params,
                              const AdamState<float>* adam, const std::string& progress = "{}");

// ChecksumError on digest mismatch, CompatibilityError on a foreign magic or
// version, ParseError on truncation.
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& what = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const model::RssNetConfig& config,
                     const model::ParamStore<float>& params, const AdamState<float>* adam,
                     const std::string& progress = "{}");
Checkpoint load_checkpoint(const std::filesystem::path& path);

// CompatibilityError quoting both hashes unless the checkpoint was written
// for `expected`.
void require_config(const Checkpoint& ckpt, const model::RssNetConfig& expected);

}  // namespace rssnet::train
