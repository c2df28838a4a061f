// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/train/checkpoint.hpp"

#include "rssnet/io/binary.hpp"
#include "rssnet/io/hash.hpp"

namespace rssnet::train {

namespace {

constexpr std::string_view kMagic = "RSSNCKPT";

void write_array(io::ByteWriter& w, const Tensor<float>& t) {
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.u64(d);
  w.array<float>(t.data());
}

Tensor<float> read_array(io::ByteReader& r) {
  const std::uint32_t rank = r.u32();
  if (rank == 0 || rank > 8) throw ParseError("checkpoint: implausible array rank " + std::to_string(rank));
  Shape shape(rank);
  std::size_t n = 1;
  for (auto& d : shape) {
    d = r.u64();
    if (d == 0 || d > (std::size_t{1} << 32)) throw ParseError("checkpoint: implausible dimension");
    n *= d;
  }
  if (n * sizeof(float) > r.remaining()) throw ParseError("checkpoint: array exceeds file size");
  Tensor<float> t(shape);
  r.array<float>(t.data());
  return t;
}

}  // namespace

std::string encode_checkpoint(const model::RssNetConfig& config, const model::ParamStore<float>& params,
                              const AdamState<float>* adam, const std::string& progress) {
  // Refuse to write what decode would reject.
  model::check_layout(config, params);
  io::ByteWriter w;
  w.tag(kMagic);
  w.u32(kCheckpointVersion);
  w.str(model::config_hash(config));
  w.str(model::to_json(config));
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, v] : params.entries()) {
    w.str(name);
    write_array(w, v.value());
  }
  w.u32(adam ? 1 : 0);
  if (adam) {
    if (!adam->m.empty() && adam->m.size() != params.size()) {
      throw ContractError("checkpoint: optimizer state does not match the parameter set");
    }
    w.f64(adam->beta1);
    w.f64(adam->beta2);
    w.f64(adam->eps);
    w.u64(adam->step);
    w.u32(static_cast<std::uint32_t>(adam->m.size()));
    for (std::size_t i = 0; i < adam->m.size(); ++i) {
      write_array(w, adam->m[i]);
      write_array(w, adam->v[i]);
    }
  }
  w.str(progress);
  const io::Digest d = io::sha256(w.buffer());
  w.bytes(d.data(), d.size());
  return w.release();
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& what) {
  if (bytes.size() < kMagic.size() + 32) throw ParseError(what + ": truncated");
  io::ByteReader head(bytes, what);
  head.expect_tag(kMagic);
  const std::string_view body(bytes.data(), bytes.size() - 32);
  const io::Digest actual = io::sha256(body);
  if (std::memcmp(actual.data(), bytes.data() + body.size(), 32) != 0) {
    throw ChecksumError(what + ": checksum mismatch, file is corrupted");
  }
  io::ByteReader r(body, what);
  r.expect_tag(kMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CompatibilityError(what + ": format version " + std::to_string(version) + ", expected " +
                             std::to_string(kCheckpointVersion));
  }
  Checkpoint c;
  c.config_hash = r.str();
  c.config = model::config_from_json(r.str());
  if (model::config_hash(c.config) != c.config_hash) {
    throw CompatibilityError(what + ": stored config hash " + c.config_hash + " does not match its config (" +
                             model::config_hash(c.config) + ")");
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    c.params.add(std::move(name), read_array(r));
  }
  model::check_layout(c.config, c.params);
  if (r.u32() != 0) {
    AdamState<float> a;
    a.beta1 = r.f64();
    a.beta2 = r.f64();
    a.eps = r.f64();
    a.step = r.u64();
    const std::uint32_t pairs = r.u32();
    if (pairs != 0 && pairs != count) throw ParseError(what + ": optimizer state does not match parameters");
    for (std::uint32_t i = 0; i < pairs; ++i) {
      a.m.push_back(read_array(r));
      a.v.push_back(read_array(r));
      const Shape& want = c.params.entries()[i].second.shape();
      if (a.m.back().shape() != want || a.v.back().shape() != want) {
        throw ParseError(what + ": moment shape mismatch for '" + c.params.entries()[i].first + "'");
      }
    }
    c.adam = std::move(a);
  }
  c.progress = r.str();
  if (r.remaining() != 0) throw ParseError(what + ": trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const model::RssNetConfig& config,
                     const model::ParamStore<float>& params, const AdamState<float>* adam,
                     const std::string& progress) {
  io::write_file(path, encode_checkpoint(config, params, adam, progress));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

void require_config(const Checkpoint& ckpt, const model::RssNetConfig& expected) {
  const std::string want = model::config_hash(expected);
  if (ckpt.config_hash != want) {
    throw CompatibilityError("checkpoint config hash " + ckpt.config_hash + " does not match model config hash " +
                             want);
  }
}

}  // namespace rssnet::train
