// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rssnet/model/params.hpp"

#include <cmath>
#include <random>

#include "rssnet/io/hash.hpp"

namespace rssnet::model {

namespace {

void add_kaiming(std::vector<ParamSpec>& out, const std::string& name, Shape shape, std::size_t fan_in) {
  out.push_back({name, std::move(shape), InitKind::kKaimingUniform, fan_in});
}
void add_const(std::vector<ParamSpec>& out, const std::string& name, Shape shape, InitKind kind) {
  out.push_back({name, std::move(shape), kind, 1});
}

void add_linear(std::vector<ParamSpec>& out, const std::string& p, std::size_t in, std::size_t outf) {
  add_kaiming(out, p + ".weight", {outf, in}, in);
  add_const(out, p + ".bias", {outf}, InitKind::kZeros);
}

void add_norm(std::vector<ParamSpec>& out, const std::string& p, std::size_t width) {
  add_const(out, p + ".gain", {width}, InitKind::kOnes);
  add_const(out, p + ".bias", {width}, InitKind::kZeros);
}

void add_tda(std::vector<ParamSpec>& out, const RssNetConfig& c, const std::string& p) {
  const std::size_t n = c.N, d = c.d_model;
  for (std::size_t j = 1; j <= c.S; ++j) {
    const std::string q = p + ".down" + std::to_string(j);
    add_kaiming(out, q + ".weight", {n, 5}, 5);
    add_const(out, q + ".bias", {n}, InitKind::kZeros);
    add_norm(out, q + ".gln", n);
  }
  add_linear(out, p + ".ga.in", n, d);
  add_norm(out, p + ".ga.ln1", d);
  for (const char* proj : {"q", "k", "v", "o"}) add_linear(out, p + ".ga.attn." + proj, d, d);
  add_norm(out, p + ".ga.ln2", d);
  add_linear(out, p + ".ga.ffn1", d, c.ffn_dim);
  add_linear(out, p + ".ga.ffn2", c.ffn_dim, d);
  add_linear(out, p + ".ga.out", d, n);
  for (std::size_t j = 0; j < c.S; ++j) {
    const std::string q = p + ".la" + std::to_string(j);
    add_linear(out, q + ".rho", n, n);
    add_linear(out, q + ".b", n, n);
  }
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string block_prefix(const RssNetConfig& c, std::size_t iteration) {
  return c.weight_sharing ? "block" : "block" + std::to_string(iteration);
}

std::string fusion_prefix(const RssNetConfig& c, std::size_t iteration) {
  return c.weight_sharing ? "fusion" : "fusion" + std::to_string(iteration);
}

std::vector<ParamSpec> parameter_layout(const RssNetConfig& c) {
  c.validate();
  std::vector<ParamSpec> out;
  const std::size_t n = c.N, k = c.enc_kernel;
  add_kaiming(out, "encoder.conv.weight", {n, 1, k}, k);
  add_const(out, "encoder.conv.bias", {n}, InitKind::kZeros);
  add_norm(out, "encoder.gln", n);
  add_const(out, "encoder.prelu.slope", {n}, InitKind::kPreluSlope);

  const std::size_t blocks = c.weight_sharing ? 1 : c.iter;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::string p = block_prefix(c, b);
    add_tda(out, c, p + ".intra");
    add_tda(out, c, p + ".inter");
    if (c.dwconv_path != DwconvPath::kNone) {
      const std::size_t dk = c.dwconv_kernel;
      add_kaiming(out, p + ".path.weight", {n, dk, dk}, dk * dk);
      add_const(out, p + ".path.bias", {n}, InitKind::kZeros);
    }
  }
  const std::size_t fusions = c.iter < 2 ? 0 : (c.weight_sharing ? 1 : c.iter - 1);
  for (std::size_t f = 0; f < fusions; ++f) add_linear(out, fusion_prefix(c, f), n, n);

  add_const(out, "mask.prelu.slope", {n}, InitKind::kPreluSlope);
  add_linear(out, "mask.conv", n, c.C * n);
  add_kaiming(out, "decoder.weight", {n, 1, k}, k);
  return out;
}

std::size_t count_params(const RssNetConfig& c) {
  std::size_t total = 0;
  for (const auto& s : parameter_layout(c)) total += numel(s.shape);
  return total;
}

template <typename T>
ParamStore<T> init_params(const RssNetConfig& c, std::uint64_t seed) {
  ParamStore<T> store;
  for (const auto& spec : parameter_layout(c)) {
    Tensor<T> t(spec.shape);
    switch (spec.init) {
      case InitKind::kZeros: break;
      case InitKind::kOnes: t.fill(T{1}); break;
      case InitKind::kPreluSlope: t.fill(static_cast<T>(0.25)); break;
      case InitKind::kKaimingUniform: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
        std::mt19937_64 rng(io::derive_seed(seed, name_hash(spec.name), 0x494e4954 /* "INIT" */));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& v : t.data()) v = static_cast<T>(u(rng));
        break;
      }
    }
    store.add(spec.name, std::move(t));
  }
  return store;
}

template <typename T>
void check_layout(const RssNetConfig& c, const ParamStore<T>& p) {
  const auto layout = parameter_layout(c);
  if (layout.size() != p.size()) {
    throw CompatibilityError("parameter set has " + std::to_string(p.size()) + " arrays, config implies " +
                             std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, v] = p.entries()[i];
    if (name != layout[i].name || v.shape() != layout[i].shape) {
      throw CompatibilityError("parameter " + std::to_string(i) + " is '" + name + "' " + rssnet::to_string(v.shape()) +
                               ", config implies '" + layout[i].name + "' " + rssnet::to_string(layout[i].shape));
    }
  }
}

template ParamStore<float> init_params<float>(const RssNetConfig&, std::uint64_t);
template ParamStore<double> init_params<double>(const RssNetConfig&, std::uint64_t);
template void check_layout<float>(const RssNetConfig&, const ParamStore<float>&);
template void check_layout<double>(const RssNetConfig&, const ParamStore<double>&);

}  // namespace rssnet::model
