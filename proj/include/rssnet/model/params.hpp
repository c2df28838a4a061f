// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rssnet/model/config.hpp"
#include "rssnet/tensor/autograd.hpp"

namespace rssnet::model {

// Ordered collection of named trainable arrays.
template <typename T>
class ParamStore {
 public:
  using Entry = std::pair<std::string, Var<T>>;

  Var<T>& add(std::string name, Tensor<T> value) {
    if (index_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), Var<T>::leaf(std::move(value), true));
    return entries_.back().second;
  }

  const Var<T>& get(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("no parameter named '" + name + "'");
    return entries_[it->second].second;
  }
  Var<T>& get(const std::string& name) {
    return const_cast<Var<T>&>(static_cast<const ParamStore&>(*this).get(name));
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry>& entries() noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : entries_) n += v.size();
    return n;
  }

  void zero_grad() {
    for (auto& [_, v] : entries_) v.zero_grad();
  }

  // Fresh leaves holding converted copies of every array.
  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, v] : entries_) out.add(name, v.value().template cast<U>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class InitKind { kKaimingUniform, kZeros, kOnes, kPreluSlope };

struct ParamSpec {
  std::string name;
  Shape shape;
  InitKind init = InitKind::kZeros;
  std::size_t fan_in = 1;  // for kKaimingUniform
};

// Every trainable array the config implies, in a fixed order.
std::vector<ParamSpec> parameter_layout(const RssNetConfig& c);

// Closed-form count from the layout; allocates nothing.
std::size_t count_params(const RssNetConfig& c);

template <typename T>
std::size_t count_params(const ParamStore<T>& p) {
  return p.count();
}

// Kaiming-style uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero
// biases, unit norm gains, PReLU slopes 0.25. Deterministic in `seed`.
template <typename T>
ParamStore<T> init_params(const RssNetConfig& c, std::uint64_t seed);

// Throws CompatibilityError unless `p` holds exactly the layout's names and shapes.
template <typename T>
void check_layout(const RssNetConfig& c, const ParamStore<T>& p);

// Name prefixes used by the forward pass.
std::string block_prefix(const RssNetConfig& c, std::size_t iteration);
std::string fusion_prefix(const RssNetConfig& c, std::size_t iteration);

}  // namespace rssnet::model
