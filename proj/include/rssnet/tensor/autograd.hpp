// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Reverse-mode differentiation over a dynamically recorded graph.
//
// Every differentiable op returns a Var whose Node keeps its inputs and a
// closure that maps the output gradient to input-gradient contributions.
// backward() orders the reachable nodes topologically (inputs first) and
// replays the closures in reverse. Leaves accumulate; interior gradients are
// released once consumed.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rssnet/tensor/tensor.hpp"

namespace rssnet {

template <typename T>
struct Node;

// Receives the output gradient and the op's own forward value; adds the
// contribution for input i into *grad_in[i], which is null when input i does
// not require a gradient.
template <typename T>
using BackwardFn = std::function<void(const Tensor<T>& grad_out, const Tensor<T>& out,
                                      std::span<Tensor<T>* const> grad_in)>;

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> inputs;
  BackwardFn<T> backward;
  const char* op = "leaf";

  bool is_leaf() const noexcept { return !backward; }

  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

namespace detail {
inline thread_local bool grad_enabled = true;
}

inline bool grad_mode_enabled() noexcept { return detail::grad_enabled; }

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() noexcept : previous_(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var leaf(Tensor<T> value, bool requires_grad) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return Var(std::move(node));
  }
  static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

  bool defined() const noexcept { return static_cast<bool>(node_); }
  explicit operator bool() const noexcept { return defined(); }

  const Tensor<T>& value() const { return node_->value; }
  // Direct access for optimizers and checkpoint loading; bypasses the graph.
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const char* op() const { return node_->op; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  // Gradient after backward(); zeros if the loss never reached this node.
  Tensor<T> grad() const {
    if (node_->grad.empty()) return Tensor<T>(node_->value.shape());
    return node_->grad;
  }
  Tensor<T>& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.fill(T{0});
  }

  T item() const {
    if (node_->value.size() != 1) {
      throw ContractError("item() needs a single-element tensor, got " + to_string(shape()));
    }
    return node_->value[0];
  }

  const std::shared_ptr<Node<T>>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Records an op result. Inputs that are undefined Vars (optional operands such
// as a missing bias) are skipped.
template <typename T>
Var<T> make_op(Tensor<T> value, const std::vector<Var<T>>& inputs, const char* op, BackwardFn<T> fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  if (grad_mode_enabled()) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(fn);
  }
  return Var<T>(std::move(node));
}

// Ordered record of the nodes reachable from an output: every node appears
// after all of its inputs.
template <typename T>
struct Graph {
  std::vector<Node<T>*> nodes;
  Node<T>* output = nullptr;
};

template <typename T>
Graph<T> trace(const Var<T>& output) {
  Graph<T> graph;
  graph.output = output.node().get();
  if (!output.requires_grad()) {
    graph.nodes.push_back(graph.output);
    return graph;
  }
  std::unordered_set<const Node<T>*> visited;
  // Iterative post-order DFS; deterministic because inputs are visited in order.
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(graph.output, 0);
  visited.insert(graph.output);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child && child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      graph.nodes.push_back(node);
      stack.pop_back();
    }
  }
  return graph;
}

template <typename T>
void backward(const Var<T>& loss) {
  if (!loss.defined() || loss.value().size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) return;
  Graph<T> graph = trace(loss);
  graph.output->grad_buffer().fill(T{1});
  std::vector<Tensor<T>*> grad_in;
  for (auto it = graph.nodes.rbegin(); it != graph.nodes.rend(); ++it) {
    Node<T>* node = *it;
    if (node->is_leaf() || node->grad.empty()) continue;
    grad_in.assign(node->inputs.size(), nullptr);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      auto& in = node->inputs[i];
      if (in && in->requires_grad) grad_in[i] = &in->grad_buffer();
    }
    node->backward(node->grad, node->value, grad_in);
    node->grad = Tensor<T>();
  }
}

}  // namespace rssnet
