#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "falldet/nn/tensor.hpp"

namespace falldet::nn {

/// One value in the computation graph.
struct Node {
  Tensor value;
  Tensor grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  /// Allocates a zero gradient buffer if absent and returns it.
  Tensor& grad_buffer();
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  /// Gradient buffer (allocated, zero-filled, on first access).
  Tensor& grad() { return node_->grad_buffer(); }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  /// Reverse-mode sweep from this node, which must hold a single element.
  void backward();
  /// Reverse-mode sweep seeded with `seed` (same shape as the value).
  void backward(const Tensor& seed);

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Builds a result node. The graph edge is recorded only when gradient
/// tracking is enabled and at least one parent requires a gradient.
Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

}  // namespace falldet::nn
