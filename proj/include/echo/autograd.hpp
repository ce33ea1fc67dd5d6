#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "echo/tensor.hpp"

namespace echo {

template <typename T>
struct Node;

/// Reverse-mode rule: reads `self.grad` and accumulates into `self.parents`.
template <typename T>
using BackwardFn = std::function<void(Node<T>& self)>;

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn<T> backward_fn;
  const char* op = "leaf";

  /// grad += g, allocating zeros on first use.
  void accumulate(const Tensor<T>& g);
  /// Mutable gradient buffer, allocated as zeros on first use.
  Tensor<T>& grad_buffer();
};

/// Handle to a graph node. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad = Tensor<T>(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::int64_t dim(int axis) const { return node_->value.dim(axis); }
  std::int64_t numel() const { return node_->value.numel(); }
  const char* op() const { return node_->op; }

  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Whether new ops record backward information. Thread-local.
bool grad_enabled();

/// Disables graph recording for its lifetime (inference, frozen modules).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Build an op result. Records parents and the backward rule only when grad
/// mode is on and at least one parent requires grad.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents, BackwardFn<T> fn, const char* op);

/// Reverse sweep from a scalar root; gradients accumulate (+=).
template <typename T>
void backward(const Var<T>& root);

}  // namespace echo
