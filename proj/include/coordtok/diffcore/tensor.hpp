// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "coordtok/diffcore/memory.hpp"

namespace coordtok::diff {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled() noexcept;

template <typename T>
struct Node {
  Shape shape;
  TrackedBuffer<T> value;
  TrackedBuffer<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  bool retain_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;
  std::string name;

  /// Zero-filled gradient buffer, allocated on first use.
  T* ensure_grad() {
    if (grad.empty()) grad = TrackedBuffer<T>(value.size(), T{0});
    return grad.data();
  }
};

/// Dense row-major array taking part in reverse-mode differentiation.
///
/// Tensors are cheap handles: copies share the node. Every op returns a new
/// node holding its parents, so the graph lives exactly as long as the
/// tensors referencing it.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  /// Extent along `axis`; negative axes count from the back.
  std::size_t dim(int axis) const;
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> data() const { return {node_->value.data(), node_->value.size()}; }
  std::span<T> mutable_data() { return {node_->value.data(), node_->value.size()}; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool is_leaf() const { return node_->is_leaf; }
  void retain_grad() { node_->retain_grad = true; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return {node_->grad.data(), node_->grad.size()}; }
  std::span<T> mutable_grad() { return {node_->ensure_grad(), node_->grad.size()}; }
  void zero_grad();
  void release_grad() { node_->grad.release(); }

  const std::string& name() const { return node_->name; }
  void set_name(std::string name) { node_->name = std::move(name); }

  /// New leaf holding a copy of the values, cut from the graph.
  Tensor detach(bool requires_grad = false) const;

  Node<T>* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const noexcept { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Builds an op result. The node records `inputs` and `backward` only when
/// grad mode is on and some input requires a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, TrackedBuffer<T>&& value,
                      std::initializer_list<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward);
template <typename T>
Tensor<T> make_result(Shape shape, TrackedBuffer<T>&& value, const std::vector<Tensor<T>>& inputs,
                      std::function<void(Node<T>&)> backward);

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into leaves
/// (and retained tensors); intermediate gradients are freed once propagated.
template <typename T>
void backward(const Tensor<T>& loss);

/// Sweep seeded with explicit output gradients, one per root.
template <typename T>
void backward(const std::vector<Tensor<T>>& roots, const std::vector<std::span<const T>>& seeds);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace coordtok::diff
