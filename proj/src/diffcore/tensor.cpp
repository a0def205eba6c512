// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/diffcore/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "coordtok/error.hpp"

namespace coordtok::diff {
namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() noexcept { return g_grad_enabled; }

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("Tensor: zero extent in shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node<T>>();
  node->value = TrackedBuffer<T>(shape_numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T{0}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("Tensor::from: shape " + shape_str(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " elements, got " +
                     std::to_string(values.size()));
  }
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("Tensor: zero extent in shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = TrackedBuffer<T>(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

template <typename T>
std::size_t Tensor<T>::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("Tensor::dim: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(shape()));
  }
  return shape()[static_cast<std::size_t>(a)];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("Tensor::item: shape " + shape_str(shape()) + " is not scalar");
  return node_->value[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool flag) {
  if (!node_->is_leaf) throw InputError("set_requires_grad: only leaf tensors can change this flag");
  node_->requires_grad = flag;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T{0});
}

template <typename T>
Tensor<T> Tensor<T>::detach(bool requires_grad) const {
  auto node = std::make_shared<Node<T>>();
  node->shape = node_->shape;
  node->value = node_->value;
  node->requires_grad = requires_grad;
  node->name = node_->name;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> make_result(Shape shape, TrackedBuffer<T>&& value, const std::vector<Tensor<T>>& inputs,
                      std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->is_leaf = false;
  const bool record =
      g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                    [](const Tensor<T>& t) { return t.requires_grad(); });
  if (record) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const auto& t : inputs) node->parents.push_back(t.node_ptr());
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> make_result(Shape shape, TrackedBuffer<T>&& value,
                      std::initializer_list<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward) {
  return make_result(std::move(shape), std::move(value), std::vector<Tensor<T>>(inputs),
                     std::move(backward));
}

namespace {

// Post-order over requires_grad nodes; reversed it is a valid backward order.
template <typename T>
std::vector<Node<T>*> topo_order(const std::vector<Node<T>*>& roots) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  for (Node<T>* root : roots) {
    if (!root->requires_grad || !visited.insert(root).second) continue;
    stack.emplace_back(root, 0);
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node<T>* parent = node->parents[next++].get();
        if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }
  return order;
}

}  // namespace

template <typename T>
void backward(const std::vector<Tensor<T>>& roots, const std::vector<std::span<const T>>& seeds) {
  if (roots.size() != seeds.size()) throw InputError("backward: one seed per root required");
  std::vector<Node<T>*> root_nodes;
  for (std::size_t r = 0; r < roots.size(); ++r) {
    if (seeds[r].size() != roots[r].numel()) {
      throw ShapeError("backward: seed of " + std::to_string(seeds[r].size()) +
                       " elements for root " + shape_str(roots[r].shape()));
    }
    root_nodes.push_back(roots[r].node());
  }
  const auto order = topo_order(root_nodes);
  for (std::size_t r = 0; r < roots.size(); ++r) {
    Node<T>* node = root_nodes[r];
    if (!node->requires_grad) continue;
    T* g = node->ensure_grad();
    for (std::size_t i = 0; i < seeds[r].size(); ++i) g[i] += seeds[r][i];
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->is_leaf) {
      node->ensure_grad();
      continue;
    }
    if (node->backward && !node->grad.empty()) node->backward(*node);
    if (!node->retain_grad) node->grad.release();
  }
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  const T one{1};
  backward<T>(std::vector<Tensor<T>>{loss}, {std::span<const T>(&one, 1)});
}

template class Tensor<float>;
template class Tensor<double>;

#define COORDTOK_INSTANTIATE(T)                                                                  \
  template Tensor<T> make_result(Shape, TrackedBuffer<T>&&, const std::vector<Tensor<T>>&,       \
                                 std::function<void(Node<T>&)>);                                 \
  template Tensor<T> make_result(Shape, TrackedBuffer<T>&&, std::initializer_list<Tensor<T>>,    \
                                 std::function<void(Node<T>&)>);                                 \
  template void backward(const Tensor<T>&);                                                      \
  template void backward(const std::vector<Tensor<T>>&, const std::vector<std::span<const T>>&);

COORDTOK_INSTANTIATE(float)
COORDTOK_INSTANTIATE(double)
#undef COORDTOK_INSTANTIATE

}  // namespace coordtok::diff
