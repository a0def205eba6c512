// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coordtok/diffcore/optim.hpp"
#include "coordtok/diffcore/tensor.hpp"
#include "coordtok/model/config.hpp"
#include "coordtok/rng.hpp"

namespace coordtok {

/// Ordered set of named, trainable leaf tensors.
template <typename T>
class ParameterStore {
 public:
  using Entry = std::pair<std::string, diff::Tensor<T>>;

  /// Registers a new leaf. Throws ConfigError on a duplicate name.
  diff::Tensor<T>& add(std::string name, diff::Shape shape, std::vector<T> values);

  const diff::Tensor<T>& at(std::string_view name) const;
  diff::Tensor<T>& at(std::string_view name);
  bool contains(std::string_view name) const;

  std::vector<Entry>& entries() noexcept { return entries_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t total_elements() const;

  void zero_grad();
  /// Optimizer view. Parameters that never received a gradient get a zero one.
  std::vector<diff::ParamRef<T>> optimizer_refs();

  /// Copy with every value converted to U.
  template <typename U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (const auto& [name, t] : entries_) {
      out.add(name, t.shape(), std::vector<U>(t.data().begin(), t.data().end()));
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

struct InitOptions {
  /// Zero the decoder's final pixel projection (standard); off gives it the
  /// same truncated-normal draw as other projections.
  bool zero_output_projection = true;
  /// Projection weights.
  double std = 0.02;
  /// Learned position tables, latent queries and coordinate nodes. These
  /// must be large enough that attention logits separate positions early;
  /// at the projection scale cross-attention starts uniform and stalls.
  double embedding_std = 0.5;
};

/// Position tables, latent queries and coordinate nodes.
bool is_embedding_parameter(std::string_view name);

/// Draws every parameter of the architecture in canonical order.
template <typename T>
ParameterStore<T> init_parameters(const ModelConfig& config, std::uint64_t seed,
                                  const InitOptions& options = {});

/// Canonical (name, shape) list the architecture requires, in registration order.
std::vector<std::pair<std::string, diff::Shape>> parameter_layout(const ModelConfig& config);

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace coordtok
