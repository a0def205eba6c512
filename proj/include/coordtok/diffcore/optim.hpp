// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace coordtok::diff {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;
};

/// Optimizer moments, keyed by parameter name so they survive serialization.
template <typename T>
struct AdamWState {
  AdamWConfig config;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<T>> m;
  std::map<std::string, std::vector<T>> v;
};

/// One parameter as the optimizer sees it.
template <typename T>
struct ParamRef {
  std::string name;
  std::span<T> value;
  std::span<const T> grad;
};

/// Decoupled-weight-decay Adam update, applied to every parameter:
///
///   p -= lr * wd * p
///   m  = b1 m + (1 - b1) g        v = b2 v + (1 - b2) g^2
///   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
///
/// with t the incremented step. All gradients are validated before any
/// parameter moves; a non-finite entry throws DivergenceError naming the
/// parameter.
template <typename T>
void adamw_step(const std::vector<ParamRef<T>>& params, AdamWState<T>& state);

}  // namespace coordtok::diff
