// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/diffcore/optim.hpp"

#include <cmath>

#include "coordtok/error.hpp"

namespace coordtok::diff {

template <typename T>
void adamw_step(const std::vector<ParamRef<T>>& params, AdamWState<T>& state) {
  for (const auto& p : params) {
    if (p.grad.size() != p.value.size()) {
      throw ShapeError("adamw_step: gradient of '" + p.name + "' has " +
                       std::to_string(p.grad.size()) + " elements, parameter has " +
                       std::to_string(p.value.size()));
    }
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(static_cast<double>(p.grad[i]))) {
        throw DivergenceError("adamw_step: non-finite gradient in parameter '" + p.name +
                              "' at element " + std::to_string(i));
      }
    }
  }

  const AdamWConfig& c = state.config;
  const std::uint64_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  const T decay = static_cast<T>(1.0 - c.lr * c.weight_decay);
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T step_size = static_cast<T>(c.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(c.eps);

  for (const auto& p : params) {
    auto& m = state.m[p.name];
    auto& v = state.v[p.name];
    if (m.size() != p.value.size()) m.assign(p.value.size(), T{0});
    if (v.size() != p.value.size()) v.assign(p.value.size(), T{0});
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T g = p.grad[i];
      T x = p.value[i] * decay;
      m[i] = b1 * m[i] + (T{1} - b1) * g;
      v[i] = b2 * v[i] + (T{1} - b2) * g * g;
      x -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
      p.value[i] = x;
    }
  }
  state.step = t;
}

template void adamw_step(const std::vector<ParamRef<float>>&, AdamWState<float>&);
template void adamw_step(const std::vector<ParamRef<double>>&, AdamWState<double>&);

}  // namespace coordtok::diff
