// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "coordtok/diffcore/tensor.hpp"
#include "coordtok/error.hpp"
#include "coordtok/rng.hpp"

namespace coordtok::diff {

struct GradCheckOptions {
  double h = 1e-5;
  /// Elements probed per tensor; 0 probes all of them.
  std::size_t max_elements = 0;
  std::uint64_t seed = 0;
};

/// Compares reverse-mode gradients of the scalar `loss()` with respect to each
/// tensor in `inputs` against central differences. `loss` must read the
/// inputs through their (mutated in place) values. Returns
/// max |analytic - numeric| / max(1, |numeric|) over all probed elements.
inline double grad_check(const std::function<Tensor<double>()>& loss,
                         std::vector<Tensor<double>> inputs, const GradCheckOptions& opts = {}) {
  for (auto& x : inputs) {
    x.set_requires_grad(true);
    x.zero_grad();
  }
  {
    const Tensor<double> y = loss();
    if (!std::isfinite(y.item())) throw InputError("grad_check: non-finite loss");
    backward(y);
  }
  auto eval = [&]() {
    NoGradGuard guard;
    const double v = loss().item();
    if (!std::isfinite(v)) throw InputError("grad_check: non-finite loss under perturbation");
    return v;
  };

  Rng rng(opts.seed);
  double worst = 0.0;
  for (auto& x : inputs) {
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());
    std::vector<std::size_t> probe(x.numel());
    std::iota(probe.begin(), probe.end(), std::size_t{0});
    if (opts.max_elements != 0 && opts.max_elements < probe.size()) {
      for (std::size_t i = 0; i < opts.max_elements; ++i) {
        std::swap(probe[i], probe[i + rng.uniform_index(probe.size() - i)]);
      }
      probe.resize(opts.max_elements);
    }
    auto values = x.mutable_data();
    for (std::size_t idx : probe) {
      const double saved = values[idx];
      values[idx] = saved + opts.h;
      const double up = eval();
      values[idx] = saved - opts.h;
      const double down = eval();
      values[idx] = saved;
      const double numeric = (up - down) / (2.0 * opts.h);
      worst = std::max(worst, std::abs(analytic[idx] - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

/// Single-input form: `f` maps x to a scalar.
inline double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                         const Tensor<double>& x, const GradCheckOptions& opts = {}) {
  return grad_check([&]() { return f(x); }, {x}, opts);
}

}  // namespace coordtok::diff
