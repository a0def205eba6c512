// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "coordtok/diffcore/tensor.hpp"

namespace coordtok::diff {

// Elementwise arithmetic. `b` either matches `a` or matches a suffix of a's
// shape, in which case it is broadcast over the leading axes (biases,
// positional tables).
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> square(const Tensor<T>& a);

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

/// mean((pred - target)^2), accumulated in double.
template <typename T> Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// [..., m, k] x [..., k, n] -> [..., m, n]. Batch axes broadcast numpy-style.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// x [..., in] * weight [in, out] + bias [out].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Max-subtracted softmax along `axis` (negative counts from the back).
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);

/// Normalizes the last axis, then applies gain and bias of that extent.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     double eps = 1e-5);

/// Tanh-approximation GELU.
template <typename T> Tensor<T> gelu(const Tensor<T>& x);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <typename T>
Tensor<T> narrow(const Tensor<T>& x, int axis, std::size_t start, std::size_t length);

/// out.flat[i] = x.flat[index[i]]; the gradient scatter-adds back.
template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::vector<std::size_t> index, Shape out_shape);

/// Rows of x along axis 0.
template <typename T>
Tensor<T> take_rows(const Tensor<T>& x, std::span<const std::size_t> rows);

/// Cell lookup on an axis with `extent` nodes at fractional position
/// u in [0, extent-1]: lower node index and the weight of the upper node.
/// The lower index is clamped to extent-2 so u = extent-1 gives weight 1;
/// a single-node axis always returns (0, 0).
struct AxisCell {
  std::size_t lower = 0;
  double weight = 0.0;
};
AxisCell locate_axis_cell(double u, std::size_t extent);

/// Bilinear read of plane [A, B, D] at fractional grid position (u, w):
/// u in [0, A-1], w in [0, B-1]. Differentiable in the plane only.
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& plane, double u, double w);

/// Batched form: one [D] row per (u[n], w[n]); result [N, D].
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& plane, std::span<const double> u,
                          std::span<const double> w);

/// Horizontal and vertical 3x3 Sobel responses of the channel-mean image.
/// frames [F, H, W, C] -> [F, H, W, 2] (gx, gy); borders replicate.
template <typename T> Tensor<T> sobel_edges(const Tensor<T>& frames);

}  // namespace coordtok::diff
