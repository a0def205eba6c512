// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "coordtok/diffcore/tensor.hpp"

namespace coordtok::diff {

/// Scaled dot-product attention over `heads` equal slices of the feature axis.
///
/// q is [B, Lq, D] (or [Lq, D]); k and v are [B, Lk, D] with the same batch.
/// Each head h reads columns [h*D/heads, (h+1)*D/heads) and uses the scale
/// 1/sqrt(D/heads). Head outputs are written back into their column slices,
/// i.e. concatenated. Input and output projections belong to the caller.
/// The row-softmax weights [B, heads, Lq, Lk] are kept for the backward pass.
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               std::size_t heads);

}  // namespace coordtok::diff
