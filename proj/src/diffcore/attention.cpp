// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/diffcore/attention.hpp"

#include <Eigen/Core>

#include <cmath>

#include "coordtok/error.hpp"

namespace coordtok::diff {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Strided = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStrided = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using Dense = Eigen::Map<RowMat<T>>;

struct Dims {
  std::size_t batch, lq, lk, d, heads, dh;
};

Dims attention_dims(const Shape& q, const Shape& k, const Shape& v, std::size_t heads) {
  if (q.size() != k.size() || k.size() != v.size() || (q.size() != 2 && q.size() != 3)) {
    throw ShapeError("multi_head_attention: q/k/v must all be [L,D] or [B,L,D], got " +
                     shape_str(q) + ", " + shape_str(k) + ", " + shape_str(v));
  }
  const bool batched = q.size() == 3;
  Dims d{};
  d.batch = batched ? q[0] : 1;
  d.lq = q[q.size() - 2];
  d.lk = k[k.size() - 2];
  d.d = q.back();
  if (k != v || k.back() != d.d || (batched && k[0] != d.batch)) {
    throw ShapeError("multi_head_attention: incompatible shapes q " + shape_str(q) + ", k " +
                     shape_str(k) + ", v " + shape_str(v));
  }
  if (heads == 0 || d.d % heads != 0) {
    throw ShapeError("multi_head_attention: feature dim " + std::to_string(d.d) +
                     " not divisible by " + std::to_string(heads) + " heads");
  }
  d.heads = heads;
  d.dh = d.d / heads;
  return d;
}

}  // namespace

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               std::size_t heads) {
  const Dims dm = attention_dims(q.shape(), k.shape(), v.shape(), heads);
  const auto lq = static_cast<Eigen::Index>(dm.lq);
  const auto lk = static_cast<Eigen::Index>(dm.lk);
  const auto dh = static_cast<Eigen::Index>(dm.dh);
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(dm.d));
  const T sc = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dm.dh)));

  TrackedBuffer<T> out(q.numel());
  TrackedBuffer<T> probs(dm.batch * dm.heads * dm.lq * dm.lk);
  for (std::size_t b = 0; b < dm.batch; ++b) {
    for (std::size_t h = 0; h < dm.heads; ++h) {
      const std::size_t qo = b * dm.lq * dm.d + h * dm.dh;
      const std::size_t ko = b * dm.lk * dm.d + h * dm.dh;
      ConstStrided<T> Q(q.data().data() + qo, lq, dh, stride);
      ConstStrided<T> K(k.data().data() + ko, lk, dh, stride);
      ConstStrided<T> V(v.data().data() + ko, lk, dh, stride);
      Dense<T> P(probs.data() + (b * dm.heads + h) * dm.lq * dm.lk, lq, lk);
      P.noalias() = (Q * K.transpose()) * sc;
      for (Eigen::Index r = 0; r < lq; ++r) {
        auto row = P.row(r);
        const T mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
      }
      Strided<T> O(out.data() + qo, lq, dh, stride);
      O.noalias() = P * V;
    }
  }

  return make_result<T>(q.shape(), std::move(out), {q, k, v},
                        [dm, sc, probs = std::move(probs)](Node<T>& self) {
    Node<T>& nq = *self.parents[0];
    Node<T>& nk = *self.parents[1];
    Node<T>& nv = *self.parents[2];
    const auto lq = static_cast<Eigen::Index>(dm.lq);
    const auto lk = static_cast<Eigen::Index>(dm.lk);
    const auto dh = static_cast<Eigen::Index>(dm.dh);
    const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(dm.d));
    T* gq = nq.requires_grad ? nq.ensure_grad() : nullptr;
    T* gk = nk.requires_grad ? nk.ensure_grad() : nullptr;
    T* gv = nv.requires_grad ? nv.ensure_grad() : nullptr;
    TrackedBuffer<T> dp_buf(dm.lq * dm.lk);
    for (std::size_t b = 0; b < dm.batch; ++b) {
      for (std::size_t h = 0; h < dm.heads; ++h) {
        const std::size_t qo = b * dm.lq * dm.d + h * dm.dh;
        const std::size_t ko = b * dm.lk * dm.d + h * dm.dh;
        Eigen::Map<const RowMat<T>> P(probs.data() + (b * dm.heads + h) * dm.lq * dm.lk, lq, lk);
        ConstStrided<T> dO(self.grad.data() + qo, lq, dh, stride);
        ConstStrided<T> Q(nq.value.data() + qo, lq, dh, stride);
        ConstStrided<T> K(nk.value.data() + ko, lk, dh, stride);
        ConstStrided<T> V(nv.value.data() + ko, lk, dh, stride);
        if (gv) {
          Strided<T> dV(gv + ko, lk, dh, stride);
          dV.noalias() += P.transpose() * dO;
        }
        if (!gq && !gk) continue;
        Dense<T> dS(dp_buf.data(), lq, lk);
        dS.noalias() = dO * V.transpose();
        for (Eigen::Index r = 0; r < lq; ++r) {
          const T dot = dS.row(r).dot(P.row(r));
          dS.row(r) = (P.row(r).array() * (dS.row(r).array() - dot)) * sc;
        }
        if (gq) {
          Strided<T> dQ(gq + qo, lq, dh, stride);
          dQ.noalias() += dS * K;
        }
        if (gk) {
          Strided<T> dK(gk + ko, lk, dh, stride);
          dK.noalias() += dS.transpose() * Q;
        }
      }
    }
  });
}

template Tensor<float> multi_head_attention(const Tensor<float>&, const Tensor<float>&,
                                            const Tensor<float>&, std::size_t);
template Tensor<double> multi_head_attention(const Tensor<double>&, const Tensor<double>&,
                                             const Tensor<double>&, std::size_t);

}  // namespace coordtok::diff
