// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/diffcore/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "coordtok/error.hpp"

namespace coordtok::diff {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

std::size_t normalize_axis(int axis, std::size_t rank, const char* op) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

// b's shape must equal a's shape or a suffix of it. Returns the period of b.
std::size_t broadcast_period(const Shape& a, const Shape& b, const char* op) {
  if (b.size() > a.size() || !std::equal(b.rbegin(), b.rend(), a.rbegin())) {
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(b) + " onto " +
                     shape_str(a));
  }
  return shape_numel(b);
}

template <typename T>
bool needs_grad(const Node<T>& n) {
  return n.requires_grad;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t period = broadcast_period(a.shape(), b.shape(), "add");
  const std::size_t n = a.numel();
  TrackedBuffer<T> out(n);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::size_t i = 0; i < n; i += period) {
    for (std::size_t j = 0; j < period; ++j) out[i + j] = pa[i + j] + pb[j];
  }
  return make_result<T>(a.shape(), std::move(out), {a, b}, [n, period](Node<T>& self) {
    const T* g = self.grad.data();
    Node<T>& na = *self.parents[0];
    Node<T>& nb = *self.parents[1];
    if (needs_grad(na)) {
      T* ga = na.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    }
    if (needs_grad(nb)) {
      T* gb = nb.ensure_grad();
      for (std::size_t i = 0; i < n; i += period) {
        for (std::size_t j = 0; j < period; ++j) gb[j] += g[i + j];
      }
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t period = broadcast_period(a.shape(), b.shape(), "sub");
  const std::size_t n = a.numel();
  TrackedBuffer<T> out(n);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::size_t i = 0; i < n; i += period) {
    for (std::size_t j = 0; j < period; ++j) out[i + j] = pa[i + j] - pb[j];
  }
  return make_result<T>(a.shape(), std::move(out), {a, b}, [n, period](Node<T>& self) {
    const T* g = self.grad.data();
    Node<T>& na = *self.parents[0];
    Node<T>& nb = *self.parents[1];
    if (needs_grad(na)) {
      T* ga = na.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    }
    if (needs_grad(nb)) {
      T* gb = nb.ensure_grad();
      for (std::size_t i = 0; i < n; i += period) {
        for (std::size_t j = 0; j < period; ++j) gb[j] -= g[i + j];
      }
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t period = broadcast_period(a.shape(), b.shape(), "mul");
  const std::size_t n = a.numel();
  TrackedBuffer<T> out(n);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::size_t i = 0; i < n; i += period) {
    for (std::size_t j = 0; j < period; ++j) out[i + j] = pa[i + j] * pb[j];
  }
  return make_result<T>(a.shape(), std::move(out), {a, b}, [n, period](Node<T>& self) {
    const T* g = self.grad.data();
    Node<T>& na = *self.parents[0];
    Node<T>& nb = *self.parents[1];
    if (needs_grad(na)) {
      T* ga = na.ensure_grad();
      for (std::size_t i = 0; i < n; i += period) {
        for (std::size_t j = 0; j < period; ++j) ga[i + j] += g[i + j] * nb.value[j];
      }
    }
    if (needs_grad(nb)) {
      T* gb = nb.ensure_grad();
      for (std::size_t i = 0; i < n; i += period) {
        for (std::size_t j = 0; j < period; ++j) gb[j] += g[i + j] * na.value[i + j];
      }
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  const std::size_t n = a.numel();
  TrackedBuffer<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.data()[i] * factor;
  return make_result<T>(a.shape(), std::move(out), {a}, [n, factor](Node<T>& self) {
    T* ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  const std::size_t n = a.numel();
  TrackedBuffer<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.data()[i] * a.data()[i];
  return make_result<T>(a.shape(), std::move(out), {a}, [n](Node<T>& self) {
    Node<T>& na = *self.parents[0];
    T* ga = na.ensure_grad();
    for (std::size_t i = 0; i < n; ++i) ga[i] += T{2} * na.value[i] * self.grad[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  double acc = 0.0;
  for (T v : a.data()) acc += static_cast<double>(v);
  TrackedBuffer<T> out(1, static_cast<T>(acc));
  const std::size_t n = a.numel();
  return make_result<T>({1}, std::move(out), {a}, [n](Node<T>& self) {
    T* ga = self.parents[0]->ensure_grad();
    const T g = self.grad[0];
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  const std::size_t n = a.numel();
  double acc = 0.0;
  for (T v : a.data()) acc += static_cast<double>(v);
  TrackedBuffer<T> out(1, static_cast<T>(acc / static_cast<double>(n)));
  return make_result<T>({1}, std::move(out), {a}, [n](Node<T>& self) {
    T* ga = self.parents[0]->ensure_grad();
    const T g = self.grad[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("mse_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  }
  const std::size_t n = pred.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred.data()[i]) - static_cast<double>(target.data()[i]);
    acc += d * d;
  }
  TrackedBuffer<T> out(1, static_cast<T>(acc / static_cast<double>(n)));
  return make_result<T>({1}, std::move(out), {pred, target}, [n](Node<T>& self) {
    Node<T>& np = *self.parents[0];
    Node<T>& nt = *self.parents[1];
    const T k = T{2} * self.grad[0] / static_cast<T>(n);
    if (needs_grad(np)) {
      T* g = np.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[i] += k * (np.value[i] - nt.value[i]);
    }
    if (needs_grad(nt)) {
      T* g = nt.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[i] -= k * (np.value[i] - nt.value[i]);
    }
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) {
    throw ShapeError("matmul: operands need rank >= 2, got " + shape_str(sa) + " and " +
                     shape_str(sb));
  }
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa.back();
  const std::size_t n = sb.back();
  if (sb[sb.size() - 2] != k) {
    throw ShapeError("matmul: inner extents differ in " + shape_str(sa) + " x " + shape_str(sb));
  }

  // Broadcast batch axes, right-aligned.
  const Shape batch_a(sa.begin(), sa.end() - 2);
  const Shape batch_b(sb.begin(), sb.end() - 2);
  const std::size_t batch_rank = std::max(batch_a.size(), batch_b.size());
  Shape batch(batch_rank, 1);
  for (std::size_t i = 0; i < batch_rank; ++i) {
    const std::size_t da = i + batch_a.size() >= batch_rank ? batch_a[i + batch_a.size() - batch_rank] : 1;
    const std::size_t db = i + batch_b.size() >= batch_rank ? batch_b[i + batch_b.size() - batch_rank] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("matmul: batch extents not broadcast-compatible in " + shape_str(sa) +
                       " x " + shape_str(sb));
    }
    batch[i] = std::max(da, db);
  }
  const std::size_t batch_count = shape_numel(batch);

  // Flat matrix offsets of a and b for every output batch index.
  std::vector<std::size_t> off_a(batch_count), off_b(batch_count);
  for (std::size_t flat = 0; flat < batch_count; ++flat) {
    std::size_t rem = flat, ia = 0, ib = 0, stride_a = 1, stride_b = 1;
    for (std::size_t r = batch_rank; r-- > 0;) {
      const std::size_t idx = rem % batch[r];
      rem /= batch[r];
      const std::ptrdiff_t ra = static_cast<std::ptrdiff_t>(r + batch_a.size()) - static_cast<std::ptrdiff_t>(batch_rank);
      const std::ptrdiff_t rb = static_cast<std::ptrdiff_t>(r + batch_b.size()) - static_cast<std::ptrdiff_t>(batch_rank);
      if (ra >= 0) {
        const std::size_t d = batch_a[static_cast<std::size_t>(ra)];
        ia += (d == 1 ? 0 : idx) * stride_a;
        stride_a *= d;
      }
      if (rb >= 0) {
        const std::size_t d = batch_b[static_cast<std::size_t>(rb)];
        ib += (d == 1 ? 0 : idx) * stride_b;
        stride_b *= d;
      }
    }
    off_a[flat] = ia * m * k;
    off_b[flat] = ib * k * n;
  }

  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);

  // A shared 2-D right operand lets the whole batch run as one GEMM.
  const bool fold = batch_b.empty() && batch_a.size() == batch_rank;
  const std::size_t rows = fold ? batch_count * m : m;
  const std::size_t loops = fold ? 1 : batch_count;

  TrackedBuffer<T> out(batch_count * m * n);
  for (std::size_t bi = 0; bi < loops; ++bi) {
    ConstMatMap<T> A(a.data().data() + off_a[bi], static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(k));
    ConstMatMap<T> B(b.data().data() + off_b[bi], static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
    MatMap<T> C(out.data() + bi * m * n, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
    C.noalias() = A * B;
  }

  return make_result<T>(std::move(out_shape), std::move(out), {a, b},
                        [m, k, n, rows, loops, off_a, off_b](Node<T>& self) {
    Node<T>& na = *self.parents[0];
    Node<T>& nb = *self.parents[1];
    T* ga = needs_grad(na) ? na.ensure_grad() : nullptr;
    T* gb = needs_grad(nb) ? nb.ensure_grad() : nullptr;
    for (std::size_t bi = 0; bi < loops; ++bi) {
      ConstMatMap<T> G(self.grad.data() + bi * m * n, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
      if (ga) {
        ConstMatMap<T> B(nb.value.data() + off_b[bi], static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
        MatMap<T> GA(ga + off_a[bi], static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(k));
        GA.noalias() += G * B.transpose();
      }
      if (gb) {
        ConstMatMap<T> A(na.value.data() + off_a[bi], static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(k));
        MatMap<T> GB(gb + off_b[bi], static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
        GB.noalias() += A.transpose() * G;
      }
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weight.dim(1)) {
    throw ShapeError("linear: weight " + shape_str(weight.shape()) + " / bias " +
                     shape_str(bias.shape()) + " inconsistent");
  }
  if (x.rank() == 1) {
    return reshape(add(matmul(reshape(x, {1, x.dim(0)}), weight), bias), {weight.dim(1)});
  }
  return add(matmul(x, weight), bias);
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const std::size_t ax = normalize_axis(axis, x.rank(), "softmax");
  const Shape& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= s[i];
  for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[ax];
  TrackedBuffer<T> out(x.numel());
  const T* px = x.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      T mx = px[base];
      for (std::size_t l = 1; l < len; ++l) mx = std::max(mx, px[base + l * inner]);
      T total{0};
      for (std::size_t l = 0; l < len; ++l) {
        const T e = std::exp(px[base + l * inner] - mx);
        out[base + l * inner] = e;
        total += e;
      }
      const T inv = T{1} / total;
      for (std::size_t l = 0; l < len; ++l) out[base + l * inner] *= inv;
    }
  }
  return make_result<T>(s, std::move(out), {x}, [outer, inner, len](Node<T>& self) {
    T* gx = self.parents[0]->ensure_grad();
    const T* y = self.value.data();
    const T* gy = self.grad.data();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        T dot{0};
        for (std::size_t l = 0; l < len; ++l) dot += gy[base + l * inner] * y[base + l * inner];
        for (std::size_t l = 0; l < len; ++l) {
          const std::size_t i = base + l * inner;
          gx[i] += y[i] * (gy[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, double eps) {
  const std::size_t d = x.shape().back();
  if (d < 1) throw ShapeError("layer_norm: empty last axis");
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw ShapeError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                     shape_str(bias.shape()) + " must match last extent of " +
                     shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  TrackedBuffer<T> out(x.numel());
  TrackedBuffer<T> xhat(x.numel());
  TrackedBuffer<T> rstd(rows);
  const T* px = x.data().data();
  const T* pg = gain.data().data();
  const T* pb = bias.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = px + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = static_cast<T>(rs);
    for (std::size_t j = 0; j < d; ++j) {
      const T h = static_cast<T>((row[j] - mu) * rs);
      xhat[r * d + j] = h;
      out[r * d + j] = h * pg[j] + pb[j];
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x, gain, bias},
                        [rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](Node<T>& self) {
    Node<T>& nx = *self.parents[0];
    Node<T>& ng = *self.parents[1];
    Node<T>& nb = *self.parents[2];
    const T* gy = self.grad.data();
    if (needs_grad(ng)) {
      T* gg = ng.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) gg[j] += gy[r * d + j] * xhat[r * d + j];
    }
    if (needs_grad(nb)) {
      T* gb = nb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) gb[j] += gy[r * d + j];
    }
    if (needs_grad(nx)) {
      T* gx = nx.ensure_grad();
      const T* gain_v = ng.value.data();
      const T inv_d = T{1} / static_cast<T>(d);
      for (std::size_t r = 0; r < rows; ++r) {
        T mean_dh{0}, mean_dh_h{0};
        for (std::size_t j = 0; j < d; ++j) {
          const T dh = gy[r * d + j] * gain_v[j];
          mean_dh += dh;
          mean_dh_h += dh * xhat[r * d + j];
        }
        mean_dh *= inv_d;
        mean_dh_h *= inv_d;
        for (std::size_t j = 0; j < d; ++j) {
          const T dh = gy[r * d + j] * gain_v[j];
          gx[r * d + j] += rstd[r] * (dh - mean_dh - xhat[r * d + j] * mean_dh_h);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = static_cast<T>(0.044715);
  const std::size_t n = x.numel();
  TrackedBuffer<T> out(n);
  const T* px = x.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const T v = px[i];
    out[i] = T{0.5} * v * (T{1} + std::tanh(kC * (v + kA * v * v * v)));
  }
  return make_result<T>(x.shape(), std::move(out), {x}, [n](Node<T>& self) {
    Node<T>& nx = *self.parents[0];
    T* gx = nx.ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      const T v = nx.value[i];
      const T t = std::tanh(kC * (v + kA * v * v * v));
      const T dt = (T{1} - t * t) * kC * (T{1} + T{3} * kA * v * v);
      gx[i] += self.grad[i] * (T{0.5} * (T{1} + t) + T{0.5} * v * dt);
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  TrackedBuffer<T> out(std::vector<T>(x.data().begin(), x.data().end()));
  const std::size_t n = x.numel();
  return make_result<T>(std::move(shape), std::move(out), {x}, [n](Node<T>& self) {
    T* gx = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) gx[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  const std::size_t ax = normalize_axis(axis, s0.size(), "concat");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= s0[i];
  for (std::size_t i = ax + 1; i < s0.size(); ++i) inner *= s0[i];
  std::vector<std::size_t> chunk;  // contiguous block per outer index
  std::size_t total_axis = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == ax || s[i] == s0[i];
    if (!ok) throw ShapeError("concat: " + shape_str(s) + " incompatible with " + shape_str(s0));
    chunk.push_back(s[ax] * inner);
    total_axis += s[ax];
  }
  Shape out_shape = s0;
  out_shape[ax] = total_axis;
  const std::size_t row = total_axis * inner;
  TrackedBuffer<T> out(outer * row);
  std::size_t col = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const T* src = parts[p].data().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src + o * chunk[p], chunk[p], out.data() + o * row + col);
    }
    col += chunk[p];
  }
  return make_result<T>(std::move(out_shape), std::move(out), parts, [outer, row, chunk](Node<T>& self) {
    std::size_t c = 0;
    for (std::size_t p = 0; p < chunk.size(); ++p) {
      Node<T>& np = *self.parents[p];
      if (needs_grad(np)) {
        T* g = np.ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = self.grad.data() + o * row + c;
          for (std::size_t j = 0; j < chunk[p]; ++j) g[o * chunk[p] + j] += src[j];
        }
      }
      c += chunk[p];
    }
  });
}

template <typename T>
Tensor<T> narrow(const Tensor<T>& x, int axis, std::size_t start, std::size_t length) {
  const Shape& s = x.shape();
  const std::size_t ax = normalize_axis(axis, s.size(), "narrow");
  if (length == 0 || start + length > s[ax]) {
    throw ShapeError("narrow: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside axis of extent " +
                     std::to_string(s[ax]));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= s[i];
  for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t src_row = s[ax] * inner;
  const std::size_t dst_row = length * inner;
  const std::size_t offset = start * inner;
  TrackedBuffer<T> out(outer * dst_row);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.data().data() + o * src_row + offset, dst_row, out.data() + o * dst_row);
  }
  Shape out_shape = s;
  out_shape[ax] = length;
  return make_result<T>(std::move(out_shape), std::move(out), {x},
                        [outer, src_row, dst_row, offset](Node<T>& self) {
    T* g = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < dst_row; ++j) g[o * src_row + offset + j] += self.grad[o * dst_row + j];
  });
}

template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::vector<std::size_t> index, Shape out_shape) {
  if (shape_numel(out_shape) != index.size()) {
    throw ShapeError("gather: " + std::to_string(index.size()) + " indices for output " +
                     shape_str(out_shape));
  }
  const std::size_t n = x.numel();
  TrackedBuffer<T> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n) throw ShapeError("gather: index " + std::to_string(index[i]) + " out of range");
    out[i] = x.data()[index[i]];
  }
  return make_result<T>(std::move(out_shape), std::move(out), {x}, [index = std::move(index)](Node<T>& self) {
    T* g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < index.size(); ++i) g[index[i]] += self.grad[i];
  });
}

template <typename T>
Tensor<T> take_rows(const Tensor<T>& x, std::span<const std::size_t> rows) {
  if (x.rank() < 1 || rows.empty()) throw ShapeError("take_rows: need rank >= 1 and a row");
  const std::size_t width = x.numel() / x.dim(0);
  std::vector<std::size_t> picked(rows.begin(), rows.end());
  TrackedBuffer<T> out(rows.size() * width);
  for (std::size_t r = 0; r < picked.size(); ++r) {
    if (picked[r] >= x.dim(0)) {
      throw ShapeError("take_rows: row " + std::to_string(picked[r]) + " of " + std::to_string(x.dim(0)));
    }
    std::copy_n(x.data().data() + picked[r] * width, width, out.data() + r * width);
  }
  Shape out_shape = x.shape();
  out_shape[0] = rows.size();
  return make_result<T>(std::move(out_shape), std::move(out), {x},
                        [width, picked = std::move(picked)](Node<T>& self) {
    T* g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < picked.size(); ++r)
      for (std::size_t j = 0; j < width; ++j) g[picked[r] * width + j] += self.grad[r * width + j];
  });
}

AxisCell locate_axis_cell(double u, std::size_t extent) {
  if (!std::isfinite(u)) throw InputError("grid lookup: non-finite coordinate");
  if (extent <= 1) return {0, 0.0};
  const double hi = static_cast<double>(extent - 1);
  if (u < -1e-9 || u > hi + 1e-9) {
    throw InputError("grid lookup: position " + std::to_string(u) + " outside [0, " +
                     std::to_string(extent - 1) + "]");
  }
  u = std::clamp(u, 0.0, hi);
  const std::size_t lower = std::min(static_cast<std::size_t>(std::floor(u)), extent - 2);
  return {lower, u - static_cast<double>(lower)};
}

template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& plane, std::span<const double> u,
                          std::span<const double> w) {
  if (plane.rank() != 3) throw ShapeError("bilinear_sample: plane must be [A,B,D], got " + shape_str(plane.shape()));
  if (u.size() != w.size() || u.empty()) throw InputError("bilinear_sample: need matching non-empty u/w");
  const std::size_t A = plane.dim(0), B = plane.dim(1), D = plane.dim(2);
  const std::size_t count = u.size();
  // Per query: 4 flat row offsets and 4 weights.
  std::vector<std::size_t> corner(4 * count);
  std::vector<T> weight(4 * count);
  for (std::size_t q = 0; q < count; ++q) {
    const AxisCell cu = locate_axis_cell(u[q], A);
    const AxisCell cw = locate_axis_cell(w[q], B);
    const std::size_t l1 = A > 1 ? cu.lower + 1 : cu.lower;
    const std::size_t m1 = B > 1 ? cw.lower + 1 : cw.lower;
    corner[4 * q + 0] = (cu.lower * B + cw.lower) * D;
    corner[4 * q + 1] = (cu.lower * B + m1) * D;
    corner[4 * q + 2] = (l1 * B + cw.lower) * D;
    corner[4 * q + 3] = (l1 * B + m1) * D;
    const double a = cu.weight, b = cw.weight;
    weight[4 * q + 0] = static_cast<T>((1.0 - a) * (1.0 - b));
    weight[4 * q + 1] = static_cast<T>((1.0 - a) * b);
    weight[4 * q + 2] = static_cast<T>(a * (1.0 - b));
    weight[4 * q + 3] = static_cast<T>(a * b);
  }
  TrackedBuffer<T> out(count * D);
  const T* z = plane.data().data();
  for (std::size_t q = 0; q < count; ++q) {
    T* dst = out.data() + q * D;
    for (std::size_t c = 0; c < 4; ++c) {
      const T wt = weight[4 * q + c];
      const T* src = z + corner[4 * q + c];
      for (std::size_t d = 0; d < D; ++d) dst[d] += wt * src[d];
    }
  }
  return make_result<T>({count, D}, std::move(out), {plane},
                        [count, D, corner = std::move(corner), weight = std::move(weight)](Node<T>& self) {
    T* g = self.parents[0]->ensure_grad();
    for (std::size_t q = 0; q < count; ++q) {
      const T* src = self.grad.data() + q * D;
      for (std::size_t c = 0; c < 4; ++c) {
        const T wt = weight[4 * q + c];
        T* dst = g + corner[4 * q + c];
        for (std::size_t d = 0; d < D; ++d) dst[d] += wt * src[d];
      }
    }
  });
}

template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& plane, double u, double w) {
  const Tensor<T> rows = bilinear_sample(plane, std::span<const double>(&u, 1), std::span<const double>(&w, 1));
  return reshape(rows, {plane.dim(2)});
}

template <typename T>
Tensor<T> sobel_edges(const Tensor<T>& frames) {
  if (frames.rank() != 4) throw ShapeError("sobel_edges: frames must be [F,H,W,C], got " + shape_str(frames.shape()));
  const std::size_t F = frames.dim(0), H = frames.dim(1), W = frames.dim(2), C = frames.dim(3);
  static constexpr int kGx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static constexpr int kGy[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  auto clampi = [](std::ptrdiff_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  std::vector<T> gray(F * H * W, T{0});
  const T* px = frames.data().data();
  for (std::size_t p = 0; p < F * H * W; ++p) {
    T acc{0};
    for (std::size_t c = 0; c < C; ++c) acc += px[p * C + c];
    gray[p] = acc / static_cast<T>(C);
  }
  TrackedBuffer<T> out(F * H * W * 2);
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        T gx{0}, gy{0};
        for (int dy = -1; dy <= 1; ++dy) {
          const std::size_t yy = clampi(static_cast<std::ptrdiff_t>(y) + dy, H);
          for (int dx = -1; dx <= 1; ++dx) {
            const std::size_t xx = clampi(static_cast<std::ptrdiff_t>(x) + dx, W);
            const T v = gray[(f * H + yy) * W + xx];
            gx += static_cast<T>(kGx[dy + 1][dx + 1]) * v;
            gy += static_cast<T>(kGy[dy + 1][dx + 1]) * v;
          }
        }
        const std::size_t o = ((f * H + y) * W + x) * 2;
        out[o] = gx;
        out[o + 1] = gy;
      }
    }
  }
  return make_result<T>({F, H, W, 2}, std::move(out), {frames}, [F, H, W, C, clampi](Node<T>& self) {
    std::vector<T> dgray(F * H * W, T{0});
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          const std::size_t o = ((f * H + y) * W + x) * 2;
          const T gx = self.grad[o], gy = self.grad[o + 1];
          for (int dy = -1; dy <= 1; ++dy) {
            const std::size_t yy = clampi(static_cast<std::ptrdiff_t>(y) + dy, H);
            for (int dx = -1; dx <= 1; ++dx) {
              const std::size_t xx = clampi(static_cast<std::ptrdiff_t>(x) + dx, W);
              dgray[(f * H + yy) * W + xx] += static_cast<T>(kGx[dy + 1][dx + 1]) * gx +
                                             static_cast<T>(kGy[dy + 1][dx + 1]) * gy;
            }
          }
        }
      }
    }
    T* g = self.parents[0]->ensure_grad();
    const T inv_c = T{1} / static_cast<T>(C);
    for (std::size_t p = 0; p < F * H * W; ++p)
      for (std::size_t c = 0; c < C; ++c) g[p * C + c] += dgray[p] * inv_c;
  });
}

#define COORDTOK_INSTANTIATE(T)                                                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                                  \
  template Tensor<T> square(const Tensor<T>&);                                                    \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> mean(const Tensor<T>&);                                                      \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> softmax(const Tensor<T>&, int);                                              \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);    \
  template Tensor<T> gelu(const Tensor<T>&);                                                      \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                            \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                  \
  template Tensor<T> narrow(const Tensor<T>&, int, std::size_t, std::size_t);                     \
  template Tensor<T> gather(const Tensor<T>&, std::vector<std::size_t>, Shape);                   \
  template Tensor<T> take_rows(const Tensor<T>&, std::span<const std::size_t>);                   \
  template Tensor<T> bilinear_sample(const Tensor<T>&, std::span<const double>, std::span<const double>); \
  template Tensor<T> bilinear_sample(const Tensor<T>&, double, double);                           \
  template Tensor<T> sobel_edges(const Tensor<T>&);

COORDTOK_INSTANTIATE(float)
COORDTOK_INSTANTIATE(double)
#undef COORDTOK_INSTANTIATE

}  // namespace coordtok::diff
