// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace coordtok {

/// Portable seedable generator.
///
/// The bit stream is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. All derived draws (bounded integers, uniforms, normals) are
/// computed here instead of through <random> distributions, whose algorithms
/// are implementation-defined. Sequences are therefore identical across
/// compilers and platforms for a given seed.
///
///   uniform_index(n): rejection sampling on the top bits, unbiased.
///   uniform():        53 high bits scaled to [0, 1).
///   normal():         Box-Muller, one value per call (the pair's twin is cached).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Uniform double in [0, 1).
  double uniform();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal.
  double normal();

  /// Normal with the given std, redrawn until |x| <= 2 std.
  double truncated_normal(double std);

  /// Derive an independent generator (e.g. one per data-loader worker).
  Rng fork(std::uint64_t stream);

  /// Text form of the full generator state, restorable with `deserialize`.
  std::string serialize() const;
  void deserialize(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.has_cached_ == b.has_cached_ &&
           (!a.has_cached_ || a.cached_ == b.cached_);
  }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace coordtok
