// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "coordtok/error.hpp"

namespace coordtok {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw InputError("Rng::uniform_index: empty range");
  if (n == 1) return 0;
  // Smallest all-ones mask covering n-1, then reject draws >= n.
  const std::uint64_t mask = ~std::uint64_t{0} >> std::countl_zero(n - 1);
  for (;;) {
    const std::uint64_t x = engine_() & mask;
    if (x < n) return x;
  }
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

double Rng::truncated_normal(double std) {
  for (;;) {
    const double x = normal();
    if (std::abs(x) <= 2.0) return x * std;
  }
}

Rng Rng::fork(std::uint64_t stream) {
  // SplitMix64 finalizer over (next draw, stream) gives a well-mixed seed.
  std::uint64_t z = engine_() ^ (stream * 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return Rng(z);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_ << ' ' << (has_cached_ ? 1 : 0) << ' ';
  os << std::hexfloat << cached_;
  return os.str();
}

void Rng::deserialize(const std::string& state) {
  std::istringstream is(state);
  std::mt19937_64 engine;
  int cached_flag = 0;
  std::string cached_text;
  is >> engine >> cached_flag >> cached_text;
  if (is.fail()) throw InputError("Rng::deserialize: malformed state");
  engine_ = engine;
  has_cached_ = cached_flag != 0;
  cached_ = std::strtod(cached_text.c_str(), nullptr);
}

}  // namespace coordtok
