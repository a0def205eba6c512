// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/diffcore/memory.hpp"

#include <algorithm>

namespace coordtok::diff {
namespace {

struct Counters {
  std::int64_t live = 0;
  std::int64_t baseline = 0;
  std::int64_t peak = 0;
};

thread_local Counters g_counters;

}  // namespace

void track_alloc(std::size_t elements) noexcept {
  auto& c = g_counters;
  c.live += static_cast<std::int64_t>(elements);
  c.peak = std::max(c.peak, c.live);
}

void track_free(std::size_t elements) noexcept {
  g_counters.live -= static_cast<std::int64_t>(elements);
}

std::int64_t live_elements() noexcept { return g_counters.live; }

void reset_peak() noexcept {
  g_counters.baseline = g_counters.live;
  g_counters.peak = g_counters.live;
}

std::int64_t peak_live_elements() noexcept {
  return std::max<std::int64_t>(0, g_counters.peak - g_counters.baseline);
}

PeakScope::PeakScope() noexcept
    : saved_baseline_(g_counters.baseline), saved_peak_(g_counters.peak) {
  g_counters.baseline = g_counters.live;
  g_counters.peak = g_counters.live;
}

PeakScope::~PeakScope() {
  // The enclosing window saw everything this scope saw.
  g_counters.peak = std::max(saved_peak_, g_counters.peak);
  g_counters.baseline = saved_baseline_;
}

std::int64_t PeakScope::peak() const noexcept {
  return std::max<std::int64_t>(0, g_counters.peak - g_counters.baseline);
}

}  // namespace coordtok::diff
