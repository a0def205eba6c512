// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <utility>
#include <vector>

namespace coordtok::diff {

// Live-element accounting. Every tensor value, gradient and saved activation
// buffer is a TrackedBuffer, so the counters below see exactly the scalars the
// graph keeps alive. Counters are per thread; a graph is built and consumed on
// one thread.

void track_alloc(std::size_t elements) noexcept;
void track_free(std::size_t elements) noexcept;

/// Scalars currently alive on this thread.
std::int64_t live_elements() noexcept;

/// Start a new measurement window: the current live count becomes the baseline.
void reset_peak() noexcept;

/// Max of (live - baseline) since the last reset_peak(), never negative.
std::int64_t peak_live_elements() noexcept;

/// Measures the peak of one region without disturbing an enclosing window.
///
///   PeakScope scope;
///   ... build graph, backward ...
///   auto used = scope.peak();
class PeakScope {
 public:
  PeakScope() noexcept;
  ~PeakScope();
  PeakScope(const PeakScope&) = delete;
  PeakScope& operator=(const PeakScope&) = delete;

  std::int64_t peak() const noexcept;

 private:
  std::int64_t saved_baseline_;
  std::int64_t saved_peak_;
};

/// Cache-line aligned storage. SIMD kernels pick their code path from the
/// base address, so a fixed alignment keeps repeated calls bitwise identical.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

/// std::vector that reports its element count to the live-element tracker.
template <typename T>
class TrackedBuffer {
 public:
  TrackedBuffer() = default;
  explicit TrackedBuffer(std::size_t n, T fill = T{}) : data_(n, fill) { track_alloc(n); }
  explicit TrackedBuffer(const std::vector<T>& v) : data_(v.begin(), v.end()) { track_alloc(data_.size()); }

  TrackedBuffer(const TrackedBuffer& other) : data_(other.data_) { track_alloc(data_.size()); }
  TrackedBuffer(TrackedBuffer&& other) noexcept : data_(std::move(other.data_)) { other.data_.clear(); }
  TrackedBuffer& operator=(const TrackedBuffer& other) {
    if (this != &other) {
      release();
      data_ = other.data_;
      track_alloc(data_.size());
    }
    return *this;
  }
  TrackedBuffer& operator=(TrackedBuffer&& other) noexcept {
    if (this != &other) {
      release();
      data_ = std::move(other.data_);
      other.data_.clear();
    }
    return *this;
  }
  ~TrackedBuffer() { release(); }

  void release() noexcept {
    track_free(data_.size());
    data_.clear();
    data_.shrink_to_fit();
  }

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

 private:
  std::vector<T, AlignedAllocator<T>> data_;
};

}  // namespace coordtok::diff
