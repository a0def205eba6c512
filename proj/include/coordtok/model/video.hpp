// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

namespace coordtok {

/// Dense T x H x W x C clip, row-major (t, h, w, c), values in [0, 1].
struct Video {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 3;
  std::vector<float> pixels;

  Video() = default;
  Video(std::size_t t, std::size_t h, std::size_t w, std::size_t c = 3, float fill = 0.0f);

  std::size_t size() const noexcept { return pixels.size(); }
  std::size_t frame_size() const noexcept { return height * width * channels; }
  std::size_t index(std::size_t t, std::size_t h, std::size_t w, std::size_t c) const noexcept {
    return ((t * height + h) * width + w) * channels + c;
  }
  float& at(std::size_t t, std::size_t h, std::size_t w, std::size_t c) noexcept {
    return pixels[index(t, h, w, c)];
  }
  float at(std::size_t t, std::size_t h, std::size_t w, std::size_t c) const noexcept {
    return pixels[index(t, h, w, c)];
  }

  bool same_shape(const Video& other) const noexcept {
    return frames == other.frames && height == other.height && width == other.width &&
           channels == other.channels;
  }

  /// Throws InputError on zero extents, size mismatch, or values outside [0, 1].
  void validate() const;

  /// Frames [first, first + count).
  Video slice_frames(std::size_t first, std::size_t count) const;
};

/// Space-time patch extents along time, height and width.
struct PatchSpec {
  std::size_t pt = 1;
  std::size_t ph = 1;
  std::size_t pw = 1;

  std::size_t volume() const noexcept { return pt * ph * pw; }
  friend bool operator==(const PatchSpec&, const PatchSpec&) = default;
};

/// Patch counts per axis of a patchified clip.
struct GridDims {
  std::size_t gt = 1;
  std::size_t gh = 1;
  std::size_t gw = 1;

  std::size_t count() const noexcept { return gt * gh * gw; }
  std::size_t frame_count() const noexcept { return gh * gw; }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Patch-center position: i along height, j along width, k along time, each in [0, 1].
struct Coord {
  double i = 0.0;
  double j = 0.0;
  double k = 0.0;

  friend bool operator==(const Coord&, const Coord&) = default;
};

}  // namespace coordtok
