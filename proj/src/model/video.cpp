// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/model/video.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coordtok/error.hpp"

namespace coordtok {

Video::Video(std::size_t t, std::size_t h, std::size_t w, std::size_t c, float fill)
    : frames(t), height(h), width(w), channels(c), pixels(t * h * w * c, fill) {}

void Video::validate() const {
  if (frames == 0 || height == 0 || width == 0 || channels == 0) {
    throw InputError("Video: zero extent (" + std::to_string(frames) + "x" +
                     std::to_string(height) + "x" + std::to_string(width) + "x" +
                     std::to_string(channels) + ")");
  }
  if (pixels.size() != frames * height * width * channels) {
    throw InputError("Video: pixel buffer holds " + std::to_string(pixels.size()) +
                     " values, extents need " + std::to_string(frames * height * width * channels));
  }
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const float v = pixels[i];
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw InputError("Video: pixel " + std::to_string(i) + " = " + std::to_string(v) +
                       " outside [0, 1]");
    }
  }
}

Video Video::slice_frames(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > frames) {
    throw InputError("Video::slice_frames: [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") outside " + std::to_string(frames) +
                     " frames");
  }
  Video out(count, height, width, channels);
  const auto begin = pixels.begin() + static_cast<std::ptrdiff_t>(first * frame_size());
  std::copy(begin, begin + static_cast<std::ptrdiff_t>(count * frame_size()), out.pixels.begin());
  return out;
}

}  // namespace coordtok
