// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/model/patchify.hpp"

#include <string>

#include "coordtok/error.hpp"

namespace coordtok {
namespace {

void check_axis(std::size_t extent, std::size_t patch, const char* axis) {
  if (patch == 0 || extent % patch != 0) {
    throw ShapeError(std::string("patchify: patch extent ") + std::to_string(patch) +
                     " does not divide " + axis + " extent " + std::to_string(extent));
  }
}

// Calls fn(row, col, pixel_index) for every element of the patch matrix.
template <typename Fn>
void for_each_patch_element(const GridDims& g, const PatchSpec& s, std::size_t height,
                            std::size_t width, std::size_t channels, Fn&& fn) {
  const std::size_t cols = s.volume() * channels;
  for (std::size_t t = 0; t < g.gt; ++t)
    for (std::size_t h = 0; h < g.gh; ++h)
      for (std::size_t w = 0; w < g.gw; ++w) {
        const std::size_t row = patch_index(g, t, h, w);
        std::size_t col = 0;
        for (std::size_t dt = 0; dt < s.pt; ++dt)
          for (std::size_t dh = 0; dh < s.ph; ++dh) {
            const std::size_t base =
                (((t * s.pt + dt) * height + h * s.ph + dh) * width + w * s.pw) * channels;
            for (std::size_t k = 0; k < s.pw * channels; ++k, ++col) {
              fn(row * cols + col, base + k);
            }
          }
      }
}

}  // namespace

GridDims patch_grid(const Video& video, const PatchSpec& spec) {
  check_axis(video.frames, spec.pt, "time");
  check_axis(video.height, spec.ph, "height");
  check_axis(video.width, spec.pw, "width");
  return {video.frames / spec.pt, video.height / spec.ph, video.width / spec.pw};
}

PatchMatrix patchify(const Video& video, const PatchSpec& spec) {
  PatchMatrix out;
  out.grid = patch_grid(video, spec);
  out.spec = spec;
  out.channels = video.channels;
  out.values.resize(video.pixels.size());
  for_each_patch_element(out.grid, spec, video.height, video.width, video.channels,
                         [&](std::size_t dst, std::size_t src) { out.values[dst] = video.pixels[src]; });
  return out;
}

Video unpatchify(const std::vector<float>& values, const GridDims& grid, const PatchSpec& spec,
                 std::size_t channels) {
  if (grid.count() == 0 || spec.volume() == 0 || channels == 0) {
    throw ShapeError("unpatchify: empty grid or patch");
  }
  const std::size_t expected = grid.count() * spec.volume() * channels;
  if (values.size() != expected) {
    throw ShapeError("unpatchify: got " + std::to_string(values.size()) + " values, grid and spec need " +
                     std::to_string(expected));
  }
  Video video(grid.gt * spec.pt, grid.gh * spec.ph, grid.gw * spec.pw, channels);
  for_each_patch_element(grid, spec, video.height, video.width, channels,
                         [&](std::size_t src, std::size_t dst) { video.pixels[dst] = values[src]; });
  return video;
}

Video unpatchify(const PatchMatrix& patches) {
  return unpatchify(patches.values, patches.grid, patches.spec, patches.channels);
}

}  // namespace coordtok
