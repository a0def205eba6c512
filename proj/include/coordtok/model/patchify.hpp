// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "coordtok/model/video.hpp"

namespace coordtok {

/// M x (pt*ph*pw*C) matrix of flattened patches.
///
/// Row m is the patch at grid index (t, h, w) with m = (t*gh + h)*gw + w;
/// within a row the layout is (dt, dh, dw, c), row-major.
struct PatchMatrix {
  GridDims grid;
  PatchSpec spec;
  std::size_t channels = 3;
  std::vector<float> values;

  std::size_t rows() const noexcept { return grid.count(); }
  std::size_t cols() const noexcept { return spec.volume() * channels; }
  const float* row(std::size_t m) const noexcept { return values.data() + m * cols(); }
};

/// Splits a clip into non-overlapping patches. Throws ShapeError naming the
/// axis whose extent the patch does not divide.
PatchMatrix patchify(const Video& video, const PatchSpec& spec);

/// Exact inverse of patchify. `values` must be rows x cols of the grid/spec.
Video unpatchify(const std::vector<float>& values, const GridDims& grid, const PatchSpec& spec,
                 std::size_t channels = 3);
Video unpatchify(const PatchMatrix& patches);

/// Grid implied by a clip and a patch spec (with the same divisibility checks).
GridDims patch_grid(const Video& video, const PatchSpec& spec);

/// Flat row index of grid cell (t, h, w).
inline std::size_t patch_index(const GridDims& g, std::size_t t, std::size_t h, std::size_t w) noexcept {
  return (t * g.gh + h) * g.gw + w;
}

}  // namespace coordtok
