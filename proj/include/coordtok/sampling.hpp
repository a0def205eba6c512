// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "coordtok/model/video.hpp"
#include "coordtok/rng.hpp"

namespace coordtok {

/// Decoder patch grid of a clip.
using DecoderGrid = GridDims;

struct PatchIndex {
  std::size_t t = 0;
  std::size_t h = 0;
  std::size_t w = 0;
};

/// Center of grid cell (t, h, w): i = (h + 0.5)/gh, j = (w + 0.5)/gw, k = (t + 0.5)/gt.
Coord coord_of_patch(const PatchIndex& idx, const DecoderGrid& grid);

/// Plane cell containing a coordinate, per axis (height, width, time):
/// lower node indices (l, m, n) and the fractional weights of the upper nodes.
struct GridCell {
  std::array<std::size_t, 3> lower{};
  std::array<double, 3> weight{};
};
GridCell grid_cell_of_coord(const Coord& c, std::size_t plane_h, std::size_t plane_w,
                            std::size_t plane_t);

/// Coordinates together with the flat patch rows they address.
struct CoordSample {
  std::vector<Coord> coords;
  std::vector<std::size_t> patches;
};

/// N distinct patches, uniform without replacement (partial Fisher-Yates).
CoordSample sample_random_patch(Rng& rng, const DecoderGrid& grid, std::size_t n);

/// n_frames distinct time slabs, uniform without replacement; every patch of
/// each slab, slab by slab in grid order.
CoordSample sample_random_frame(Rng& rng, const DecoderGrid& grid, std::size_t n_frames);

/// All patches in grid order.
CoordSample all_patches(const DecoderGrid& grid);

}  // namespace coordtok
