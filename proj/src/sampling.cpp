// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/sampling.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "coordtok/diffcore/ops.hpp"
#include "coordtok/error.hpp"

namespace coordtok {
namespace {

void check_grid(const DecoderGrid& grid) {
  if (grid.gt == 0 || grid.gh == 0 || grid.gw == 0) throw InputError("decoder grid has a zero extent");
}

// First k entries of a uniform random permutation of [0, n).
std::vector<std::size_t> choose_distinct(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + rng.uniform_index(n - i)]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

Coord coord_of_patch(const PatchIndex& idx, const DecoderGrid& grid) {
  check_grid(grid);
  if (idx.t >= grid.gt || idx.h >= grid.gh || idx.w >= grid.gw) {
    throw InputError("coord_of_patch: index (" + std::to_string(idx.t) + "," + std::to_string(idx.h) +
                     "," + std::to_string(idx.w) + ") outside grid (" + std::to_string(grid.gt) + "," +
                     std::to_string(grid.gh) + "," + std::to_string(grid.gw) + ")");
  }
  return {(static_cast<double>(idx.h) + 0.5) / static_cast<double>(grid.gh),
          (static_cast<double>(idx.w) + 0.5) / static_cast<double>(grid.gw),
          (static_cast<double>(idx.t) + 0.5) / static_cast<double>(grid.gt)};
}

GridCell grid_cell_of_coord(const Coord& c, std::size_t plane_h, std::size_t plane_w,
                            std::size_t plane_t) {
  const double comps[3] = {c.i, c.j, c.k};
  const std::size_t extents[3] = {plane_h, plane_w, plane_t};
  GridCell cell;
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(comps[a])) throw InputError("grid_cell_of_coord: non-finite coordinate");
    if (comps[a] < 0.0 || comps[a] > 1.0) {
      throw InputError("grid_cell_of_coord: component " + std::to_string(comps[a]) + " outside [0, 1]");
    }
    if (extents[a] == 0) throw InputError("grid_cell_of_coord: zero plane extent");
    const diff::AxisCell ac =
        diff::locate_axis_cell(comps[a] * static_cast<double>(extents[a] - 1), extents[a]);
    cell.lower[static_cast<std::size_t>(a)] = ac.lower;
    cell.weight[static_cast<std::size_t>(a)] = ac.weight;
  }
  return cell;
}

CoordSample sample_random_patch(Rng& rng, const DecoderGrid& grid, std::size_t n) {
  check_grid(grid);
  const std::size_t m = grid.count();
  if (n == 0 || n > m) {
    throw InputError("sample_random_patch: N=" + std::to_string(n) + " outside [1, " + std::to_string(m) + "]");
  }
  CoordSample out;
  out.patches = choose_distinct(rng, m, n);
  out.coords.reserve(n);
  for (std::size_t p : out.patches) {
    out.coords.push_back(coord_of_patch({p / grid.frame_count(), (p / grid.gw) % grid.gh, p % grid.gw}, grid));
  }
  return out;
}

CoordSample sample_random_frame(Rng& rng, const DecoderGrid& grid, std::size_t n_frames) {
  check_grid(grid);
  if (n_frames == 0 || n_frames > grid.gt) {
    throw InputError("sample_random_frame: n_frames=" + std::to_string(n_frames) + " outside [1, " +
                     std::to_string(grid.gt) + "]");
  }
  CoordSample out;
  for (std::size_t t : choose_distinct(rng, grid.gt, n_frames)) {
    for (std::size_t h = 0; h < grid.gh; ++h)
      for (std::size_t w = 0; w < grid.gw; ++w) {
        out.patches.push_back((t * grid.gh + h) * grid.gw + w);
        out.coords.push_back(coord_of_patch({t, h, w}, grid));
      }
  }
  return out;
}

CoordSample all_patches(const DecoderGrid& grid) {
  check_grid(grid);
  CoordSample out;
  for (std::size_t t = 0; t < grid.gt; ++t)
    for (std::size_t h = 0; h < grid.gh; ++h)
      for (std::size_t w = 0; w < grid.gw; ++w) {
        out.patches.push_back((t * grid.gh + h) * grid.gw + w);
        out.coords.push_back(coord_of_patch({t, h, w}, grid));
      }
  return out;
}

}  // namespace coordtok
