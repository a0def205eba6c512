// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "coordtok/model/video.hpp"
#include "coordtok/rng.hpp"

namespace coordtok {

enum class SpriteShape { kRect, kDisc };
enum class Background { kFlat, kGradient };

struct SpriteSceneSpec {
  std::size_t n_sprites = 3;
  /// Shapes cycled over sprites; empty draws each shape from the seed.
  std::vector<SpriteShape> shapes;
  /// Pixels per frame. Directions come from the seed; magnitudes are speed * [0.75, 1].
  double speed = 1.0;
  Background background = Background::kGradient;
  std::uint64_t seed = 0;
};

/// Anti-aliased sprites bouncing off the frame edges over a static
/// background. Pixels lie in [0, 1]. Deterministic in the seed.
Video gen_sprites(const SpriteSceneSpec& spec, std::size_t frames, std::size_t height, std::size_t width);

/// `count` clips whose speeds cycle through `speeds`; clip c uses seed `seed + c`.
std::vector<Video> gen_corpus(std::size_t count, std::size_t frames, std::size_t height, std::size_t width,
                              const std::vector<double>& speeds, std::uint64_t seed);

/// Scales so both sides cover the target (aspect preserved, half-pixel
/// bilinear sampling with edge clamping), then crops the center.
Video resize_center_crop(const Video& video, std::size_t out_h, std::size_t out_w);

/// `batch_size` clips of `clip_len` frames: a uniform source video, then a
/// uniform start in [0, T - clip_len].
std::vector<Video> make_batch(const std::vector<Video>& source, Rng& rng, std::size_t batch_size,
                              std::size_t clip_len);

/// Batch for one training step; a pure function of (seed, step) on a stream
/// separate from coordinate sampling.
std::vector<Video> make_batch(const std::vector<Video>& source, std::uint64_t seed, std::uint64_t step,
                              std::size_t batch_size, std::size_t clip_len);

/// Reads every *.png in `dir` (sorted by file name) as one frame. Gray,
/// gray+alpha, RGB and RGBA inputs at 8 or 16 bits are converted to RGB.
Video load_png_frames(const std::filesystem::path& dir);

/// Writes frame t as `dir/frame_%05d.png` (8-bit RGB).
void write_png_frames(const Video& video, const std::filesystem::path& dir);

}  // namespace coordtok
