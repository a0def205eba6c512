// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "coordtok/data.hpp"
#include "coordtok/error.hpp"
#include "coordtok/metrics.hpp"
#include "coordtok/rng.hpp"

using namespace coordtok;

namespace {

SpriteSceneSpec scene(double speed, std::uint64_t seed) {
  SpriteSceneSpec s;
  s.speed = speed;
  s.seed = seed;
  return s;
}

double chi2(const std::vector<std::size_t>& counts) {
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double x = 0;
  for (auto c : counts) x += (c - expected) * (c - expected) / expected;
  return x;
}

// Upper 1% points of the chi-square distribution.
constexpr double kChi2Df3 = 11.3449;
constexpr double kChi2Df4 = 13.2767;

// Bilinear sample at source position (sy, sx), edges clamped.
double bilinear(const Video& v, double sy, double sx, std::size_t c) {
  sy = std::clamp(sy, 0.0, static_cast<double>(v.height - 1));
  sx = std::clamp(sx, 0.0, static_cast<double>(v.width - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(sy)), x0 = static_cast<std::size_t>(std::floor(sx));
  const std::size_t y1 = std::min(y0 + 1, v.height - 1), x1 = std::min(x0 + 1, v.width - 1);
  const double fy = sy - y0, fx = sx - x0;
  return v.at(0, y0, x0, c) * (1 - fy) * (1 - fx) + v.at(0, y0, x1, c) * (1 - fy) * fx +
         v.at(0, y1, x0, c) * fy * (1 - fx) + v.at(0, y1, x1, c) * fy * fx;
}

Video ramp_image(std::size_t h, std::size_t w) {
  Video v(1, h, w, 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) v.at(0, y, x, c) = static_cast<float>((y * w + x + c) % 7) / 7.0f;
  return v;
}

}  // namespace

// ---------------------------------------------------------------- sprites

TEST_CASE("speed 0 gives identical frames") {
  const Video v = gen_sprites(scene(0.0, 3), 6, 16, 16);
  for (std::size_t t = 1; t < v.frames; ++t)
    CHECK(std::equal(v.pixels.begin(), v.pixels.begin() + v.frame_size(), v.pixels.begin() + t * v.frame_size()));
  CHECK(dynamics_distance(v) == 0.0);
}

TEST_CASE("sprites are deterministic per seed and differ across seeds") {
  CHECK(gen_sprites(scene(1.5, 9), 8, 16, 12).pixels == gen_sprites(scene(1.5, 9), 8, 16, 12).pixels);
  CHECK(gen_sprites(scene(1.5, 9), 8, 16, 12).pixels != gen_sprites(scene(1.5, 10), 8, 16, 12).pixels);
}

TEST_CASE("sprite pixels stay in [0, 1] and frames are non-trivial") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    SpriteSceneSpec spec = scene(3.0, s);
    spec.background = s % 2 ? Background::kFlat : Background::kGradient;
    spec.shapes = {s % 2 ? SpriteShape::kDisc : SpriteShape::kRect};
    const Video v = gen_sprites(spec, 10, 20, 24);
    CHECK(std::all_of(v.pixels.begin(), v.pixels.end(), [](float p) { return p >= 0.0f && p <= 1.0f; }));
    CHECK(frequency_magnitude(v) > 0.0);
  }
}

TEST_CASE("dynamics are monotone in speed for every seed of the suite") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    double prev = -1.0;
    for (double speed : {0.0, 1.0, 2.0, 4.0}) {
      const double d = dynamics_distance(gen_sprites(scene(speed, s), 16, 32, 32));
      CHECK_MESSAGE(d >= prev, "seed " << s << " speed " << speed);
      prev = d;
    }
    CHECK(dynamics_magnitude(gen_sprites(scene(4.0, s), 16, 32, 32)) >
          dynamics_magnitude(gen_sprites(scene(1.0, s), 16, 32, 32)));
  }
}

TEST_CASE("sprite generation rejects zero extents and bad velocities") {
  CHECK_THROWS_AS(gen_sprites(scene(1.0, 0), 0, 8, 8), InputError);
  CHECK_THROWS_AS(gen_sprites(scene(1.0, 0), 4, 0, 8), InputError);
  CHECK_THROWS_AS(gen_sprites(scene(std::nan(""), 0), 4, 8, 8), InputError);
}

TEST_CASE("corpus cycles speeds and seeds clips consecutively") {
  const auto corpus = gen_corpus(4, 6, 12, 12, {0.0, 2.0}, 50);
  REQUIRE(corpus.size() == 4);
  CHECK(dynamics_distance(corpus[0]) == 0.0);
  CHECK(dynamics_distance(corpus[1]) > 0.0);
  CHECK(corpus[3].pixels == gen_sprites(scene(2.0, 53), 6, 12, 12).pixels);
}

// ---------------------------------------------------------------- resize

TEST_CASE("same-size resize is the identity") {
  const Video v = gen_sprites(scene(1.0, 1), 3, 10, 14);
  CHECK(resize_center_crop(v, 10, 14).pixels == v.pixels);
}

TEST_CASE("downscaling a constant image stays constant") {
  Video v(2, 8, 8, 3, 0.4f);
  const Video r = resize_center_crop(v, 4, 4);
  for (float p : r.pixels) CHECK(p == doctest::Approx(0.4f));
}

TEST_CASE("4x4 checkerboard to 2x2 matches the interpolation oracle") {
  Video v(1, 4, 4, 3);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t c = 0; c < 3; ++c) v.at(0, y, x, c) = (x + y) % 2 ? 1.0f : 0.0f;
  const Video r = resize_center_crop(v, 2, 2);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        // Output pixel centers land at source (2y + 0.5, 2x + 0.5).
        CHECK(r.at(0, y, x, c) == doctest::Approx(bilinear(v, 2.0 * y + 0.5, 2.0 * x + 0.5, c)).epsilon(1e-6));
        CHECK(r.at(0, y, x, c) == doctest::Approx(0.5));
      }
}

TEST_CASE("aspect-preserving resize then center crop matches the oracle") {
  const Video v = ramp_image(6, 12);
  // Scale 2/3 fits height exactly (6 -> 4) and gives width 8; crop keeps columns 2..5.
  const Video r = resize_center_crop(v, 4, 4);
  REQUIRE(r.height == 4);
  REQUIRE(r.width == 4);
  const double scale = 4.0 / 6.0;
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double sy = (y + 0.5) / scale - 0.5, sx = (x + 2 + 0.5) / scale - 0.5;
        CHECK(r.at(0, y, x, c) == doctest::Approx(bilinear(v, sy, sx, c)).epsilon(1e-6));
      }
  CHECK_THROWS_AS(resize_center_crop(v, 0, 4), InputError);
}

TEST_CASE("upscaling keeps values within the source range") {
  const Video v = ramp_image(3, 3);
  const Video r = resize_center_crop(v, 7, 5);
  CHECK(r.height == 7);
  CHECK(r.width == 5);
  const auto [lo, hi] = std::minmax_element(v.pixels.begin(), v.pixels.end());
  for (float p : r.pixels) CHECK((p >= *lo - 1e-6f && p <= *hi + 1e-6f));
}

// ---------------------------------------------------------------- batches

TEST_CASE("clip_len equal to the source length returns whole videos") {
  const auto src = gen_corpus(3, 5, 8, 8, {1.0}, 0);
  Rng rng(1);
  for (const Video& v : make_batch(src, rng, 6, 5)) {
    CHECK(std::any_of(src.begin(), src.end(), [&](const Video& s) { return s.pixels == v.pixels; }));
  }
}

TEST_CASE("batches are a pure function of (seed, step)") {
  const auto src = gen_corpus(5, 12, 8, 8, {1.0, 2.0}, 0);
  const auto a = make_batch(src, 7, 3, 4, 6), b = make_batch(src, 7, 3, 4, 6), c = make_batch(src, 7, 4, 4, 6);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].pixels == b[i].pixels);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || a[i].pixels != c[i].pixels;
  CHECK(differs);
}

TEST_CASE("crop starts and source choice are uniform") {
  // Frame t of video k holds the value (k * 20 + t) / 100 everywhere.
  std::vector<Video> src;
  for (std::size_t k = 0; k < 4; ++k) {
    Video v(20, 2, 2, 1);
    for (std::size_t t = 0; t < 20; ++t)
      for (std::size_t i = 0; i < 4; ++i) v.pixels[t * 4 + i] = static_cast<float>(k * 20 + t) / 100.0f;
    src.push_back(v);
  }
  std::vector<std::size_t> starts(5, 0), videos(4, 0);
  Rng rng(11);
  for (int draw = 0; draw < 1000; ++draw) {
    for (const Video& clip : make_batch(src, rng, 5, 16)) {
      const auto code = static_cast<std::size_t>(std::lround(clip.pixels[0] * 100.0f));
      ++videos[code / 20];
      ++starts[code % 20];
    }
  }
  CHECK(chi2(starts) < kChi2Df4);
  CHECK(chi2(videos) < kChi2Df3);
}

TEST_CASE("make_batch rejects clips longer than a source") {
  const auto src = gen_corpus(2, 5, 8, 8, {1.0}, 0);
  Rng rng(0);
  CHECK_THROWS_AS(make_batch(src, rng, 2, 6), InputError);
  CHECK_THROWS_AS(make_batch({}, rng, 2, 1), InputError);
}

// ---------------------------------------------------------------- png

TEST_CASE("png frames round trip within 8-bit quantization") {
  const auto dir = std::filesystem::temp_directory_path() / "coordtok_test_png";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const Video v = gen_sprites(scene(2.0, 4), 3, 9, 11);
  write_png_frames(v, dir);
  const Video r = load_png_frames(dir);
  REQUIRE(r.same_shape(v));
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(r.pixels[i] - v.pixels[i]) <= 1.0f / 510.0f + 1e-6f);
  std::filesystem::remove_all(dir);
  CHECK_THROWS(load_png_frames(dir));
}
