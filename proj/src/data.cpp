// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/data.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "coordtok/error.hpp"

namespace coordtok {

namespace {

struct SpriteState {
  SpriteShape shape;
  double hx, hy;  // half extents (radius for discs)
  std::array<float, 3> color;
  double x0, y0, vx, vy;
};

// Position of a point bouncing between lo and hi after travelling `d` from `start`.
double reflect(double start, double d, double lo, double hi) {
  const double len = hi - lo;
  if (len <= 0.0) return lo;
  double p = std::fmod(start - lo + d, 2.0 * len);
  if (p < 0.0) p += 2.0 * len;
  return lo + (p > len ? 2.0 * len - p : p);
}

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// Fraction of pixel (px, py) covered by the sprite centred at (cx, cy).
double coverage(const SpriteState& s, double cx, double cy, double px, double py) {
  if (s.shape == SpriteShape::kRect) {
    return overlap(px, px + 1, cx - s.hx, cx + s.hx) * overlap(py, py + 1, cy - s.hy, cy + s.hy);
  }
  const double r = s.hx;
  if (px + 1 < cx - r || px > cx + r || py + 1 < cy - r || py > cy + r) return 0.0;
  int inside = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const double dx = px + (a + 0.5) / 4 - cx, dy = py + (b + 0.5) / 4 - cy;
      inside += dx * dx + dy * dy <= r * r;
    }
  return inside / 16.0;
}

}  // namespace

Video gen_sprites(const SpriteSceneSpec& spec, std::size_t frames, std::size_t height, std::size_t width) {
  if (frames == 0 || height == 0 || width == 0) throw InputError("gen_sprites: extents must be positive");
  if (!std::isfinite(spec.speed) || spec.speed < 0.0) throw InputError("gen_sprites: speed must be finite and >= 0");
  Rng rng(spec.seed);
  const double H = static_cast<double>(height), W = static_cast<double>(width);
  const double side = std::min(H, W);

  std::array<float, 3> c0{}, c1{};
  for (auto& c : c0) c = static_cast<float>(rng.uniform(0.15, 0.45));
  for (auto& c : c1) c = static_cast<float>(rng.uniform(0.15, 0.45));
  const double angle = rng.uniform(0.0, 2 * std::numbers::pi);
  const double gx = std::cos(angle), gy = std::sin(angle);

  std::vector<SpriteState> sprites;
  for (std::size_t n = 0; n < spec.n_sprites; ++n) {
    SpriteState s;
    s.shape = spec.shapes.empty() ? (rng.uniform() < 0.5 ? SpriteShape::kRect : SpriteShape::kDisc)
                                  : spec.shapes[n % spec.shapes.size()];
    s.hx = side * rng.uniform(0.09, 0.16);
    s.hy = s.shape == SpriteShape::kDisc ? s.hx : side * rng.uniform(0.09, 0.16);
    for (auto& c : s.color) c = static_cast<float>(rng.uniform(0.55, 0.95));
    s.color[rng.uniform_index(3)] = static_cast<float>(rng.uniform(0.05, 0.3));
    s.x0 = rng.uniform(s.hx, std::max(s.hx, W - s.hx));
    s.y0 = rng.uniform(s.hy, std::max(s.hy, H - s.hy));
    const double dir = rng.uniform(0.0, 2 * std::numbers::pi);
    const double mag = spec.speed * rng.uniform(0.75, 1.0);
    s.vx = mag * std::cos(dir);
    s.vy = mag * std::sin(dir);
    sprites.push_back(s);
  }

  Video v(frames, height, width);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        double mix = 0.0;
        if (spec.background == Background::kGradient) {
          mix = 0.5 + 0.5 * (gx * ((x + 0.5) / W - 0.5) + gy * ((y + 0.5) / H - 0.5)) * std::numbers::sqrt2;
          mix = std::clamp(mix, 0.0, 1.0);
        }
        for (std::size_t c = 0; c < 3; ++c) v.at(t, y, x, c) = static_cast<float>(c0[c] + (c1[c] - c0[c]) * mix);
      }
    const double tt = static_cast<double>(t);
    for (const SpriteState& s : sprites) {
      const double cx = reflect(s.x0, s.vx * tt, s.hx, W - s.hx);
      const double cy = reflect(s.y0, s.vy * tt, s.hy, H - s.hy);
      const std::size_t x_lo = static_cast<std::size_t>(std::max(0.0, std::floor(cx - s.hx)));
      const std::size_t x_hi = static_cast<std::size_t>(std::min(W, std::ceil(cx + s.hx)));
      const std::size_t y_lo = static_cast<std::size_t>(std::max(0.0, std::floor(cy - s.hy)));
      const std::size_t y_hi = static_cast<std::size_t>(std::min(H, std::ceil(cy + s.hy)));
      for (std::size_t y = y_lo; y < y_hi; ++y)
        for (std::size_t x = x_lo; x < x_hi; ++x) {
          const double a = coverage(s, cx, cy, static_cast<double>(x), static_cast<double>(y));
          if (a <= 0.0) continue;
          for (std::size_t c = 0; c < 3; ++c) {
            float& p = v.at(t, y, x, c);
            p = static_cast<float>((1.0 - a) * p + a * s.color[c]);
          }
        }
    }
  }
  return v;
}

std::vector<Video> gen_corpus(std::size_t count, std::size_t frames, std::size_t height, std::size_t width,
                              const std::vector<double>& speeds, std::uint64_t seed) {
  if (speeds.empty()) throw InputError("gen_corpus: no speeds");
  std::vector<Video> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    SpriteSceneSpec spec;
    spec.speed = speeds[c % speeds.size()];
    spec.seed = seed + c;
    out.push_back(gen_sprites(spec, frames, height, width));
  }
  return out;
}

Video resize_center_crop(const Video& video, std::size_t out_h, std::size_t out_w) {
  video.validate();
  if (out_h == 0 || out_w == 0) throw InputError("resize_center_crop: target extents must be positive");
  const double s = std::max(static_cast<double>(out_h) / video.height, static_cast<double>(out_w) / video.width);
  const std::size_t rh = std::max(out_h, static_cast<std::size_t>(std::lround(video.height * s)));
  const std::size_t rw = std::max(out_w, static_cast<std::size_t>(std::lround(video.width * s)));
  const double sy = static_cast<double>(rh) / video.height, sx = static_cast<double>(rw) / video.width;
  const std::size_t oy = (rh - out_h) / 2, ox = (rw - out_w) / 2;

  auto axis = [](double dst, double scale, std::size_t n) {
    const double src = std::clamp((dst + 0.5) / scale - 0.5, 0.0, static_cast<double>(n - 1));
    const std::size_t lo = std::min(static_cast<std::size_t>(src), n - 1);
    const std::size_t hi = std::min(lo + 1, n - 1);
    return std::make_tuple(lo, hi, src - static_cast<double>(lo));
  };

  Video out(video.frames, out_h, out_w, video.channels);
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto [y0, y1, wy] = axis(static_cast<double>(y + oy), sy, video.height);
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto [x0, x1, wx] = axis(static_cast<double>(x + ox), sx, video.width);
      for (std::size_t t = 0; t < video.frames; ++t)
        for (std::size_t c = 0; c < video.channels; ++c) {
          const double v = (1 - wy) * ((1 - wx) * video.at(t, y0, x0, c) + wx * video.at(t, y0, x1, c)) +
                           wy * ((1 - wx) * video.at(t, y1, x0, c) + wx * video.at(t, y1, x1, c));
          out.at(t, y, x, c) = static_cast<float>(v);
        }
    }
  }
  return out;
}

std::vector<Video> make_batch(const std::vector<Video>& source, Rng& rng, std::size_t batch_size,
                              std::size_t clip_len) {
  if (source.empty()) throw InputError("make_batch: empty source");
  if (batch_size == 0 || clip_len == 0) throw InputError("make_batch: batch_size and clip_len must be positive");
  for (const Video& v : source) {
    if (v.frames < clip_len) {
      throw InputError("make_batch: clip_len " + std::to_string(clip_len) + " exceeds a source video of " +
                       std::to_string(v.frames) + " frames");
    }
  }
  std::vector<Video> batch;
  batch.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const Video& v = source[rng.uniform_index(source.size())];
    const std::size_t start = rng.uniform_index(v.frames - clip_len + 1);
    batch.push_back(v.slice_frames(start, clip_len));
  }
  return batch;
}

std::vector<Video> make_batch(const std::vector<Video>& source, std::uint64_t seed, std::uint64_t step,
                              std::size_t batch_size, std::size_t clip_len) {
  // Own stream, so batches never share draws with coordinate sampling seeded alike.
  constexpr std::uint64_t kBatchStream = 0x6261746368ull;
  Rng rng = Rng(seed).fork(kBatchStream).fork(step);
  return make_batch(source, rng, batch_size, clip_len);
}

Video load_png_frames(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("load_png_frames: not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  if (ec) throw IoError("load_png_frames: cannot list " + dir.string() + ": " + ec.message());
  if (files.empty()) throw IoError("load_png_frames: no .png files in " + dir.string());
  std::sort(files.begin(), files.end());

  Video video;
  std::vector<unsigned char> buffer;
  for (std::size_t t = 0; t < files.size(); ++t) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, files[t].c_str())) {
      throw IoError("load_png_frames: " + files[t].string() + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    buffer.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
      png_image_free(&image);
      throw IoError("load_png_frames: " + files[t].string() + ": " + image.message);
    }
    if (t == 0) {
      video = Video(files.size(), image.height, image.width, 3);
    } else if (image.height != video.height || image.width != video.width) {
      throw InputError("load_png_frames: " + files[t].string() + " is " + std::to_string(image.width) + "x" +
                       std::to_string(image.height) + ", expected " + std::to_string(video.width) + "x" +
                       std::to_string(video.height));
    }
    const std::size_t fs = video.frame_size();
    for (std::size_t i = 0; i < fs; ++i) video.pixels[t * fs + i] = buffer[i] / 255.0f;
  }
  return video;
}

void write_png_frames(const Video& video, const std::filesystem::path& dir) {
  video.validate();
  if (video.channels != 3) throw InputError("write_png_frames: only RGB videos are supported");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("write_png_frames: cannot create " + dir.string() + ": " + ec.message());
  std::vector<unsigned char> buffer(video.frame_size());
  for (std::size_t t = 0; t < video.frames; ++t) {
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      buffer[i] = static_cast<unsigned char>(std::lround(video.pixels[t * buffer.size() + i] * 255.0f));
    }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(video.width);
    image.height = static_cast<png_uint_32>(video.height);
    image.format = PNG_FORMAT_RGB;
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.png", t);
    const std::filesystem::path file = dir / name;
    if (!png_image_write_to_file(&image, file.c_str(), 0, buffer.data(), 0, nullptr)) {
      throw IoError("write_png_frames: " + file.string() + ": " + image.message);
    }
  }
}

}  // namespace coordtok
