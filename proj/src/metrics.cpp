// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "coordtok/error.hpp"

namespace coordtok {

namespace {

void require_same(const Video& a, const Video& b, const char* what) {
  if (!a.same_shape(b) || a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": videos differ in shape");
  }
  if (a.size() == 0) throw InputError(std::string(what) + ": empty video");
}

// Channel-mean image of frame t, [H * W].
std::vector<double> gray_frame(const Video& v, std::size_t t) {
  std::vector<double> g(v.height * v.width);
  for (std::size_t y = 0; y < v.height; ++y)
    for (std::size_t x = 0; x < v.width; ++x) {
      double s = 0;
      for (std::size_t c = 0; c < v.channels; ++c) s += v.at(t, y, x, c);
      g[y * v.width + x] = s / static_cast<double>(v.channels);
    }
  return g;
}

std::vector<double> gaussian_window() {
  std::vector<double> w(kSsimWindow * kSsimWindow);
  const int r = kSsimWindow / 2;
  double total = 0;
  for (int i = 0; i < kSsimWindow; ++i)
    for (int j = 0; j < kSsimWindow; ++j) {
      const double d2 = (i - r) * (i - r) + (j - r) * (j - r);
      total += w[i * kSsimWindow + j] = std::exp(-d2 / (2 * kSsimSigma * kSsimSigma));
    }
  for (double& x : w) x /= total;
  return w;
}

}  // namespace

double psnr(const Video& a, const Video& b, double max_val) {
  require_same(a, b, "psnr");
  if (!(max_val > 0.0)) throw InputError("psnr: max_val must be positive");
  const std::size_t fs = a.frame_size();
  double total = 0;
  for (std::size_t t = 0; t < a.frames; ++t) {
    double sq = 0;
    for (std::size_t i = t * fs; i < (t + 1) * fs; ++i) {
      const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
      sq += d * d;
    }
    const double mse = sq / static_cast<double>(fs);
    total += mse == 0.0 ? kPsnrCapDb : std::min(kPsnrCapDb, 10.0 * std::log10(max_val * max_val / mse));
  }
  return total / static_cast<double>(a.frames);
}

double ssim(const Video& a, const Video& b) {
  require_same(a, b, "ssim");
  if (a.height < static_cast<std::size_t>(kSsimWindow) || a.width < static_cast<std::size_t>(kSsimWindow)) {
    throw InputError("ssim: frames smaller than the 11x11 window");
  }
  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;
  const std::vector<double> win = gaussian_window();
  const std::size_t oh = a.height - kSsimWindow + 1, ow = a.width - kSsimWindow + 1;
  double total = 0;
  for (std::size_t t = 0; t < a.frames; ++t) {
    double frame = 0;
    for (std::size_t c = 0; c < a.channels; ++c) {
      double chan = 0;
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
          for (int i = 0; i < kSsimWindow; ++i)
            for (int j = 0; j < kSsimWindow; ++j) {
              const double w = win[i * kSsimWindow + j];
              const double p = a.at(t, y + i, x + j, c), q = b.at(t, y + i, x + j, c);
              mx += w * p;
              my += w * q;
              sxx += w * p * p;
              syy += w * q * q;
              sxy += w * p * q;
            }
          const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
          chan += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
      frame += chan / static_cast<double>(oh * ow);
    }
    total += frame / static_cast<double>(a.channels);
  }
  return total / static_cast<double>(a.frames);
}

double dynamics_distance(const Video& v) {
  if (v.frames < 2) throw InputError("dynamics_magnitude: needs at least two frames");
  const std::size_t pixels = v.height * v.width;
  double total = 0;
  for (std::size_t t = 0; t + 1 < v.frames; ++t) {
    double pair = 0;
    for (std::size_t p = 0; p < pixels; ++p) {
      double sq = 0;
      for (std::size_t c = 0; c < v.channels; ++c) {
        const double d = static_cast<double>(v.pixels[(t * pixels + p) * v.channels + c]) -
                         v.pixels[((t + 1) * pixels + p) * v.channels + c];
        sq += d * d;
      }
      pair += std::sqrt(sq);
    }
    total += pair / static_cast<double>(pixels);
  }
  return total / static_cast<double>(v.frames - 1);
}

double dynamics_magnitude(const Video& v) { return std::log(dynamics_distance(v) + kDynamicsEps); }

double frequency_magnitude(const Video& v) {
  if (v.frames == 0 || v.height < 3 || v.width < 3) throw InputError("frequency_magnitude: frames must be at least 3x3");
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(v.height), W = static_cast<std::ptrdiff_t>(v.width);
  double total = 0;
  for (std::size_t t = 0; t < v.frames; ++t) {
    const std::vector<double> g = gray_frame(v, t);
    auto at = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
      return g[std::clamp<std::ptrdiff_t>(y, 0, H - 1) * W + std::clamp<std::ptrdiff_t>(x, 0, W - 1)];
    };
    double frame = 0;
    for (std::ptrdiff_t y = 0; y < H; ++y)
      for (std::ptrdiff_t x = 0; x < W; ++x) {
        const double gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                          (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
        const double gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                          (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
        frame += std::sqrt(gx * gx + gy * gy);
      }
    total += frame / static_cast<double>(H * W);
  }
  return total / static_cast<double>(v.frames);
}

double pearson_r(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InputError("pearson_r: length mismatch");
  if (xs.size() < 2) throw InputError("pearson_r: needs at least two points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw InputError("pearson_r: zero variance, correlation undefined");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> standardize_0_100(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double a = *lo, span = *hi - *lo;
  for (double& v : out) v = span > 0 ? 100.0 * (v - a) / span : 0.0;
  return out;
}

MetricRow MetricReport::mean() const {
  MetricRow m;
  m.id = "mean";
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.psnr += r.psnr;
    m.ssim += r.ssim;
    m.dynamics += r.dynamics;
    m.frequency += r.frequency;
  }
  const double n = static_cast<double>(rows.size());
  m.psnr /= n;
  m.ssim /= n;
  m.dynamics /= n;
  m.frequency /= n;
  return m;
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "# psnr_cap_db=" << kPsnrCapDb << "\n# dynamics_eps=" << kDynamicsEps
     << "\n# sobel_padding=replicate\n# ssim_window=11 gaussian sigma=1.5 k1=0.01 k2=0.03\n# count=" << count()
     << "\nid,psnr,ssim,dynamics,frequency\n";
  auto row = [&](const MetricRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f\n", r.psnr, r.ssim, r.dynamics, r.frequency);
    os << r.id << buf;
  };
  for (const auto& r : rows) row(r);
  row(mean());
  return os.str();
}

MetricReport evaluate(const std::vector<std::string>& ids, const std::vector<Video>& originals,
                      const std::vector<Video>& reconstructions) {
  if (ids.size() != originals.size() || originals.size() != reconstructions.size()) {
    throw InputError("evaluate: ids, originals and reconstructions differ in count");
  }
  MetricReport report;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    MetricRow r;
    r.id = ids[i];
    r.psnr = psnr(originals[i], reconstructions[i]);
    r.ssim = ssim(originals[i], reconstructions[i]);
    r.dynamics = dynamics_magnitude(originals[i]);
    r.frequency = frequency_magnitude(originals[i]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

}  // namespace coordtok
