// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "coordtok/model/video.hpp"

namespace coordtok {

/// Value assigned to frames with zero error.
inline constexpr double kPsnrCapDb = 100.0;
/// Offset inside the dynamics logarithm.
inline constexpr double kDynamicsEps = 1e-8;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Frame-averaged PSNR in dB.
double psnr(const Video& a, const Video& b, double max_val = 1.0);

/// Frame-averaged, channel-averaged SSIM over valid 11x11 Gaussian windows.
double ssim(const Video& a, const Video& b);

/// Mean over consecutive frame pairs of the mean per-pixel RGB distance.
double dynamics_distance(const Video& v);
/// log(dynamics_distance + eps).
double dynamics_magnitude(const Video& v);

/// Mean Sobel gradient magnitude of the channel-mean image, replicate padded.
double frequency_magnitude(const Video& v);

/// Sample Pearson correlation. Throws InputError on length mismatch, fewer
/// than two points, or zero variance.
double pearson_r(std::span<const double> xs, std::span<const double> ys);

/// Min-max rescaling to [0, 100]. Constant input maps to 0.
std::vector<double> standardize_0_100(std::span<const double> values);

struct MetricRow {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  double dynamics = 0.0;
  double frequency = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;

  std::size_t count() const noexcept { return rows.size(); }
  /// Arithmetic means, id "mean".
  MetricRow mean() const;
  /// '#'-prefixed metadata lines, a header, one row per video and the mean row.
  std::string to_csv() const;
};

/// Scores each reconstruction against its original; dynamics and frequency
/// describe the original clip.
MetricReport evaluate(const std::vector<std::string>& ids, const std::vector<Video>& originals,
                      const std::vector<Video>& reconstructions);

}  // namespace coordtok
