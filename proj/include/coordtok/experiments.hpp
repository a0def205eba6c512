// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coordtok/model/config.hpp"
#include "coordtok/train.hpp"

namespace coordtok {

using ProgressFn = std::function<void(const std::string&)>;

// ---------------------------------------------------------------- bench

enum class BenchMode { kRandomPatch, kFullFrame };

std::string to_string(BenchMode mode);

struct BenchConfig {
  /// Clip length is overridden per cell; everything else stays fixed.
  ModelConfig model;
  std::vector<std::size_t> frames{16, 32, 64};
  /// Coordinates per video in random-patch cells. Full-frame cells use N = M.
  std::size_t n_coords = 64;
  /// Live-element budget that max_batch is measured against.
  std::int64_t element_budget = 50'000'000;
  std::uint64_t seed = 0;
  /// Timed steps per cell after one warm-up step; peaks are the max over them.
  std::size_t repeats = 1;

  void validate() const;
};

struct BenchCell {
  std::size_t frames = 0;
  BenchMode mode = BenchMode::kRandomPatch;
  std::size_t n_coords = 0;
  /// Live elements of one video's decoder pass, loss and backward.
  std::int64_t decoder_peak = 0;
  /// Whole step for one video, encoder included.
  std::int64_t step_peak = 0;
  /// floor(budget / decoder_peak): videos whose decoder passes fit at once.
  std::int64_t max_batch = 0;
  double ms = 0.0;
};

/// One main-phase step per (frames, mode) cell, run sequentially.
std::vector<BenchCell> run_bench(const BenchConfig& config, const ProgressFn& progress = {});
std::string bench_csv(const std::vector<BenchCell>& cells, std::int64_t element_budget);

void to_json(nlohmann::json& j, const BenchConfig& c);
void from_json(const nlohmann::json& j, BenchConfig& c);

// ---------------------------------------------------------------- ablation

struct AblationConfig {
  /// 32 frames with one-frame time slabs so 3.125% is exactly one slab.
  ModelConfig model = default_model();
  /// Fraction of decoder patches supervised per video and step.
  double ratio = 0.03125;
  std::size_t corpus_size = 64;
  std::size_t heldout_size = 8;
  std::vector<double> speeds{0.5, 1.0, 2.0};
  std::size_t n_sprites = 1;
  /// Steps, batch and optimizer; sampler and counts are set per arm.
  TrainConfig train = default_train();
  std::size_t eval_every = 500;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::uint64_t data_seed = 100;

  void validate() const;
  static ModelConfig default_model();
  static TrainConfig default_train();
};

struct AblationCurve {
  Sampler sampler = Sampler::kRandomPatch;
  std::uint64_t seed = 0;
  /// (step, held-out l2) pairs; the last entry is the final step.
  std::vector<std::pair<std::size_t, double>> points;

  double final_l2() const { return points.empty() ? 0.0 : points.back().second; }
};

struct AblationResult {
  std::size_t n_coords = 0;
  std::size_t n_frames = 0;
  std::vector<AblationCurve> curves;
  /// Seeds where the random-patch final l2 is below random-frame.
  std::size_t patch_wins = 0;
};

/// Coordinate counts for `ratio` of the decoder grid: N = ratio M must be a
/// whole number of time slabs. Throws ConfigError otherwise.
std::pair<std::size_t, std::size_t> ablation_counts(const ModelConfig& model, double ratio);

/// Sprite corpus and disjoint held-out clips for the ablation.
std::pair<std::vector<Video>, std::vector<Video>> ablation_data(const AblationConfig& config);

AblationResult run_ablation(const AblationConfig& config, const ProgressFn& progress = {});
/// Long format: sampler, seed, step, heldout_l2.
std::string ablation_csv(const AblationResult& result);

void to_json(nlohmann::json& j, const AblationConfig& c);
void from_json(const nlohmann::json& j, AblationConfig& c);

}  // namespace coordtok
