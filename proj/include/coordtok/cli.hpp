// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "coordtok/model/config.hpp"
#include "coordtok/model/video.hpp"
#include "coordtok/train.hpp"

namespace coordtok {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDivergence = 4;

/// Where training clips come from.
///
///   "sprites"  generated: count, frames (0 = model clip length), speeds, n_sprites, seed
///   "cvid"     `path` is a .cvid file or a directory of them
///   "png"      `path` holds *.png frames, or one subdirectory of frames per video
///
/// Loaded videos are resized and center-cropped to the model's frame size
/// when they differ; training clips are random temporal crops.
struct DataSpec {
  std::string source = "sprites";
  std::string path;
  std::size_t count = 64;
  std::size_t frames = 0;
  std::vector<double> speeds{0.5, 1.0, 2.0};
  std::size_t n_sprites = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const DataSpec& d);
void from_json(const nlohmann::json& j, DataSpec& d);

/// Loads or generates the videos a DataSpec describes, fitted to `model`.
std::vector<Video> load_videos(const DataSpec& spec, const ModelConfig& model);

/// Everything a train or finetune run needs. JSON keys mirror the fields;
/// absent keys keep their defaults. `model` may also be a preset name.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataSpec data;
  std::string run_dir = "run";
  /// Seeds model init, coordinate sampling and batch order.
  std::uint64_t seed = 0;
  bool deterministic = true;
  std::size_t log_every = 1;
  /// 0 writes only the final checkpoint.
  std::size_t checkpoint_every = 500;
  /// Starting weights (and optimizer moments, when stored) for a new run.
  std::string init_checkpoint;
  /// Continue from `run_dir/checkpoint.ctck` when it exists.
  bool resume = false;

  /// Full validation; runs before any compute.
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Effective run description echoed to `run_dir/config.json`: the config
/// plus command name and container format versions.
nlohmann::json effective_config(const RunConfig& c, const std::string& command);

/// Entry point of the `coordtok` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coordtok
