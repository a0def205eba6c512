// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "coordtok/diffcore/optim.hpp"
#include "coordtok/diffcore/tensor.hpp"
#include "coordtok/model/coordtok.hpp"
#include "coordtok/rng.hpp"
#include "coordtok/sampling.hpp"

namespace coordtok {

enum class Phase { kMain, kFinetune };

/// kAuto picks random patches in the main phase and random frames in fine-tuning.
enum class Sampler { kAuto, kRandomPatch, kRandomFrame };

struct TrainConfig {
  Phase phase = Phase::kMain;
  std::size_t batch_size = 8;
  std::size_t steps = 2000;
  /// Coordinates per video for random-patch sampling.
  std::size_t n_coords = 64;
  /// Decoder time slabs per video for random-frame sampling.
  std::size_t n_frames = 2;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;
  /// Weight of the perceptual term; only used in the fine-tune phase.
  double perceptual_weight = 1.0;
  Sampler sampler = Sampler::kAuto;
  std::uint64_t seed = 0;
  bool deterministic = true;

  Sampler resolved_sampler() const noexcept;
  diff::AdamWConfig optimizer() const noexcept;
  /// Throws ConfigError on non-positive counts or invalid rates.
  void validate() const;
  /// Throws ConfigError when the sampling counts do not fit the decoder grid.
  void validate_for(const ModelConfig& model) const;

  /// Desk-scale defaults for a phase: 2000 main steps or 500 fine-tune steps.
  static TrainConfig defaults(Phase phase);
};

std::string to_string(Phase phase);
Phase phase_from_string(const std::string& s);
std::string to_string(Sampler sampler);
Sampler sampler_from_string(const std::string& s);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct LossStats {
  std::uint64_t count = 0;
  double mean_l2 = 0.0;
  double mean_perceptual = 0.0;
  double last_total = 0.0;
};

struct TrainState {
  std::uint64_t step = 0;
  diff::AdamWState<float> optimizer;
  /// Root generator; each step draws from `rng.fork(step)` so batches are a
  /// pure function of (seed, step).
  Rng rng;
  LossStats stats;

  static TrainState fresh(const TrainConfig& config);
};

/// Step, rng and loss statistics. Moments are stored as checkpoint tensors.
nlohmann::json train_state_json(const TrainState& state);
void train_state_from_json(const nlohmann::json& j, TrainState& state);

struct StepResult {
  std::uint64_t step = 0;
  Phase phase = Phase::kMain;
  double l2 = 0.0;
  double perceptual = 0.0;
  double total = 0.0;
  /// Largest decoder-side live-element count over the batch's videos.
  std::int64_t peak_elems = 0;
  /// Whole-step live-element peak, encoder included.
  std::int64_t step_peak_elems = 0;
  double ms = 0.0;
};

/// One NDJSON log record: {step, phase, l2, perceptual, peak_elems, ms}.
nlohmann::json log_record(const StepResult& r);

/// Frame-pair scalar loss; frames are [F, H, W, C].
using PerceptualFn = std::function<diff::Tensor<float>(const diff::Tensor<float>&, const diff::Tensor<float>&)>;

template <typename T>
diff::Tensor<T> loss_l2(const diff::Tensor<T>& pred, const diff::Tensor<T>& target);

/// Mean squared difference of Sobel edge maps. Frames must match in shape.
template <typename T>
diff::Tensor<T> perceptual_proxy_loss(const diff::Tensor<T>& pred, const diff::Tensor<T>& target);

/// Reassembles decoded patches [N, pt ph pw C] into frames [n pt, H, W, C].
/// `patches` lists each row's flat grid index; they must cover whole time
/// slabs, each slab contiguous and in grid order. Throws InputError otherwise.
template <typename T>
diff::Tensor<T> assemble_frames(const diff::Tensor<T>& patches, std::span<const std::size_t> patch_ids,
                                const GridDims& grid, const PatchSpec& spec, std::size_t channels);

/// Rows `patch_ids` of a patch matrix as a constant tensor.
template <typename T>
diff::Tensor<T> patch_rows(const PatchMatrix& pm, std::span<const std::size_t> patch_ids);

/// Drives optimization of one model. The encoder graph is cut at the triplane:
/// the decoder runs on detached plane leaves (its peak is measured in
/// isolation), then plane gradients are pushed through the encoder.
class Trainer {
 public:
  Trainer(CoordTokModel<float>& model, TrainConfig config);
  Trainer(CoordTokModel<float>& model, TrainConfig config, TrainState state);

  /// Dispatches on the configured phase.
  StepResult step(const std::vector<Video>& batch);
  StepResult train_step_main(const std::vector<Video>& batch);
  StepResult train_step_finetune(const std::vector<Video>& batch);

  void set_perceptual(PerceptualFn fn) { perceptual_ = std::move(fn); }
  const TrainConfig& config() const noexcept { return config_; }
  TrainState& state() noexcept { return state_; }
  const TrainState& state() const noexcept { return state_; }
  CoordTokModel<float>& model() noexcept { return model_; }

 private:
  StepResult run(const std::vector<Video>& batch, Phase phase);

  CoordTokModel<float>& model_;
  TrainConfig config_;
  TrainState state_;
  PerceptualFn perceptual_;
};

/// Coordinates for one video under `sampler`.
CoordSample draw_coords(Rng& rng, const GridDims& grid, Sampler sampler, std::size_t n_coords,
                        std::size_t n_frames);

/// Mean squared error of the full reconstruction (all M coordinates decoded,
/// `chunk` as in reconstruct_full, no clamping) against each video, averaged.
double heldout_l2(const CoordTokModel<float>& model, const std::vector<Video>& videos,
                  std::size_t chunk = 0);

}  // namespace coordtok
