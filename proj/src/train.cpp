// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/train.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "coordtok/diffcore/memory.hpp"
#include "coordtok/diffcore/ops.hpp"
#include "coordtok/error.hpp"
#include "coordtok/model/patchify.hpp"

namespace coordtok {

using diff::Tensor;

Sampler TrainConfig::resolved_sampler() const noexcept {
  if (sampler != Sampler::kAuto) return sampler;
  return phase == Phase::kMain ? Sampler::kRandomPatch : Sampler::kRandomFrame;
}

diff::AdamWConfig TrainConfig::optimizer() const noexcept {
  return {lr, beta1, beta2, eps, weight_decay};
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (n_coords == 0) throw ConfigError("train: n_coords must be positive");
  if (n_frames == 0) throw ConfigError("train: n_frames must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("train: eps must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("train: weight_decay must be finite and >= 0");
  }
  if (!(perceptual_weight >= 0.0) || !std::isfinite(perceptual_weight)) {
    throw ConfigError("train: perceptual_weight must be finite and >= 0");
  }
}

void TrainConfig::validate_for(const ModelConfig& model) const {
  validate();
  const GridDims grid = model.decoder_grid();
  if (resolved_sampler() == Sampler::kRandomPatch && n_coords > grid.count()) {
    throw ConfigError("train: n_coords=" + std::to_string(n_coords) + " exceeds the " +
                      std::to_string(grid.count()) + " decoder patches");
  }
  if (resolved_sampler() == Sampler::kRandomFrame && n_frames > grid.gt) {
    throw ConfigError("train: n_frames=" + std::to_string(n_frames) + " exceeds the " +
                      std::to_string(grid.gt) + " decoder time slabs");
  }
}

TrainConfig TrainConfig::defaults(Phase phase) {
  TrainConfig c;
  c.phase = phase;
  c.steps = phase == Phase::kMain ? 2000 : 500;
  return c;
}

std::string to_string(Phase phase) { return phase == Phase::kMain ? "main" : "finetune"; }

Phase phase_from_string(const std::string& s) {
  if (s == "main") return Phase::kMain;
  if (s == "finetune") return Phase::kFinetune;
  throw ConfigError("unknown phase '" + s + "' (expected main or finetune)");
}

std::string to_string(Sampler sampler) {
  switch (sampler) {
    case Sampler::kAuto: return "auto";
    case Sampler::kRandomPatch: return "random_patch";
    case Sampler::kRandomFrame: return "random_frame";
  }
  return "auto";
}

Sampler sampler_from_string(const std::string& s) {
  if (s == "auto") return Sampler::kAuto;
  if (s == "random_patch") return Sampler::kRandomPatch;
  if (s == "random_frame") return Sampler::kRandomFrame;
  throw ConfigError("unknown sampler '" + s + "' (expected auto, random_patch or random_frame)");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"phase", to_string(c.phase)},
       {"batch_size", c.batch_size},
       {"steps", c.steps},
       {"n_coords", c.n_coords},
       {"n_frames", c.n_frames},
       {"lr", c.lr},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"eps", c.eps},
       {"weight_decay", c.weight_decay},
       {"perceptual_weight", c.perceptual_weight},
       {"sampler", to_string(c.sampler)},
       {"seed", c.seed},
       {"deterministic", c.deterministic}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  try {
    if (j.contains("phase")) {
      const Phase p = phase_from_string(j.at("phase").get<std::string>());
      if (p != c.phase) {
        const TrainConfig d = TrainConfig::defaults(p);
        c.phase = p;
        c.steps = d.steps;
      }
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.steps = j.value("steps", c.steps);
    c.n_coords = j.value("n_coords", c.n_coords);
    c.n_frames = j.value("n_frames", c.n_frames);
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.perceptual_weight = j.value("perceptual_weight", c.perceptual_weight);
    if (j.contains("sampler")) c.sampler = sampler_from_string(j.at("sampler").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.deterministic = j.value("deterministic", c.deterministic);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

TrainState TrainState::fresh(const TrainConfig& config) {
  TrainState s;
  s.optimizer.config = config.optimizer();
  s.rng = Rng(config.seed);
  return s;
}

nlohmann::json train_state_json(const TrainState& state) {
  return {{"step", state.step},
          {"optimizer_step", state.optimizer.step},
          {"rng", state.rng.serialize()},
          {"stats",
           {{"count", state.stats.count},
            {"mean_l2", state.stats.mean_l2},
            {"mean_perceptual", state.stats.mean_perceptual},
            {"last_total", state.stats.last_total}}}};
}

void train_state_from_json(const nlohmann::json& j, TrainState& state) {
  try {
    state.step = j.at("step").get<std::uint64_t>();
    state.optimizer.step = j.at("optimizer_step").get<std::uint64_t>();
    state.rng.deserialize(j.at("rng").get<std::string>());
    const auto& s = j.at("stats");
    state.stats.count = s.at("count").get<std::uint64_t>();
    state.stats.mean_l2 = s.at("mean_l2").get<double>();
    state.stats.mean_perceptual = s.at("mean_perceptual").get<double>();
    state.stats.last_total = s.at("last_total").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::kCorrupt, std::string("train state: ") + e.what());
  }
}

nlohmann::json log_record(const StepResult& r) {
  return {{"step", r.step}, {"phase", to_string(r.phase)}, {"l2", r.l2},
          {"perceptual", r.perceptual}, {"peak_elems", r.peak_elems}, {"ms", r.ms}};
}

template <typename T>
Tensor<T> loss_l2(const Tensor<T>& pred, const Tensor<T>& target) {
  return diff::mse_loss(pred, target);
}

template <typename T>
Tensor<T> perceptual_proxy_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("perceptual_proxy_loss: frames " + diff::shape_str(pred.shape()) + " vs " +
                     diff::shape_str(target.shape()));
  }
  return diff::mse_loss(diff::sobel_edges(pred), diff::sobel_edges(target));
}

template <typename T>
Tensor<T> assemble_frames(const Tensor<T>& patches, std::span<const std::size_t> patch_ids,
                          const GridDims& grid, const PatchSpec& spec, std::size_t channels) {
  const std::size_t per_slab = grid.frame_count();
  const std::size_t cols = spec.volume() * channels;
  if (patches.rank() != 2 || patches.dim(1) != cols || patches.dim(0) != patch_ids.size()) {
    throw ShapeError("assemble_frames: patches " + diff::shape_str(patches.shape()) + " for " +
                     std::to_string(patch_ids.size()) + " ids of width " + std::to_string(cols));
  }
  if (patch_ids.empty() || patch_ids.size() % per_slab != 0) {
    throw InputError("assemble_frames: " + std::to_string(patch_ids.size()) +
                     " patches do not form whole frames of " + std::to_string(per_slab));
  }
  const std::size_t slabs = patch_ids.size() / per_slab;
  for (std::size_t s = 0; s < slabs; ++s) {
    const std::size_t first = patch_ids[s * per_slab];
    if (first % per_slab != 0 || first >= grid.count()) {
      throw InputError("assemble_frames: slab " + std::to_string(s) + " does not start a frame");
    }
    for (std::size_t q = 1; q < per_slab; ++q) {
      if (patch_ids[s * per_slab + q] != first + q) {
        throw InputError("assemble_frames: slab " + std::to_string(s) + " is incomplete or out of order");
      }
    }
  }
  const std::size_t H = grid.gh * spec.ph, W = grid.gw * spec.pw;
  const std::size_t F = slabs * spec.pt;
  std::vector<std::size_t> index(F * H * W * channels);
  std::size_t o = 0;
  for (std::size_t f = 0; f < F; ++f) {
    const std::size_t s = f / spec.pt, dt = f % spec.pt;
    for (std::size_t y = 0; y < H; ++y) {
      const std::size_t h = y / spec.ph, dh = y % spec.ph;
      for (std::size_t x = 0; x < W; ++x) {
        const std::size_t w = x / spec.pw, dw = x % spec.pw;
        const std::size_t row = s * per_slab + h * grid.gw + w;
        const std::size_t base = row * cols + ((dt * spec.ph + dh) * spec.pw + dw) * channels;
        for (std::size_t c = 0; c < channels; ++c) index[o++] = base + c;
      }
    }
  }
  return diff::gather(patches, std::move(index), {F, H, W, channels});
}

template <typename T>
Tensor<T> patch_rows(const PatchMatrix& pm, std::span<const std::size_t> patch_ids) {
  const std::size_t cols = pm.cols();
  std::vector<T> values(patch_ids.size() * cols);
  for (std::size_t n = 0; n < patch_ids.size(); ++n) {
    if (patch_ids[n] >= pm.rows()) throw InputError("patch_rows: index out of range");
    std::copy_n(pm.row(patch_ids[n]), cols, values.begin() + static_cast<std::ptrdiff_t>(n * cols));
  }
  return Tensor<T>::from({patch_ids.size(), cols}, std::move(values));
}

CoordSample draw_coords(Rng& rng, const GridDims& grid, Sampler sampler, std::size_t n_coords,
                        std::size_t n_frames) {
  if (sampler == Sampler::kRandomFrame) return sample_random_frame(rng, grid, n_frames);
  return sample_random_patch(rng, grid, n_coords);
}

Trainer::Trainer(CoordTokModel<float>& model, TrainConfig config)
    : Trainer(model, config, TrainState::fresh(config)) {}

Trainer::Trainer(CoordTokModel<float>& model, TrainConfig config, TrainState state)
    : model_(model), config_(std::move(config)), state_(std::move(state)),
      perceptual_(perceptual_proxy_loss<float>) {
  config_.validate_for(model_.config());
  state_.optimizer.config = config_.optimizer();
  if (config_.deterministic) Eigen::setNbThreads(1);
}

StepResult Trainer::step(const std::vector<Video>& batch) { return run(batch, config_.phase); }

StepResult Trainer::train_step_main(const std::vector<Video>& batch) {
  if (config_.phase != Phase::kMain) throw ConfigError("train_step_main: trainer is in the fine-tune phase");
  return run(batch, Phase::kMain);
}

StepResult Trainer::train_step_finetune(const std::vector<Video>& batch) {
  if (config_.phase != Phase::kFinetune) throw ConfigError("train_step_finetune: trainer is in the main phase");
  return run(batch, Phase::kFinetune);
}

StepResult Trainer::run(const std::vector<Video>& batch, Phase phase) {
  if (batch.empty()) throw InputError("train step: empty batch");
  const auto start = std::chrono::steady_clock::now();
  const ModelConfig& mc = model_.config();
  const GridDims grid = mc.decoder_grid();
  const Sampler sampler = config_.resolved_sampler();
  const bool perceptual = phase == Phase::kFinetune;
  if (perceptual && sampler != Sampler::kRandomFrame) {
    throw ConfigError("fine-tune phase needs whole frames (sampler random_frame)");
  }
  const float inv_batch = 1.0f / static_cast<float>(batch.size());

  StepResult result;
  result.phase = phase;
  model_.params().zero_grad();
  Rng rng = state_.rng.fork(state_.step);
  double l2_sum = 0.0, perc_sum = 0.0;
  {
    diff::PeakScope step_scope;
    for (const Video& video : batch) {
      const CoordSample sample = draw_coords(rng, grid, sampler, config_.n_coords, config_.n_frames);
      const PatchMatrix target_patches = patchify(video, mc.dec_patch);
      const Triplane<float> z = model_.tokenize(video);
      const Triplane<float> leaves = z.detach(true);
      {
        diff::PeakScope decoder_scope;
        const Tensor<float> target = patch_rows<float>(target_patches, sample.patches);
        const Tensor<float> pred = model_.decode(leaves, sample.coords);
        const Tensor<float> l2 = loss_l2(pred, target);
        Tensor<float> total = l2;
        l2_sum += l2.item();
        if (perceptual) {
          const Tensor<float> pf = assemble_frames(pred, sample.patches, grid, mc.dec_patch, mc.channels);
          const Tensor<float> tf = assemble_frames(target, sample.patches, grid, mc.dec_patch, mc.channels);
          const Tensor<float> p = perceptual_(pf, tf);
          perc_sum += p.item();
          total = diff::add(total, diff::scale(p, static_cast<float>(config_.perceptual_weight)));
        }
        diff::backward(diff::scale(total, inv_batch));
        result.peak_elems = std::max(result.peak_elems, decoder_scope.peak());
      }
      diff::backward<float>({z.xy, z.yt, z.xt}, {leaves.xy.grad(), leaves.yt.grad(), leaves.xt.grad()});
    }
    result.step_peak_elems = step_scope.peak();
  }

  const double n = static_cast<double>(batch.size());
  result.l2 = l2_sum / n;
  result.perceptual = perc_sum / n;
  result.total = result.l2 + (perceptual ? config_.perceptual_weight * result.perceptual : 0.0);
  if (!std::isfinite(result.total)) {
    throw DivergenceError("non-finite loss at step " + std::to_string(state_.step));
  }
  diff::adamw_step(model_.params().optimizer_refs(), state_.optimizer);

  result.step = state_.step++;
  LossStats& s = state_.stats;
  ++s.count;
  s.mean_l2 += (result.l2 - s.mean_l2) / static_cast<double>(s.count);
  s.mean_perceptual += (result.perceptual - s.mean_perceptual) / static_cast<double>(s.count);
  s.last_total = result.total;
  result.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double heldout_l2(const CoordTokModel<float>& model, const std::vector<Video>& videos, std::size_t chunk) {
  if (videos.empty()) throw InputError("heldout_l2: no videos");
  diff::NoGradGuard no_grad;
  const ModelConfig& mc = model.config();
  const std::vector<Coord> coords = all_patch_coords(mc.decoder_grid());
  const std::size_t step = chunk == 0 ? coords.size() : chunk;
  double total = 0.0;
  for (const Video& v : videos) {
    const PatchMatrix pm = patchify(v, mc.dec_patch);
    const Triplane<float> z = model.tokenize(v);
    double sq = 0.0;
    for (std::size_t first = 0; first < coords.size(); first += step) {
      const std::size_t count = std::min(step, coords.size() - first);
      const Tensor<float> out = model.decode(z, std::span<const Coord>(coords).subspan(first, count));
      const auto d = out.data();
      const float* ref = pm.row(first);
      for (std::size_t i = 0; i < d.size(); ++i) {
        const double e = static_cast<double>(d[i]) - ref[i];
        sq += e * e;
      }
    }
    total += sq / static_cast<double>(pm.values.size());
  }
  return total / static_cast<double>(videos.size());
}

template Tensor<float> loss_l2(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> loss_l2(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> perceptual_proxy_loss(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> perceptual_proxy_loss(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> assemble_frames(const Tensor<float>&, std::span<const std::size_t>, const GridDims&,
                                       const PatchSpec&, std::size_t);
template Tensor<double> assemble_frames(const Tensor<double>&, std::span<const std::size_t>, const GridDims&,
                                        const PatchSpec&, std::size_t);
template Tensor<float> patch_rows(const PatchMatrix&, std::span<const std::size_t>);
template Tensor<double> patch_rows(const PatchMatrix&, std::span<const std::size_t>);

}  // namespace coordtok
