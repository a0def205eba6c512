// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "coordtok/data.hpp"
#include "coordtok/error.hpp"
#include "coordtok/rng.hpp"

namespace coordtok {

namespace {

void report(const ProgressFn& progress, const std::string& line) {
  if (progress) progress(line);
}

Video noise_clip(const ModelConfig& c, std::uint64_t seed) {
  Video v(c.frames, c.height, c.width, c.channels);
  Rng rng(seed);
  for (float& p : v.pixels) p = static_cast<float>(rng.uniform());
  return v;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------- bench

std::string to_string(BenchMode mode) { return mode == BenchMode::kRandomPatch ? "random_patch" : "full_frame"; }

void BenchConfig::validate() const {
  if (frames.empty()) throw ConfigError("bench: no frame counts");
  if (n_coords == 0) throw ConfigError("bench: n_coords must be positive");
  if (element_budget <= 0) throw ConfigError("bench: element budget must be positive");
  if (repeats == 0) throw ConfigError("bench: repeats must be positive");
  for (std::size_t t : frames) {
    const ModelConfig m = model.with_clip(t, model.height, model.width);
    m.validate();
    if (t % m.dec_patch.pt != 0 || t % m.enc_patch.pt != 0) {
      throw ConfigError("bench: " + std::to_string(t) + " frames not divisible by the patch depth");
    }
    if (n_coords > m.decoder_grid().count()) {
      throw ConfigError("bench: n_coords exceeds the decoder grid at " + std::to_string(t) + " frames");
    }
  }
}

std::vector<BenchCell> run_bench(const BenchConfig& config, const ProgressFn& progress) {
  config.validate();
  std::vector<BenchCell> cells;
  for (std::size_t t : config.frames) {
    const ModelConfig mc = config.model.with_clip(t, config.model.height, config.model.width);
    const Video clip = noise_clip(mc, config.seed + t);
    for (BenchMode mode : {BenchMode::kRandomPatch, BenchMode::kFullFrame}) {
      auto model = CoordTokModel<float>::init(mc, config.seed);
      TrainConfig tc;
      tc.batch_size = 1;
      tc.sampler = Sampler::kRandomPatch;
      tc.n_coords = mode == BenchMode::kRandomPatch ? config.n_coords : mc.decoder_grid().count();
      tc.seed = config.seed;
      Trainer trainer(model, tc);
      BenchCell cell;
      cell.frames = t;
      cell.mode = mode;
      cell.n_coords = tc.n_coords;
      // The first step also allocates persistent gradient buffers; measure steady state.
      trainer.step({clip});
      double ms = 0.0;
      for (std::size_t r = 0; r < config.repeats; ++r) {
        const StepResult s = trainer.step({clip});
        cell.decoder_peak = std::max(cell.decoder_peak, s.peak_elems);
        cell.step_peak = std::max(cell.step_peak, s.step_peak_elems);
        ms += s.ms;
      }
      cell.ms = ms / static_cast<double>(config.repeats);
      cell.max_batch = cell.decoder_peak > 0 ? config.element_budget / cell.decoder_peak : 0;
      report(progress, "bench T=" + std::to_string(t) + " " + to_string(mode) +
                           " decoder_peak=" + std::to_string(cell.decoder_peak) +
                           " max_batch=" + std::to_string(cell.max_batch));
      cells.push_back(cell);
    }
  }
  return cells;
}

std::string bench_csv(const std::vector<BenchCell>& cells, std::int64_t element_budget) {
  std::ostringstream os;
  os << "# element_budget=" << element_budget << "\n# max_batch=floor(element_budget/decoder_peak)\n"
     << "frames,mode,n_coords,decoder_peak,step_peak,max_batch,ms\n";
  for (const BenchCell& c : cells) {
    os << c.frames << ',' << to_string(c.mode) << ',' << c.n_coords << ',' << c.decoder_peak << ','
       << c.step_peak << ',' << c.max_batch << ',' << format_double(c.ms) << '\n';
  }
  return os.str();
}

void to_json(nlohmann::json& j, const BenchConfig& c) {
  j = {{"model", c.model},           {"frames", c.frames}, {"n_coords", c.n_coords},
       {"element_budget", c.element_budget}, {"seed", c.seed},     {"repeats", c.repeats}};
}

void from_json(const nlohmann::json& j, BenchConfig& c) {
  if (!j.is_object()) throw ConfigError("bench config must be a JSON object");
  try {
    if (j.contains("model")) from_json(j.at("model"), c.model);
    c.frames = j.value("frames", c.frames);
    c.n_coords = j.value("n_coords", c.n_coords);
    if (j.contains("element_budget")) c.element_budget = static_cast<std::int64_t>(j.at("element_budget").get<double>());
    c.seed = j.value("seed", c.seed);
    c.repeats = j.value("repeats", c.repeats);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bench config: ") + e.what());
  }
}

// ---------------------------------------------------------------- ablation

ModelConfig AblationConfig::default_model() {
  ModelConfig c = model_preset("tiny");
  c.frames = 32;
  c.height = 8;
  c.width = 8;
  c.enc_patch = {4, 4, 4};
  c.dec_patch = {1, 4, 4};
  c.encoder = {2, 32, 4};
  c.cross_self = {2, 32, 4};
  c.decoder = {2, 64, 4};
  c.plane_h = 4;
  c.plane_w = 4;
  c.plane_t = 16;
  return c;
}

TrainConfig AblationConfig::default_train() {
  TrainConfig t;
  t.batch_size = 16;
  t.steps = 2000;
  t.lr = 1e-3;
  return t;
}

void AblationConfig::validate() const {
  model.validate();
  train.validate();
  if (train.phase != Phase::kMain) throw ConfigError("ablation: trains the main phase only");
  if (corpus_size == 0 || heldout_size == 0) throw ConfigError("ablation: corpus and held-out sizes must be positive");
  if (speeds.empty()) throw ConfigError("ablation: no speeds");
  for (double s : speeds) {
    if (!std::isfinite(s) || s < 0.0) throw ConfigError("ablation: speeds must be finite and non-negative");
  }
  if (n_sprites == 0) throw ConfigError("ablation: n_sprites must be positive");
  if (eval_every == 0) throw ConfigError("ablation: eval_every must be positive");
  if (seeds.empty()) throw ConfigError("ablation: no seeds");
  ablation_counts(model, ratio);
}

std::pair<std::size_t, std::size_t> ablation_counts(const ModelConfig& model, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("ablation: ratio must lie in (0, 1]");
  const GridDims g = model.decoder_grid();
  const double exact = ratio * static_cast<double>(g.count());
  const double n = std::round(exact);
  if (n < 1.0 || std::abs(exact - n) > 1e-9) {
    throw ConfigError("ablation: ratio " + format_double(ratio) + " of " + std::to_string(g.count()) +
                      " decoder patches is not a whole count");
  }
  const std::size_t n_coords = static_cast<std::size_t>(n);
  const std::size_t slab = g.frame_count();
  if (n_coords % slab != 0) {
    throw ConfigError("ablation: " + std::to_string(n_coords) + " coordinates are not whole frames of " +
                      std::to_string(slab) + " patches");
  }
  return {n_coords, n_coords / slab};
}

std::pair<std::vector<Video>, std::vector<Video>> ablation_data(const AblationConfig& config) {
  auto clips = [&](std::size_t count, std::uint64_t base) {
    std::vector<Video> out;
    out.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
      SpriteSceneSpec spec;
      spec.n_sprites = config.n_sprites;
      spec.speed = config.speeds[c % config.speeds.size()];
      spec.seed = base + c;
      out.push_back(gen_sprites(spec, config.model.frames, config.model.height, config.model.width));
    }
    return out;
  };
  // Held-out seeds start far past the corpus range, so the sets never share a clip.
  return {clips(config.corpus_size, config.data_seed), clips(config.heldout_size, config.data_seed + 1'000'000)};
}

AblationResult run_ablation(const AblationConfig& config, const ProgressFn& progress) {
  config.validate();
  AblationResult result;
  std::tie(result.n_coords, result.n_frames) = ablation_counts(config.model, config.ratio);
  const auto [corpus, heldout] = ablation_data(config);
  for (std::uint64_t seed : config.seeds) {
    double finals[2] = {0.0, 0.0};
    int arm = 0;
    for (Sampler sampler : {Sampler::kRandomPatch, Sampler::kRandomFrame}) {
      auto model = CoordTokModel<float>::init(config.model, seed);
      TrainConfig tc = config.train;
      tc.sampler = sampler;
      tc.n_coords = result.n_coords;
      tc.n_frames = result.n_frames;
      tc.seed = seed;
      Trainer trainer(model, tc);
      AblationCurve curve;
      curve.sampler = sampler;
      curve.seed = seed;
      for (std::size_t s = 0; s < tc.steps; ++s) {
        // Both arms see the same clips at every step.
        trainer.step(make_batch(corpus, seed, s, tc.batch_size, config.model.frames));
        if ((s + 1) % config.eval_every == 0 || s + 1 == tc.steps) {
          curve.points.emplace_back(s + 1, heldout_l2(model, heldout));
          report(progress, "ablation " + to_string(sampler) + " seed=" + std::to_string(seed) +
                               " step=" + std::to_string(s + 1) + " heldout_l2=" + format_double(curve.points.back().second));
        }
      }
      finals[arm++] = curve.final_l2();
      result.curves.push_back(std::move(curve));
    }
    if (finals[0] < finals[1]) ++result.patch_wins;
  }
  return result;
}

std::string ablation_csv(const AblationResult& result) {
  std::ostringstream os;
  os << "# n_coords=" << result.n_coords << "\n# n_frames=" << result.n_frames << "\n# patch_wins=" << result.patch_wins
     << "\nsampler,seed,step,heldout_l2\n";
  for (const AblationCurve& c : result.curves) {
    for (const auto& [step, l2] : c.points) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.9g", l2);
      os << to_string(c.sampler) << ',' << c.seed << ',' << step << ',' << buf << '\n';
    }
  }
  return os.str();
}

void to_json(nlohmann::json& j, const AblationConfig& c) {
  j = {{"model", c.model},         {"ratio", c.ratio},       {"corpus_size", c.corpus_size},
       {"heldout_size", c.heldout_size}, {"speeds", c.speeds}, {"n_sprites", c.n_sprites},
       {"train", c.train},         {"eval_every", c.eval_every}, {"seeds", c.seeds},
       {"data_seed", c.data_seed}};
}

void from_json(const nlohmann::json& j, AblationConfig& c) {
  if (!j.is_object()) throw ConfigError("ablation config must be a JSON object");
  try {
    if (j.contains("model")) from_json(j.at("model"), c.model);
    if (j.contains("train")) from_json(j.at("train"), c.train);
    c.ratio = j.value("ratio", c.ratio);
    c.corpus_size = j.value("corpus_size", c.corpus_size);
    c.heldout_size = j.value("heldout_size", c.heldout_size);
    c.speeds = j.value("speeds", c.speeds);
    c.n_sprites = j.value("n_sprites", c.n_sprites);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.seeds = j.value("seeds", c.seeds);
    c.data_seed = j.value("data_seed", c.data_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ablation config: ") + e.what());
  }
}

}  // namespace coordtok
