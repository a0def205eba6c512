// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "coordtok/data.hpp"
#include "coordtok/error.hpp"
#include "coordtok/experiments.hpp"
#include "coordtok/io.hpp"
#include "coordtok/metrics.hpp"

namespace fs = std::filesystem;

namespace coordtok {

// ---------------------------------------------------------------- config

void DataSpec::validate() const {
  if (source == "sprites") {
    if (count == 0) throw ConfigError("data: count must be positive");
    if (speeds.empty()) throw ConfigError("data: no speeds");
    for (double s : speeds) {
      if (!std::isfinite(s) || s < 0.0) throw ConfigError("data: speeds must be finite and non-negative");
    }
    if (n_sprites == 0) throw ConfigError("data: n_sprites must be positive");
  } else if (source == "cvid" || source == "png") {
    if (path.empty()) throw ConfigError("data: source '" + source + "' needs a path");
  } else {
    throw ConfigError("data: unknown source '" + source + "' (expected sprites, cvid or png)");
  }
}

void to_json(nlohmann::json& j, const DataSpec& d) {
  j = {{"source", d.source},       {"path", d.path},           {"count", d.count}, {"frames", d.frames},
       {"speeds", d.speeds}, {"n_sprites", d.n_sprites}, {"seed", d.seed}};
}

void from_json(const nlohmann::json& j, DataSpec& d) {
  if (!j.is_object()) throw ConfigError("data spec must be a JSON object");
  try {
    d.source = j.value("source", d.source);
    d.path = j.value("path", d.path);
    d.count = j.value("count", d.count);
    d.frames = j.value("frames", d.frames);
    d.speeds = j.value("speeds", d.speeds);
    d.n_sprites = j.value("n_sprites", d.n_sprites);
    d.seed = j.value("seed", d.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("data spec: ") + e.what());
  }
}

namespace {

Video fit_to_model(Video v, const ModelConfig& model, const std::string& what) {
  if (v.channels != model.channels) {
    throw ConfigError(what + ": " + std::to_string(v.channels) + " channels, model expects " +
                      std::to_string(model.channels));
  }
  if (v.frames < model.frames) {
    throw ConfigError(what + ": " + std::to_string(v.frames) + " frames, model clips need " +
                      std::to_string(model.frames));
  }
  if (v.height != model.height || v.width != model.width) v = resize_center_crop(v, model.height, model.width);
  return v;
}

std::vector<fs::path> sorted_entries(const fs::path& dir, auto&& keep) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (keep(e)) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> cvid_files(const fs::path& path) {
  if (fs::is_regular_file(path)) return {path};
  if (!fs::is_directory(path)) throw IoError("no such file or directory: " + path.string());
  auto files = sorted_entries(path, [](const fs::directory_entry& e) {
    return e.is_regular_file() && e.path().extension() == ".cvid";
  });
  if (files.empty()) throw IoError("no .cvid files in " + path.string());
  return files;
}

}  // namespace

std::vector<Video> load_videos(const DataSpec& spec, const ModelConfig& model) {
  spec.validate();
  std::vector<Video> videos;
  if (spec.source == "sprites") {
    const std::size_t frames = spec.frames == 0 ? model.frames : spec.frames;
    if (frames < model.frames) throw ConfigError("data: sprite clips shorter than the model clip length");
    return gen_corpus(spec.count, frames, model.height, model.width, spec.speeds, spec.seed);
  }
  const fs::path root(spec.path);
  if (spec.source == "cvid") {
    for (const fs::path& f : cvid_files(root)) videos.push_back(fit_to_model(read_cvid(f), model, f.string()));
    return videos;
  }
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  const auto dirs = sorted_entries(root, [](const fs::directory_entry& e) { return e.is_directory(); });
  if (dirs.empty()) {
    videos.push_back(fit_to_model(load_png_frames(root), model, root.string()));
  } else {
    for (const fs::path& d : dirs) videos.push_back(fit_to_model(load_png_frames(d), model, d.string()));
  }
  return videos;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  train.validate_for(model);
  data.validate();
  if (run_dir.empty()) throw ConfigError("run_dir must not be empty");
  if (train.steps == 0) throw ConfigError("train: steps must be positive");
  if (log_every == 0) throw ConfigError("log_every must be positive");
  if (train.seed != seed) throw ConfigError("train.seed and seed disagree");
  if (train.deterministic != deterministic) throw ConfigError("train.deterministic and deterministic disagree");
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"model", c.model},
       {"train", c.train},
       {"data", c.data},
       {"run_dir", c.run_dir},
       {"seed", c.seed},
       {"deterministic", c.deterministic},
       {"log_every", c.log_every},
       {"checkpoint_every", c.checkpoint_every},
       {"init_checkpoint", c.init_checkpoint},
       {"resume", c.resume}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  try {
    if (j.contains("model")) {
      const auto& m = j.at("model");
      if (m.is_string()) {
        c.model = model_preset(m.get<std::string>());
      } else {
        if (m.contains("preset") && m.at("preset").is_string()) c.model = model_preset(m.at("preset").get<std::string>());
        from_json(m, c.model);
      }
    }
    if (j.contains("train")) from_json(j.at("train"), c.train);
    if (j.contains("data")) from_json(j.at("data"), c.data);
    c.run_dir = j.value("run_dir", c.run_dir);
    c.seed = j.value("seed", c.seed);
    c.deterministic = j.value("deterministic", c.deterministic);
    c.log_every = j.value("log_every", c.log_every);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.init_checkpoint = j.value("init_checkpoint", c.init_checkpoint);
    c.resume = j.value("resume", c.resume);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
}

nlohmann::json effective_config(const RunConfig& c, const std::string& command) {
  nlohmann::json j = c;
  j["command"] = command;
  j["formats"] = {{"cvid", kCvidVersion}, {"checkpoint", kCheckpointVersion}, {"tokens", kTokenVersion}};
  return j;
}

// ---------------------------------------------------------------- commands

namespace {

nlohmann::json read_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  for (const std::string& item : split_list(s)) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_floating_point_v<T>) {
        out.push_back(static_cast<T>(std::stod(item, &used)));
      } else {
        const long long v = std::stoll(item, &used);
        if (v < 0) throw std::invalid_argument("negative");
        out.push_back(static_cast<T>(v));
      }
      if (used != item.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

class LineLog {
 public:
  LineLog(const fs::path& path, bool append) : path_(path), os_(path, append ? std::ios::app : std::ios::trunc) {
    if (!os_) throw IoError("cannot open log " + path.string());
  }
  void write(const nlohmann::json& j) {
    os_ << j.dump() << '\n';
    os_.flush();
    if (!os_) throw IoError("cannot write log " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream os_;
};

struct RunOverrides {
  std::string config;
  std::string run_dir;
  std::string preset;
  std::string init_checkpoint;
  std::string data_path;
  std::string data_source;
  std::optional<std::int64_t> steps;
  std::optional<std::int64_t> batch_size;
  std::optional<std::int64_t> n_coords;
  std::optional<std::int64_t> n_frames;
  std::optional<std::int64_t> seed;
  std::optional<std::int64_t> log_every;
  std::optional<std::int64_t> checkpoint_every;
  std::optional<double> lr;
  bool resume = false;
};

template <typename U>
U checked_count(std::int64_t v, const char* flag) {
  if (v < 0) throw ConfigError(std::string(flag) + " must be non-negative, got " + std::to_string(v));
  return static_cast<U>(v);
}

RunConfig build_run_config(const RunOverrides& o, Phase phase) {
  RunConfig c;
  c.train = TrainConfig::defaults(phase);
  if (!o.config.empty()) {
    const nlohmann::json j = read_json_file(o.config);
    if (j.contains("train") && j.at("train").is_object() && j.at("train").contains("phase") &&
        phase_from_string(j.at("train").at("phase").get<std::string>()) != phase) {
      throw ConfigError("config phase '" + j.at("train").at("phase").get<std::string>() + "' does not match the " +
                        to_string(phase) + " command");
    }
    from_json(j, c);
    if (!j.contains("seed") && j.contains("train") && j.at("train").contains("seed")) c.seed = c.train.seed;
  }
  if (!o.preset.empty()) c.model = model_preset(o.preset);
  if (!o.run_dir.empty()) c.run_dir = o.run_dir;
  if (!o.init_checkpoint.empty()) c.init_checkpoint = o.init_checkpoint;
  if (!o.data_source.empty()) c.data.source = o.data_source;
  if (!o.data_path.empty()) {
    c.data.path = o.data_path;
    if (o.data_source.empty() && c.data.source == "sprites") c.data.source = "cvid";
  }
  if (o.steps) c.train.steps = checked_count<std::size_t>(*o.steps, "--steps");
  if (o.batch_size) c.train.batch_size = checked_count<std::size_t>(*o.batch_size, "--batch-size");
  if (o.n_coords) c.train.n_coords = checked_count<std::size_t>(*o.n_coords, "--n-coords");
  if (o.n_frames) c.train.n_frames = checked_count<std::size_t>(*o.n_frames, "--n-frames");
  if (o.lr) c.train.lr = *o.lr;
  if (o.seed) c.seed = checked_count<std::uint64_t>(*o.seed, "--seed");
  if (o.log_every) c.log_every = checked_count<std::size_t>(*o.log_every, "--log-every");
  if (o.checkpoint_every) c.checkpoint_every = checked_count<std::size_t>(*o.checkpoint_every, "--checkpoint-every");
  if (o.resume) c.resume = true;
  c.train.phase = phase;
  c.train.seed = c.seed;
  c.train.deterministic = c.deterministic;
  c.validate();
  return c;
}

void require_same_model(const ModelConfig& have, const ModelConfig& want, const std::string& what) {
  if (!(have == want)) {
    throw ConfigError(what + ": checkpoint model config differs from the run config");
  }
}

int cmd_train(const RunOverrides& o, Phase phase, std::ostream& out) {
  const RunConfig cfg = build_run_config(o, phase);
  const fs::path run_dir(cfg.run_dir);
  const fs::path latest = run_dir / "checkpoint.ctck";
  const bool resuming = cfg.resume && fs::exists(latest);
  if (phase == Phase::kFinetune && !resuming && cfg.init_checkpoint.empty()) {
    throw ConfigError("finetune needs init_checkpoint (a main-phase checkpoint)");
  }

  const std::vector<Video> videos = load_videos(cfg.data, cfg.model);

  std::optional<CoordTokModel<float>> model;
  TrainState state = TrainState::fresh(cfg.train);
  if (resuming) {
    Checkpoint ck = load_checkpoint(latest);
    require_same_model(ck.model, cfg.model, latest.string());
    if (!ck.has_state) throw FormatError(FormatError::Kind::kCorrupt, latest.string() + ": no training state to resume");
    model.emplace(ck.model, std::move(ck.params));
    state = std::move(ck.state);
  } else if (!cfg.init_checkpoint.empty()) {
    Checkpoint ck = load_checkpoint(cfg.init_checkpoint);
    require_same_model(ck.model, cfg.model, cfg.init_checkpoint);
    model.emplace(ck.model, std::move(ck.params));
    // Moments carry over; step count and sampling streams restart.
    if (ck.has_state) state.optimizer = std::move(ck.state.optimizer);
  } else {
    model.emplace(CoordTokModel<float>::init(cfg.model, cfg.seed));
  }

  ensure_dir(run_dir / "checkpoints");
  write_file_atomic(run_dir / "config.json", effective_config(cfg, phase == Phase::kMain ? "train" : "finetune").dump(2) + "\n");
  LineLog log(run_dir / "log.ndjson", resuming);

  Trainer trainer(*model, cfg.train, std::move(state));
  auto save = [&](const fs::path& path) { save_checkpoint(path, cfg.model, cfg.train, model->params(), &trainer.state()); };
  StepResult last;
  while (trainer.state().step < cfg.train.steps) {
    const std::uint64_t step = trainer.state().step;
    last = trainer.step(make_batch(videos, cfg.seed, step, cfg.train.batch_size, cfg.model.frames));
    const std::uint64_t done = trainer.state().step;
    if (done % cfg.log_every == 0 || done == cfg.train.steps) log.write(log_record(last));
    if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "step_%07llu.ctck", static_cast<unsigned long long>(done));
      save(run_dir / "checkpoints" / name);
      save(latest);
    }
  }
  save(latest);
  out << to_string(phase) << ": " << trainer.state().step << " steps, last l2 " << last.l2
      << ", checkpoint " << latest.string() << "\n";
  return kExitOk;
}

Video read_clip(const std::string& input, const ModelConfig& model, std::size_t start) {
  Video v = fs::is_directory(input) ? load_png_frames(input) : read_cvid(input);
  if (v.channels != model.channels) throw ConfigError(input + ": channel count does not match the model");
  if (start + model.frames > v.frames) {
    throw ConfigError(input + ": needs " + std::to_string(start + model.frames) + " frames, has " +
                      std::to_string(v.frames));
  }
  if (v.frames != model.frames) {
    Video crop(model.frames, v.height, v.width, v.channels);
    const std::size_t fs_ = v.frame_size();
    std::copy_n(v.pixels.begin() + static_cast<std::ptrdiff_t>(start * fs_), model.frames * fs_, crop.pixels.begin());
    v = std::move(crop);
  }
  if (v.height != model.height || v.width != model.width) v = resize_center_crop(v, model.height, model.width);
  return v;
}

int cmd_encode(const std::string& ckpt, const std::string& input, const std::string& output, std::size_t start,
               std::ostream& out) {
  Checkpoint ck = load_checkpoint(ckpt);
  const CoordTokModel<float> model(ck.model, std::move(ck.params));
  const Video clip = read_clip(input, ck.model, start);
  diff::NoGradGuard no_grad;
  write_tokens(output, model.tokenize(clip));
  out << "encode: " << ck.model.token_count() << " tokens -> " << output << "\n";
  return kExitOk;
}

int cmd_decode(const std::string& ckpt, const std::string& input, const std::string& output,
               const std::string& png_dir, std::size_t chunk, std::ostream& out) {
  Checkpoint ck = load_checkpoint(ckpt);
  const CoordTokModel<float> model(ck.model, std::move(ck.params));
  const Triplane<float> z = read_tokens(input, ck.model);
  const Video v = model.reconstruct_full(z, chunk);
  write_cvid(output, v);
  if (!png_dir.empty()) {
    ensure_dir(png_dir);
    write_png_frames(v, png_dir);
  }
  out << "decode: " << v.frames << "x" << v.height << "x" << v.width << " -> " << output << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::vector<std::string>& inputs, const std::string& output,
             std::size_t chunk, std::ostream& out) {
  Checkpoint ck = load_checkpoint(ckpt);
  const CoordTokModel<float> model(ck.model, std::move(ck.params));
  std::vector<std::string> ids;
  std::vector<Video> originals, recons;
  for (const std::string& in : inputs) {
    for (const fs::path& f : cvid_files(in)) {
      Video clip = read_clip(f.string(), ck.model, 0);
      diff::NoGradGuard no_grad;
      recons.push_back(model.reconstruct_full(model.tokenize(clip), chunk));
      originals.push_back(std::move(clip));
      ids.push_back(f.stem().string());
    }
  }
  const MetricReport report = evaluate(ids, originals, recons);
  write_file_atomic(output, report.to_csv());
  const MetricRow m = report.mean();
  out << "eval: " << report.count() << " clips, mean psnr " << m.psnr << " dB, ssim " << m.ssim << " -> " << output
      << "\n";
  return kExitOk;
}

int cmd_gen_data(const std::string& dir, std::size_t count, std::size_t frames, std::size_t height,
                 std::size_t width, const std::vector<double>& speeds, std::size_t n_sprites, std::uint64_t seed,
                 bool png, std::ostream& out) {
  if (count == 0 || frames == 0 || height == 0 || width == 0) throw ConfigError("gen-data: extents must be positive");
  if (speeds.empty()) throw ConfigError("gen-data: no speeds");
  if (n_sprites == 0) throw ConfigError("gen-data: n_sprites must be positive");
  ensure_dir(dir);
  nlohmann::json manifest = nlohmann::json::array();
  for (std::size_t c = 0; c < count; ++c) {
    SpriteSceneSpec spec;
    spec.n_sprites = n_sprites;
    spec.speed = speeds[c % speeds.size()];
    spec.seed = seed + c;
    const Video v = gen_sprites(spec, frames, height, width);
    char name[32];
    std::snprintf(name, sizeof name, "clip_%05zu", c);
    write_cvid(fs::path(dir) / (std::string(name) + ".cvid"), v);
    if (png) {
      ensure_dir(fs::path(dir) / name);
      write_png_frames(v, fs::path(dir) / name);
    }
    manifest.push_back({{"id", name}, {"speed", spec.speed}, {"n_sprites", n_sprites}, {"seed", spec.seed}});
  }
  write_file_atomic(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
  out << "gen-data: " << count << " clips -> " << dir << "\n";
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------- entry

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"CoordTok video tokenizer: train, encode, decode, evaluate and benchmark", "coordtok"};
  app.require_subcommand(1);

  RunOverrides train_o, finetune_o;
  auto add_run = [](CLI::App* sub, RunOverrides& o) {
    sub->add_option("-c,--config", o.config, "Run config JSON");
    sub->add_option("--run-dir", o.run_dir, "Output directory");
    sub->add_option("--preset", o.preset, "Model preset: tiny, S, B, L");
    sub->add_option("--init", o.init_checkpoint, "Starting checkpoint");
    sub->add_option("--data", o.data_path, "Training clips (.cvid file/directory or PNG directory)");
    sub->add_option("--data-source", o.data_source, "sprites, cvid or png");
    sub->add_option("--steps", o.steps, "Optimizer steps");
    sub->add_option("--batch-size", o.batch_size, "Videos per step");
    sub->add_option("--n-coords", o.n_coords, "Random-patch coordinates per video");
    sub->add_option("--n-frames", o.n_frames, "Random-frame time slabs per video");
    sub->add_option("--lr", o.lr, "Learning rate");
    sub->add_option("--seed", o.seed, "Seed");
    sub->add_option("--log-every", o.log_every, "Steps between log records");
    sub->add_option("--checkpoint-every", o.checkpoint_every, "Steps between checkpoints (0 = final only)");
    sub->add_flag("--resume", o.resume, "Continue from run-dir/checkpoint.ctck");
  };
  CLI::App* train = app.add_subcommand("train", "Main phase: random patches, l2 loss");
  add_run(train, train_o);
  CLI::App* finetune = app.add_subcommand("finetune", "Fine-tune phase: random frames, l2 + perceptual loss");
  add_run(finetune, finetune_o);

  std::string ckpt, input, output, png_dir;
  std::size_t start = 0, chunk = 0;
  CLI::App* encode = app.add_subcommand("encode", "Video (.cvid or PNG directory) to triplane tokens (.ctok)");
  encode->add_option("--checkpoint", ckpt, "Model checkpoint")->required();
  encode->add_option("-i,--input", input, "Input clip")->required();
  encode->add_option("-o,--output", output, "Output token file")->required();
  encode->add_option("--start", start, "First frame of the clip");

  CLI::App* decode = app.add_subcommand("decode", "Triplane tokens (.ctok) to video (.cvid)");
  decode->add_option("--checkpoint", ckpt, "Model checkpoint")->required();
  decode->add_option("-i,--input", input, "Input token file")->required();
  decode->add_option("-o,--output", output, "Output clip")->required();
  decode->add_option("--png-dir", png_dir, "Also write PNG frames here");
  decode->add_option("--chunk", chunk, "Coordinates per decoder pass (0 = all)");

  std::vector<std::string> eval_inputs;
  CLI::App* eval = app.add_subcommand("eval", "Reconstruct clips and write PSNR/SSIM/dynamics/frequency CSV");
  eval->add_option("--checkpoint", ckpt, "Model checkpoint")->required();
  eval->add_option("-i,--input", eval_inputs, ".cvid files or directories")->required();
  eval->add_option("-o,--output", output, "Metrics CSV")->required();
  eval->add_option("--chunk", chunk, "Coordinates per decoder pass (0 = all)");

  BenchConfig bench_cfg;
  std::string bench_frames, bench_config, bench_preset;
  std::optional<double> budget;
  std::optional<std::int64_t> bench_coords;
  CLI::App* bench = app.add_subcommand("bench", "Peak live elements and max batch: lengths x {random patch, full frame}");
  bench->add_option("-c,--config", bench_config, "Bench config JSON");
  bench->add_option("--preset", bench_preset, "Model preset");
  bench->add_option("--frames", bench_frames, "Comma-separated clip lengths");
  bench->add_option("--budget", budget, "Element budget for max batch");
  bench->add_option("--n-coords", bench_coords, "Random-patch coordinates");
  bench->add_option("-o,--output", output, "CSV path (default stdout)");

  std::string gen_dir, gen_speeds = "0.5,1,2";
  std::size_t gen_count = 64, gen_frames = 16, gen_h = 32, gen_w = 32, gen_sprites_n = 3;
  std::uint64_t gen_seed = 0;
  bool gen_png = false;
  CLI::App* gen = app.add_subcommand("gen-data", "Write a synthetic sprite corpus");
  gen->add_option("-o,--out", gen_dir, "Output directory")->required();
  gen->add_option("--count", gen_count, "Clips");
  gen->add_option("--frames", gen_frames, "Frames per clip");
  gen->add_option("--height", gen_h, "Frame height");
  gen->add_option("--width", gen_w, "Frame width");
  gen->add_option("--speeds", gen_speeds, "Comma-separated speeds, cycled over clips");
  gen->add_option("--sprites", gen_sprites_n, "Sprites per clip");
  gen->add_option("--seed", gen_seed, "Seed of the first clip");
  gen->add_flag("--png", gen_png, "Also write PNG frames");

  std::string abl_config, abl_seeds;
  std::optional<double> ratio;
  std::optional<std::int64_t> abl_steps;
  CLI::App* ablate = app.add_subcommand("ablate-sampling", "Random patch vs random frame at one coordinate ratio");
  ablate->add_option("-c,--config", abl_config, "Ablation config JSON");
  ablate->add_option("--ratio", ratio, "Fraction of decoder patches per video and step");
  ablate->add_option("--steps", abl_steps, "Steps per run");
  ablate->add_option("--seeds", abl_seeds, "Comma-separated seeds");
  ablate->add_option("-o,--output", output, "CSV path (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto emit = [&](const std::string& text) {
    if (output.empty()) {
      out << text;
    } else {
      write_file_atomic(output, text);
    }
  };
  auto progress = [&](const std::string& line) { err << line << "\n"; };

  try {
    if (*train) return cmd_train(train_o, Phase::kMain, out);
    if (*finetune) return cmd_train(finetune_o, Phase::kFinetune, out);
    if (*encode) return cmd_encode(ckpt, input, output, start, out);
    if (*decode) return cmd_decode(ckpt, input, output, png_dir, chunk, out);
    if (*eval) return cmd_eval(ckpt, eval_inputs, output, chunk, out);
    if (*bench) {
      if (!bench_config.empty()) from_json(read_json_file(bench_config), bench_cfg);
      if (!bench_preset.empty()) bench_cfg.model = model_preset(bench_preset);
      if (!bench_frames.empty()) bench_cfg.frames = parse_list<std::size_t>(bench_frames, "--frames");
      if (budget) {
        if (!std::isfinite(*budget) || *budget < 1.0) throw ConfigError("--budget must be at least 1");
        bench_cfg.element_budget = static_cast<std::int64_t>(*budget);
      }
      if (bench_coords) bench_cfg.n_coords = checked_count<std::size_t>(*bench_coords, "--n-coords");
      emit(bench_csv(run_bench(bench_cfg, progress), bench_cfg.element_budget));
      return kExitOk;
    }
    if (*gen) {
      return cmd_gen_data(gen_dir, gen_count, gen_frames, gen_h, gen_w, parse_list<double>(gen_speeds, "--speeds"),
                          gen_sprites_n, gen_seed, gen_png, out);
    }
    if (*ablate) {
      AblationConfig cfg;
      if (!abl_config.empty()) from_json(read_json_file(abl_config), cfg);
      if (ratio) cfg.ratio = *ratio;
      if (abl_steps) cfg.train.steps = checked_count<std::size_t>(*abl_steps, "--steps");
      if (!abl_seeds.empty()) cfg.seeds = parse_list<std::uint64_t>(abl_seeds, "--seeds");
      const AblationResult r = run_ablation(cfg, progress);
      emit(ablation_csv(r));
      err << "ablate-sampling: random patch below random frame in " << r.patch_wins << " of " << cfg.seeds.size()
          << " seeds\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace coordtok
