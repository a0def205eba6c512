// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coordtok/cli.hpp"
#include "coordtok/io.hpp"

using namespace coordtok;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "coordtok_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<json> read_log(const fs::path& path) {
  std::ifstream in(path);
  std::vector<json> records;
  for (std::string line; std::getline(in, line);) records.push_back(json::parse(line));
  return records;
}

// 4x16x16 clips, one decoder slab per frame.
json small_run_config() {
  return {{"model",
           {{"frames", 4}, {"height", 16}, {"width", 16}, {"enc_patch", {2, 4, 4}}, {"dec_patch", {1, 4, 4}},
            {"encoder", {{"layers", 1}, {"dim", 16}, {"heads", 2}}},
            {"cross_self", {{"layers", 1}, {"dim", 16}, {"heads", 2}}},
            {"decoder", {{"layers", 1}, {"dim", 16}, {"heads", 2}}},
            {"plane_h", 2}, {"plane_w", 2}, {"plane_t", 4}, {"latent_dim", 2}}},
          {"train", {{"batch_size", 2}, {"n_coords", 8}, {"n_frames", 1}, {"lr", 1e-3}}},
          {"data", {{"source", "sprites"}, {"count", 4}, {"frames", 6}}}};
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path path = dir / "run.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

}  // namespace

TEST_CASE("usage errors exit 2 and help exits 0") {
  CHECK(run({}).code == kExitConfig);
  CHECK(run({"transmogrify"}).code == kExitConfig);
  CHECK(run({"train", "--no-such-flag"}).code == kExitConfig);
  CHECK(run({"--help"}).code == kExitOk);
  CHECK(run({"train", "--help"}).code == kExitOk);
}

TEST_CASE("gen-data writes clips and a manifest") {
  const fs::path dir = fresh_dir("gen");
  const Result r = run({"gen-data", "-o", dir.string(), "--count", "3", "--frames", "5", "--height", "8", "--width",
                        "12", "--speeds", "0,2", "--seed", "40"});
  REQUIRE(r.code == kExitOk);
  const json manifest = json::parse(read_file(dir / "manifest.json"));
  REQUIRE(manifest.size() == 3);
  CHECK(manifest[1]["speed"] == 2.0);
  CHECK(manifest[2]["seed"] == 42);
  const Video v = read_cvid(dir / (manifest[0]["id"].get<std::string>() + ".cvid"));
  CHECK(v.frames == 5);
  CHECK(v.height == 8);
  CHECK(v.width == 12);
  CHECK(run({"gen-data", "-o", dir.string(), "--count", "0"}).code == kExitConfig);
}

TEST_CASE("train writes config, log and checkpoints; resume continues the log") {
  const fs::path dir = fresh_dir("train");
  const fs::path cfg = write_config(dir, small_run_config());
  const fs::path run_dir = dir / "run";
  Result r = run({"train", "--config", cfg.string(), "--run-dir", run_dir.string(), "--steps", "3", "--seed", "7",
                  "--checkpoint-every", "2"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);

  const json effective = json::parse(read_file(run_dir / "config.json"));
  CHECK(effective["command"] == "train");
  CHECK(effective["seed"] == 7);
  CHECK(effective["deterministic"] == true);
  CHECK(effective["formats"]["checkpoint"] == kCheckpointVersion);
  CHECK(effective["formats"]["cvid"] == kCvidVersion);
  CHECK(effective["formats"]["tokens"] == kTokenVersion);
  CHECK(effective["model"]["plane_t"] == 4);

  const auto log = read_log(run_dir / "log.ndjson");
  REQUIRE(log.size() == 3);
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(log[i]["step"] == i);
    CHECK(log[i]["phase"] == "main");
    for (const char* key : {"l2", "perceptual", "peak_elems", "ms"}) CHECK_MESSAGE(log[i].contains(key), key);
  }
  CHECK(fs::exists(run_dir / "checkpoints" / "step_0000002.ctck"));
  CHECK(fs::exists(run_dir / "checkpoint.ctck"));
  CHECK(load_checkpoint(run_dir / "checkpoint.ctck").state.step == 3);

  // Resuming to 5 steps matches a straight 5-step run.
  r = run({"train", "--config", cfg.string(), "--run-dir", run_dir.string(), "--steps", "5", "--seed", "7", "--resume"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const fs::path straight = dir / "straight";
  r = run({"train", "--config", cfg.string(), "--run-dir", straight.string(), "--steps", "5", "--seed", "7"});
  REQUIRE(r.code == kExitOk);
  const auto resumed = read_log(run_dir / "log.ndjson"), reference = read_log(straight / "log.ndjson");
  REQUIRE(resumed.size() == 5);
  REQUIRE(reference.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(resumed[i]["l2"].get<double>() == reference[i]["l2"].get<double>());
}

TEST_CASE("finetune, encode, decode and eval chain through files") {
  const fs::path dir = fresh_dir("chain");
  const fs::path cfg = write_config(dir, small_run_config());
  REQUIRE(run({"train", "--config", cfg.string(), "--run-dir", (dir / "main").string(), "--steps", "2"}).code ==
          kExitOk);
  const std::string ckpt = (dir / "main" / "checkpoint.ctck").string();
  CHECK(run({"finetune", "--config", cfg.string(), "--run-dir", (dir / "ft").string(), "--steps", "2"}).code ==
        kExitConfig);
  Result r = run({"finetune", "--config", cfg.string(), "--run-dir", (dir / "ft").string(), "--steps", "2", "--init",
                  ckpt});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const auto log = read_log(dir / "ft" / "log.ndjson");
  REQUIRE(log.size() == 2);
  CHECK(log[0]["phase"] == "finetune");
  CHECK(log[0]["perceptual"].get<double>() > 0.0);

  REQUIRE(run({"gen-data", "-o", (dir / "clips").string(), "--count", "2", "--frames", "4", "--height", "16",
               "--width", "16"}).code == kExitOk);
  const std::string clip = (dir / "clips" / "clip_00000.cvid").string();
  REQUIRE(fs::exists(clip));
  const std::string tokens = (dir / "z.ctok").string(), recon = (dir / "r.cvid").string();
  REQUIRE(run({"encode", "--checkpoint", ckpt, "-i", clip, "-o", tokens}).code == kExitOk);
  // (2*2 + 2*4 + 2*4) tokens of width 2.
  CHECK(fs::file_size(tokens) == kTokenHeaderBytes + 20 * 2 * 4);
  REQUIRE(run({"decode", "--checkpoint", ckpt, "-i", tokens, "-o", recon}).code == kExitOk);
  CHECK(read_cvid(recon).same_shape(read_cvid(clip)));

  const std::string csv = (dir / "metrics.csv").string();
  REQUIRE(run({"eval", "--checkpoint", ckpt, "-i", (dir / "clips").string(), "-o", csv}).code == kExitOk);
  std::istringstream lines(read_file(csv));
  std::string header;
  std::getline(lines, header);
  CHECK(header.find("psnr") != std::string::npos);
  std::size_t rows = 0;
  for (std::string line; std::getline(lines, line);) rows += !line.empty() && line[0] != '#';
  CHECK(rows >= 2);

}

TEST_CASE("bad configs exit 2 before any compute") {
  const fs::path dir = fresh_dir("bad");
  const fs::path cfg = write_config(dir, small_run_config());
  const std::string rd = (dir / "run").string();
  CHECK(run({"train", "--config", cfg.string(), "--run-dir", rd, "--steps", "0"}).code == kExitConfig);
  CHECK(run({"train", "--config", cfg.string(), "--run-dir", rd, "--lr", "-1"}).code == kExitConfig);
  CHECK(run({"train", "--config", cfg.string(), "--run-dir", rd, "--n-coords", "100000"}).code == kExitConfig);
  CHECK(run({"train", "--preset", "XXL", "--run-dir", rd}).code == kExitConfig);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run({"train", "--config", (dir / "broken.json").string(), "--run-dir", rd}).code == kExitConfig);
  CHECK_FALSE(fs::exists(dir / "run" / "log.ndjson"));
}

TEST_CASE("missing or corrupt files exit 3") {
  const fs::path dir = fresh_dir("io");
  CHECK(run({"encode", "--checkpoint", (dir / "none.ctck").string(), "-i", "x.cvid", "-o", "y.ctok"}).code ==
        kExitIo);
  std::ofstream(dir / "junk.ctck") << "JUNKJUNKJUNK";
  CHECK(run({"decode", "--checkpoint", (dir / "junk.ctck").string(), "-i", "a", "-o", "b"}).code == kExitIo);
  CHECK(run({"train", "--config", (dir / "absent.json").string(), "--run-dir", (dir / "r").string()}).code ==
        kExitIo);
}

TEST_CASE("divergence exits 4") {
  const fs::path dir = fresh_dir("diverge");
  const fs::path cfg = write_config(dir, small_run_config());
  const Result r = run({"train", "--config", cfg.string(), "--run-dir", (dir / "run").string(), "--steps", "50",
                        "--lr", "1e30"});
  CHECK_MESSAGE(r.code == kExitDivergence, r.err);
}

TEST_CASE("bench emits one row per length and mode") {
  const fs::path dir = fresh_dir("bench");
  json cfg = {{"model", small_run_config()["model"]}, {"n_coords", 8}};
  std::ofstream(dir / "bench.json") << cfg.dump();
  const std::string csv = (dir / "bench.csv").string();
  const Result r = run({"bench", "--config", (dir / "bench.json").string(), "--frames", "4,8", "--budget", "1e6",
                        "-o", csv});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  std::istringstream lines(read_file(csv));
  std::vector<std::string> rows;
  for (std::string line; std::getline(lines, line);)
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "frames,mode,n_coords,decoder_peak,step_peak,max_batch,ms");
  CHECK(run({"bench", "--frames", "4,x"}).code == kExitConfig);
}
