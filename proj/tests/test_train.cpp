// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "coordtok/data.hpp"
#include "coordtok/error.hpp"
#include "coordtok/io.hpp"
#include "coordtok/train.hpp"

using namespace coordtok;
using diff::Tensor;

namespace {

// Small enough that a few hundred steps take seconds.
ModelConfig small_model() {
  ModelConfig c;
  c.frames = 8;
  c.height = 16;
  c.width = 16;
  c.enc_patch = {2, 4, 4};
  c.dec_patch = {1, 4, 4};
  c.encoder = {1, 32, 4};
  c.cross_self = {1, 32, 4};
  c.decoder = {1, 64, 4};
  c.plane_h = 4;
  c.plane_w = 4;
  c.plane_t = 8;
  c.latent_dim = 4;
  return c;
}

TrainConfig main_config(std::size_t n_coords, std::uint64_t seed = 0) {
  TrainConfig t;
  t.batch_size = 1;
  t.n_coords = n_coords;
  t.lr = 1e-3;
  t.seed = seed;
  return t;
}

Video clip(const ModelConfig& c, std::uint64_t seed, double speed = 1.0) {
  SpriteSceneSpec s;
  s.seed = seed;
  s.speed = speed;
  return gen_sprites(s, c.frames, c.height, c.width);
}

Tensor<double> frames_tensor(const Video& v) {
  return Tensor<double>::from({v.frames, v.height, v.width, v.channels},
                              std::vector<double>(v.pixels.begin(), v.pixels.end()));
}

// Sobel responses of the channel-mean image, computed on an explicitly
// replicate-padded copy with separable [1 2 1] x [-1 0 1] kernels.
std::vector<double> sobel_oracle(const Video& v) {
  const std::size_t H = v.height, W = v.width, P = W + 2;
  std::vector<double> out;
  for (std::size_t t = 0; t < v.frames; ++t) {
    std::vector<double> pad((H + 2) * P);
    for (std::size_t y = 0; y < H + 2; ++y)
      for (std::size_t x = 0; x < P; ++x) {
        const std::size_t sy = y == 0 ? 0 : (y > H ? H - 1 : y - 1);
        const std::size_t sx = x == 0 ? 0 : (x > W ? W - 1 : x - 1);
        double m = 0;
        for (std::size_t c = 0; c < v.channels; ++c) m += v.at(t, sy, sx, c);
        pad[y * P + x] = m / static_cast<double>(v.channels);
      }
    for (std::size_t y = 1; y <= H; ++y)
      for (std::size_t x = 1; x <= W; ++x) {
        auto at = [&](std::size_t yy, std::size_t xx) { return pad[yy * P + xx]; };
        const double gx = (at(y - 1, x + 1) - at(y - 1, x - 1)) + 2 * (at(y, x + 1) - at(y, x - 1)) +
                          (at(y + 1, x + 1) - at(y + 1, x - 1));
        const double gy = (at(y + 1, x - 1) - at(y - 1, x - 1)) + 2 * (at(y + 1, x) - at(y - 1, x)) +
                          (at(y + 1, x + 1) - at(y - 1, x + 1));
        out.push_back(gx);
        out.push_back(gy);
      }
  }
  return out;
}

double grad_norm(const Tensor<float>& t) {
  double s = 0;
  for (float g : t.grad()) s += static_cast<double>(g) * g;
  return std::sqrt(s);
}

double heldout_proxy(const CoordTokModel<float>& model, const std::vector<Video>& videos) {
  diff::NoGradGuard guard;
  double total = 0;
  for (const Video& v : videos) {
    const Video r = model.reconstruct_full(model.tokenize(v));
    total += perceptual_proxy_loss(frames_tensor(r), frames_tensor(v)).item();
  }
  return total / static_cast<double>(videos.size());
}

}  // namespace

// ---------------------------------------------------------------- losses

TEST_CASE("l2 of a uniform 0.1 offset is 0.01 and symmetric") {
  Rng rng(3);
  std::vector<double> a(60), b(60);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.uniform();
    b[i] = a[i] + 0.1;
  }
  const auto ta = Tensor<double>::from({6, 10}, a), tb = Tensor<double>::from({6, 10}, b);
  CHECK(loss_l2(tb, ta).item() == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(loss_l2(ta, tb).item() == loss_l2(tb, ta).item());
  CHECK(loss_l2(ta, ta).item() == 0.0);
  CHECK_THROWS_AS(loss_l2(ta, Tensor<double>::from({60}, a)), ShapeError);
}

TEST_CASE("edge proxy ignores identical frames and brightness shifts") {
  const Video v = clip(small_model(), 1);
  Video shifted = v;
  for (float& p : shifted.pixels) p = std::min(p + 0.05f, 2.0f);
  CHECK(perceptual_proxy_loss(frames_tensor(v), frames_tensor(v)).item() == 0.0);
  CHECK(perceptual_proxy_loss(frames_tensor(shifted), frames_tensor(v)).item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("edge proxy on a shifted edge matches direct convolution") {
  // Vertical step edge at column 5 against the same edge at column 7.
  Video a(2, 9, 12, 3), b(2, 9, 12, 3);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t y = 0; y < 9; ++y)
      for (std::size_t x = 0; x < 12; ++x)
        for (std::size_t c = 0; c < 3; ++c) {
          a.at(t, y, x, c) = x >= 5 ? 1.0f : 0.0f;
          b.at(t, y, x, c) = x >= 7 ? 0.8f : 0.1f * static_cast<float>(c);
        }
  const auto ea = sobel_oracle(a), eb = sobel_oracle(b);
  double expect = 0;
  for (std::size_t i = 0; i < ea.size(); ++i) expect += (ea[i] - eb[i]) * (ea[i] - eb[i]);
  expect /= static_cast<double>(ea.size());
  CHECK(expect > 0.0);
  CHECK(perceptual_proxy_loss(frames_tensor(a), frames_tensor(b)).item() == doctest::Approx(expect).epsilon(1e-12));

  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng(s);
    Video p(1, 7, 5, 3), q(1, 7, 5, 3);
    for (float& x : p.pixels) x = static_cast<float>(rng.uniform());
    for (float& x : q.pixels) x = static_cast<float>(rng.uniform());
    const auto ep = sobel_oracle(p), eq = sobel_oracle(q);
    double e = 0;
    for (std::size_t i = 0; i < ep.size(); ++i) e += (ep[i] - eq[i]) * (ep[i] - eq[i]);
    e /= static_cast<double>(ep.size());
    CHECK(perceptual_proxy_loss(frames_tensor(p), frames_tensor(q)).item() == doctest::Approx(e).epsilon(1e-12));
  }
}

TEST_CASE("assembling frames requires whole, ordered slabs") {
  const ModelConfig mc = small_model();
  const GridDims grid = mc.decoder_grid();
  const std::size_t per = grid.frame_count(), cols = mc.dec_patch_dim();
  const auto patches = Tensor<float>::zeros({per - 1, cols});
  std::vector<std::size_t> ids(per - 1);
  std::iota(ids.begin(), ids.end(), 0);
  CHECK_THROWS_AS(assemble_frames(patches, ids, grid, mc.dec_patch, mc.channels), InputError);

  std::vector<std::size_t> shuffled(per);
  std::iota(shuffled.begin(), shuffled.end(), per);
  std::swap(shuffled[0], shuffled[1]);
  CHECK_THROWS_AS(assemble_frames(Tensor<float>::zeros({per, cols}), shuffled, grid, mc.dec_patch, mc.channels),
                  InputError);

  // Whole slabs reproduce the frames they came from.
  const Video v = clip(mc, 2);
  Rng rng(0);
  const CoordSample s = sample_random_frame(rng, grid, 3);
  const Tensor<float> f = assemble_frames(patch_rows<float>(patchify(v, mc.dec_patch), s.patches), s.patches,
                                          grid, mc.dec_patch, mc.channels);
  REQUIRE(f.dim(0) == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t t = s.patches[k * per] / per;
    const Video expect = v.slice_frames(t, 1);
    CHECK(std::equal(expect.pixels.begin(), expect.pixels.end(), f.data().begin() + k * v.frame_size()));
  }
}

// ---------------------------------------------------------------- steps

TEST_CASE("main phase halves the loss on one repeated clip within 200 steps") {
  const ModelConfig mc = model_preset("tiny");
  auto model = CoordTokModel<float>::init(mc, 0);
  Trainer trainer(model, main_config(64));
  const std::vector<Video> batch{clip(mc, 5)};
  std::vector<double> losses;
  for (int s = 0; s < 200; ++s) losses.push_back(trainer.train_step_main(batch).l2);
  // Per-step losses are noisy over random patches; 40-step means must fall.
  std::vector<double> windows;
  for (std::size_t w = 0; w < 5; ++w)
    windows.push_back(std::accumulate(losses.begin() + 40 * w, losses.begin() + 40 * (w + 1), 0.0) / 40.0);
  for (std::size_t w = 1; w < windows.size(); ++w) CHECK(windows[w] < windows[w - 1]);
  CHECK(losses.back() < losses.front() / 2);
  CHECK(trainer.state().step == 200);
}

TEST_CASE("sampling every patch gives the full reconstruction loss") {
  const ModelConfig mc = small_model();
  const std::size_t M = mc.decoder_grid().count();
  auto model = CoordTokModel<float>::init(mc, 4);
  const Video v = clip(mc, 6);
  // Train a little so the output projection is no longer zero.
  Trainer warm(model, main_config(32, 1));
  for (int s = 0; s < 5; ++s) warm.step({v});
  const double full = heldout_l2(model, {v});
  Trainer trainer(model, main_config(M, 2));
  CHECK(trainer.step({v}).l2 == doctest::Approx(full).epsilon(1e-6));
}

TEST_CASE("fine-tune with zero perceptual weight is a frame-sampled main step") {
  const ModelConfig mc = small_model();
  const std::vector<Video> batch{clip(mc, 1), clip(mc, 2)};
  auto a = CoordTokModel<float>::init(mc, 9), b = CoordTokModel<float>::init(mc, 9);
  TrainConfig ft = TrainConfig::defaults(Phase::kFinetune);
  ft.batch_size = 2;
  ft.n_frames = 2;
  ft.perceptual_weight = 0.0;
  TrainConfig mn = main_config(64);
  mn.batch_size = 2;
  mn.n_frames = 2;
  mn.lr = ft.lr;
  mn.sampler = Sampler::kRandomFrame;
  Trainer ta(a, ft), tb(b, mn);
  for (int s = 0; s < 3; ++s) {
    const StepResult ra = ta.train_step_finetune(batch), rb = tb.train_step_main(batch);
    CHECK(ra.total == doctest::Approx(rb.total).epsilon(1e-6));
    CHECK(ra.l2 == doctest::Approx(rb.l2).epsilon(1e-6));
    CHECK(ra.perceptual > 0.0);
  }
}

TEST_CASE("sixteen fine-tune frames of a full-scale preset are 4096 coordinates") {
  for (const char* preset : {"S", "B", "L"}) {
    const ModelConfig mc = model_preset(preset);
    Rng rng(0);
    CHECK(draw_coords(rng, mc.decoder_grid(), Sampler::kRandomFrame, 0, 16).coords.size() == 4096);
    TrainConfig ft = TrainConfig::defaults(Phase::kFinetune);
    ft.n_frames = 16;
    CHECK_NOTHROW(ft.validate_for(mc));
  }
}

TEST_CASE("phase-specific step entry points reject the other phase") {
  auto model = CoordTokModel<float>::init(small_model(), 0);
  Trainer main_trainer(model, main_config(16));
  CHECK_THROWS_AS(main_trainer.train_step_finetune({clip(small_model(), 0)}), ConfigError);
  CHECK_THROWS_AS(main_trainer.step({}), InputError);
  TrainConfig bad = TrainConfig::defaults(Phase::kFinetune);
  bad.sampler = Sampler::kRandomPatch;
  Trainer ft(model, bad);
  CHECK_THROWS_AS(ft.step({clip(small_model(), 0)}), ConfigError);
}

TEST_CASE("same seed gives a bit-identical loss sequence") {
  const ModelConfig mc = small_model();
  const auto corpus = gen_corpus(6, mc.frames + 4, mc.height, mc.width, {1.0, 2.0}, 0);
  auto run = [&] {
    auto model = CoordTokModel<float>::init(mc, 12);
    TrainConfig tc = main_config(40, 12);
    tc.batch_size = 3;
    Trainer trainer(model, tc);
    std::vector<double> out;
    for (std::uint64_t s = 0; s < 12; ++s) out.push_back(trainer.step(make_batch(corpus, 12, s, 3, mc.frames)).l2);
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("resuming from a serialized state reproduces the loss sequence") {
  const ModelConfig mc = small_model();
  const auto corpus = gen_corpus(4, mc.frames, mc.height, mc.width, {1.0}, 20);
  TrainConfig tc = main_config(32, 5);
  tc.batch_size = 2;
  auto batch = [&](std::uint64_t s) { return make_batch(corpus, 5, s, 2, mc.frames); };

  auto straight = CoordTokModel<float>::init(mc, 5);
  Trainer t1(straight, tc);
  std::vector<double> expect;
  for (std::uint64_t s = 0; s < 8; ++s) expect.push_back(t1.step(batch(s)).l2);

  auto first = CoordTokModel<float>::init(mc, 5);
  Trainer t2(first, tc);
  std::vector<double> got;
  for (std::uint64_t s = 0; s < 4; ++s) got.push_back(t2.step(batch(s)).l2);
  const Checkpoint ck = decode_checkpoint(encode_checkpoint(mc, tc, first.params(), &t2.state()));
  REQUIRE(ck.has_state);
  CoordTokModel<float> resumed(ck.model, ck.params);
  Trainer t3(resumed, ck.train, ck.state);
  for (std::uint64_t s = 4; s < 8; ++s) got.push_back(t3.step(batch(s)).l2);
  CHECK(got == expect);
  for (const auto& [name, p] : straight.params().entries()) {
    const auto q = resumed.params().at(name).data();
    CHECK_MESSAGE(std::equal(p.data().begin(), p.data().end(), q.begin()), name);
  }
}

TEST_CASE("decoder-side peak depends on N only, not on clip length") {
  const ModelConfig base = small_model();
  std::vector<std::int64_t> peaks;
  for (std::size_t T : {8, 16, 32}) {
    const ModelConfig mc = base.with_clip(T, base.height, base.width);
    auto model = CoordTokModel<float>::init(mc, 0);
    Trainer trainer(model, main_config(48));
    const Video v = clip(mc, 3);
    trainer.step({v});
    const StepResult r = trainer.step({v});
    peaks.push_back(r.peak_elems);
    CHECK(r.step_peak_elems > r.peak_elems);
  }
  for (auto p : peaks) CHECK(std::abs(p - peaks[0]) <= peaks[0] / 100);
}

TEST_CASE("sampled-patch loss reaches every plane's parameters") {
  const ModelConfig mc = small_model();
  auto model = CoordTokModel<float>::init(mc, 1);
  Trainer trainer(model, main_config(16));
  const Video v = clip(mc, 1);
  // The zero output projection blocks upstream gradients on the first step.
  trainer.step({v});
  trainer.step({v});
  for (const char* plane : {"xy", "yt", "xt"}) {
    CHECK_MESSAGE(grad_norm(model.params().at(std::string("cs.proj.") + plane + ".w")) > 0.0, plane);
    CHECK_MESSAGE(grad_norm(model.params().at(std::string("cs.latent.") + plane)) > 0.0, plane);
  }
  CHECK(grad_norm(model.params().at("enc.patch_embed.w")) > 0.0);
}

TEST_CASE("a non-finite loss aborts with the step index") {
  const ModelConfig mc = small_model();
  auto model = CoordTokModel<float>::init(mc, 0);
  Trainer trainer(model, main_config(16));
  const Video v = clip(mc, 0);
  trainer.step({v});
  auto b = model.params().at("dec.out.b").mutable_data();
  b[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    trainer.step({v});
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
  CHECK(trainer.state().step == 1);
}

TEST_CASE("fine-tuning after the main phase sharpens held-out edges") {
  const ModelConfig mc = small_model();
  const auto corpus = gen_corpus(16, mc.frames, mc.height, mc.width, {0.5, 1.0, 2.0}, 300);
  const auto heldout = gen_corpus(4, mc.frames, mc.height, mc.width, {0.5, 1.0, 2.0}, 900);
  for (std::uint64_t seed : {1, 2, 3}) {
    auto model = CoordTokModel<float>::init(mc, seed);
    TrainConfig tc = main_config(64, seed);
    tc.batch_size = 4;
    Trainer main_phase(model, tc);
    for (std::uint64_t s = 0; s < 300; ++s) main_phase.step(make_batch(corpus, seed, s, 4, mc.frames));

    // Equal extra steps: main-only continues, the other arm fine-tunes.
    CoordTokModel<float> main_only(mc, model.params().cast<float>());
    CoordTokModel<float> tuned(mc, model.params().cast<float>());
    Trainer more(main_only, tc, main_phase.state());
    TrainConfig ft = tc;
    ft.phase = Phase::kFinetune;
    ft.n_frames = 2;
    ft.perceptual_weight = 1.0;
    Trainer fine(tuned, ft, main_phase.state());
    for (std::uint64_t s = 300; s < 400; ++s) {
      const auto batch = make_batch(corpus, seed, s, 4, mc.frames);
      more.step(batch);
      fine.step(batch);
    }
    const double a = heldout_proxy(main_only, heldout), b = heldout_proxy(tuned, heldout);
    MESSAGE("seed " << seed << " main-only " << a << " fine-tuned " << b);
    CHECK(b < a);
  }
}
