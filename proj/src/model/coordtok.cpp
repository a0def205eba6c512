// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/model/coordtok.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coordtok/diffcore/attention.hpp"
#include "coordtok/diffcore/ops.hpp"
#include "coordtok/error.hpp"
#include "coordtok/sampling.hpp"

namespace coordtok {

using diff::Shape;
using diff::Tensor;

template <typename T>
void Triplane<T>::validate() const {
  if (!xy.defined() || !yt.defined() || !xt.defined() || xy.rank() != 3 || yt.rank() != 3 ||
      xt.rank() != 3) {
    throw ShapeError("Triplane: planes must be rank-3 tensors");
  }
  const std::size_t h = xy.dim(0), w = xy.dim(1), t = yt.dim(1), d = xy.dim(2);
  if (yt.dim(0) != w || xt.dim(0) != h || xt.dim(1) != t || yt.dim(2) != d || xt.dim(2) != d) {
    throw ShapeError("Triplane: inconsistent planes xy " + diff::shape_str(xy.shape()) + ", yt " +
                     diff::shape_str(yt.shape()) + ", xt " + diff::shape_str(xt.shape()));
  }
}

namespace {

void check_coord(const Coord& c) {
  for (double v : {c.i, c.j, c.k}) {
    if (!std::isfinite(v)) throw InputError("coordinate is not finite");
    if (v < 0.0 || v > 1.0) throw InputError("coordinate " + std::to_string(v) + " outside [0, 1]");
  }
}

}  // namespace

template <typename T>
Tensor<T> query_triplane(const Triplane<T>& z, std::span<const Coord> coords) {
  z.validate();
  if (coords.empty()) throw InputError("query_triplane: no coordinates");
  const double sh = static_cast<double>(z.plane_h() - 1);
  const double sw = static_cast<double>(z.plane_w() - 1);
  const double st = static_cast<double>(z.plane_t() - 1);
  std::vector<double> ui(coords.size()), uj(coords.size()), uk(coords.size());
  for (std::size_t n = 0; n < coords.size(); ++n) {
    check_coord(coords[n]);
    ui[n] = coords[n].i * sh;
    uj[n] = coords[n].j * sw;
    uk[n] = coords[n].k * st;
  }
  return diff::concat<T>({diff::bilinear_sample<T>(z.xy, ui, uj),
                          diff::bilinear_sample<T>(z.yt, uj, uk),
                          diff::bilinear_sample<T>(z.xt, ui, uk)},
                         1);
}

std::vector<Coord> all_patch_coords(const GridDims& grid) {
  std::vector<Coord> coords;
  coords.reserve(grid.count());
  for (std::size_t t = 0; t < grid.gt; ++t)
    for (std::size_t h = 0; h < grid.gh; ++h)
      for (std::size_t w = 0; w < grid.gw; ++w) coords.push_back(coord_of_patch({t, h, w}, grid));
  return coords;
}

template <typename T>
CoordTokModel<T>::CoordTokModel(ModelConfig config, ParameterStore<T> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw ConfigError("model expects " + std::to_string(layout.size()) + " parameters, store has " +
                      std::to_string(params_.size()));
  }
  for (const auto& [name, shape] : layout) {
    const auto& t = params_.at(name);
    if (t.shape() != shape) {
      throw ShapeError("parameter '" + name + "' has shape " + diff::shape_str(t.shape()) +
                       ", config needs " + diff::shape_str(shape));
    }
  }
}

template <typename T>
CoordTokModel<T> CoordTokModel<T>::init(const ModelConfig& config, std::uint64_t seed,
                                        const InitOptions& options) {
  return CoordTokModel(config, init_parameters<T>(config, seed, options));
}

template <typename T>
Tensor<T> CoordTokModel<T>::norm(const Tensor<T>& x, const std::string& prefix) const {
  return diff::layer_norm(x, params_.at(prefix + ".gain"), params_.at(prefix + ".bias"));
}

template <typename T>
Tensor<T> CoordTokModel<T>::attention(const Tensor<T>& x, const Tensor<T>& kv,
                                      const std::string& prefix, std::size_t heads) const {
  auto proj = [&](const Tensor<T>& in, const char* which) {
    return diff::linear(in, params_.at(prefix + "." + which + ".w"), params_.at(prefix + "." + which + ".b"));
  };
  const Tensor<T> mixed = diff::multi_head_attention(proj(x, "q"), proj(kv, "k"), proj(kv, "v"), heads);
  return proj(mixed, "o");
}

template <typename T>
Tensor<T> CoordTokModel<T>::mlp(const Tensor<T>& x, const std::string& prefix) const {
  const Tensor<T> hidden = diff::gelu(diff::linear(x, params_.at(prefix + ".fc1.w"), params_.at(prefix + ".fc1.b")));
  return diff::linear(hidden, params_.at(prefix + ".fc2.w"), params_.at(prefix + ".fc2.b"));
}

template <typename T>
Tensor<T> CoordTokModel<T>::self_block(const Tensor<T>& x, const std::string& prefix,
                                       std::size_t heads) const {
  const Tensor<T> h = norm(x, prefix + "ln_attn");
  const Tensor<T> y = diff::add(x, attention(h, h, prefix + "attn", heads));
  return diff::add(y, mlp(norm(y, prefix + "ln_mlp"), prefix + "mlp"));
}

template <typename T>
Tensor<T> CoordTokModel<T>::patch_tensor(const PatchMatrix& patches) {
  return Tensor<T>::from({patches.rows(), patches.cols()},
                         std::vector<T>(patches.values.begin(), patches.values.end()));
}

template <typename T>
Tensor<T> CoordTokModel<T>::encode_features(const Tensor<T>& patches) const {
  const Tensor<T>& pos = params_.at("enc.pos");
  if (patches.rank() != 2 || patches.dim(0) != pos.dim(0) || patches.dim(1) != config_.enc_patch_dim()) {
    throw ShapeError("encode_features: patches " + diff::shape_str(patches.shape()) +
                     " do not match positional table " + diff::shape_str(pos.shape()) +
                     " and patch width " + std::to_string(config_.enc_patch_dim()));
  }
  Tensor<T> x = diff::add(diff::linear(patches, params_.at("enc.patch_embed.w"), params_.at("enc.patch_embed.b")), pos);
  for (std::size_t l = 0; l < config_.encoder.layers; ++l) {
    x = self_block(x, "enc.blocks." + std::to_string(l) + ".", config_.encoder.heads);
  }
  return x;
}

template <typename T>
Triplane<T> CoordTokModel<T>::encode_triplane(const Tensor<T>& features) const {
  if (features.rank() != 2 || features.dim(1) != config_.encoder.dim) {
    throw ShapeError("encode_triplane: features " + diff::shape_str(features.shape()) +
                     " do not have width " + std::to_string(config_.encoder.dim));
  }
  const char* planes[3] = {"xy", "yt", "xt"};
  const std::size_t split = config_.split_factor;

  // Each plane's query sequence is cut into `split` equal contiguous chunks;
  // every chunk of every plane enters the stack as one sequence.
  std::vector<Tensor<T>> chunks;
  std::size_t lengths[3];
  for (int p = 0; p < 3; ++p) {
    const Tensor<T>& latent = params_.at(std::string("cs.latent.") + planes[p]);
    lengths[p] = latent.dim(0);
    if (lengths[p] % split != 0) {
      throw ShapeError(std::string("encode_triplane: plane ") + planes[p] + " sequence of " +
                       std::to_string(lengths[p]) + " not divisible into " + std::to_string(split) + " chunks");
    }
    const std::size_t len = lengths[p] / split;
    for (std::size_t c = 0; c < split; ++c) chunks.push_back(diff::narrow(latent, 0, c * len, len));
  }
  Tensor<T> x = diff::concat(chunks, 0);

  for (std::size_t l = 0; l < config_.cross_self.layers; ++l) {
    const std::string prefix = "cs.blocks." + std::to_string(l) + ".";
    const Tensor<T> kv = norm(features, prefix + "ln_kv");
    x = diff::add(x, attention(norm(x, prefix + "ln_cross"), kv, prefix + "cross", config_.cross_self.heads));
    x = self_block(x, prefix, config_.cross_self.heads);
  }
  x = norm(x, "cs.ln_out");

  const std::size_t extents[3][2] = {{config_.plane_h, config_.plane_w},
                                     {config_.plane_w, config_.plane_t},
                                     {config_.plane_h, config_.plane_t}};
  Tensor<T> out[3];
  std::size_t offset = 0;
  for (int p = 0; p < 3; ++p) {
    const std::size_t len = lengths[p] / split;
    std::vector<Tensor<T>> pieces;
    for (std::size_t c = 0; c < split; ++c) pieces.push_back(diff::narrow(x, 0, offset + c * len, len));
    offset += lengths[p];
    const std::string name = std::string("cs.proj.") + planes[p];
    const Tensor<T> plane = diff::linear(split == 1 ? pieces[0] : diff::concat(pieces, 0),
                                         params_.at(name + ".w"), params_.at(name + ".b"));
    out[p] = diff::reshape(plane, {extents[p][0], extents[p][1], config_.latent_dim});
  }
  return {out[0], out[1], out[2]};
}

template <typename T>
Triplane<T> CoordTokModel<T>::tokenize(const Video& video) const {
  if (video.frames != config_.frames || video.height != config_.height ||
      video.width != config_.width || video.channels != config_.channels) {
    throw ShapeError("tokenize: clip " + std::to_string(video.frames) + "x" +
                     std::to_string(video.height) + "x" + std::to_string(video.width) + "x" +
                     std::to_string(video.channels) + " does not match model clip " +
                     std::to_string(config_.frames) + "x" + std::to_string(config_.height) + "x" +
                     std::to_string(config_.width) + "x" + std::to_string(config_.channels));
  }
  return encode_triplane(encode_features(patch_tensor(patchify(video, config_.enc_patch))));
}

template <typename T>
Tensor<T> CoordTokModel<T>::decode_patches(const Tensor<T>& reps, std::span<const Coord> coords) const {
  if (reps.rank() != 2 || reps.dim(1) != 3 * config_.latent_dim) {
    throw ShapeError("decode_patches: representations " + diff::shape_str(reps.shape()) +
                     " must be [N, " + std::to_string(3 * config_.latent_dim) + "]");
  }
  if (coords.empty() || reps.dim(0) != coords.size()) {
    throw ShapeError("decode_patches: " + std::to_string(reps.dim(0)) + " representations for " +
                     std::to_string(coords.size()) + " coordinates");
  }
  Tensor<T> x = diff::linear(reps, params_.at("dec.embed.w"), params_.at("dec.embed.b"));

  // Coordinate embedding: one interpolated table per axis, summed.
  const double span = static_cast<double>(config_.coord_embed_nodes - 1);
  const std::vector<double> zeros(coords.size(), 0.0);
  std::vector<double> pos(coords.size());
  const char* axes[3] = {"i", "j", "k"};
  for (int a = 0; a < 3; ++a) {
    for (std::size_t n = 0; n < coords.size(); ++n) {
      check_coord(coords[n]);
      const double c = a == 0 ? coords[n].i : a == 1 ? coords[n].j : coords[n].k;
      pos[n] = c * span;
    }
    x = diff::add(x, diff::bilinear_sample<T>(params_.at(std::string("dec.coord_pos.") + axes[a]), pos, zeros));
  }

  for (std::size_t l = 0; l < config_.decoder.layers; ++l) {
    x = self_block(x, "dec.blocks." + std::to_string(l) + ".", config_.decoder.heads);
  }
  return diff::linear(norm(x, "dec.ln_out"), params_.at("dec.out.w"), params_.at("dec.out.b"));
}

template <typename T>
Tensor<T> CoordTokModel<T>::decode(const Triplane<T>& z, std::span<const Coord> coords) const {
  return decode_patches(query_triplane(z, coords), coords);
}

template <typename T>
Video CoordTokModel<T>::reconstruct_full(const Triplane<T>& z, std::size_t chunk) const {
  diff::NoGradGuard no_grad;
  const GridDims grid = config_.decoder_grid();
  const std::vector<Coord> coords = all_patch_coords(grid);
  if (coords.empty()) throw InputError("reconstruct_full: empty decoder grid");
  const std::size_t step = chunk == 0 ? coords.size() : chunk;
  const std::size_t cols = config_.dec_patch_dim();
  std::vector<float> values(coords.size() * cols);
  for (std::size_t first = 0; first < coords.size(); first += step) {
    const std::size_t count = std::min(step, coords.size() - first);
    const Tensor<T> out = decode(z, std::span<const Coord>(coords).subspan(first, count));
    const auto data = out.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      values[first * cols + i] = std::clamp(static_cast<float>(data[i]), 0.0f, 1.0f);
    }
  }
  return unpatchify(values, grid, config_.dec_patch, config_.channels);
}

template struct Triplane<float>;
template struct Triplane<double>;
template class CoordTokModel<float>;
template class CoordTokModel<double>;
template Tensor<float> query_triplane(const Triplane<float>&, std::span<const Coord>);
template Tensor<double> query_triplane(const Triplane<double>&, std::span<const Coord>);

}  // namespace coordtok
