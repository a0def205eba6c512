// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/model/config.hpp"

#include "coordtok/error.hpp"

namespace coordtok {
namespace {

void check_transformer(const TransformerSpec& s, const char* what) {
  if (s.layers == 0 || s.dim == 0 || s.heads == 0) {
    throw ConfigError(std::string(what) + ": layers, dim and heads must be positive");
  }
  if (s.dim % s.heads != 0) {
    throw ConfigError(std::string(what) + ": dim " + std::to_string(s.dim) +
                      " not divisible by " + std::to_string(s.heads) + " heads");
  }
}

void check_divides(std::size_t extent, std::size_t patch, const char* axis, const char* which) {
  if (patch == 0 || extent % patch != 0) {
    throw ConfigError(std::string(which) + " patch extent " + std::to_string(patch) +
                      " does not divide " + axis + " extent " + std::to_string(extent));
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (frames == 0 || height == 0 || width == 0 || channels == 0) {
    throw ConfigError("model: clip extents must be positive");
  }
  check_divides(frames, enc_patch.pt, "time", "encoder");
  check_divides(height, enc_patch.ph, "height", "encoder");
  check_divides(width, enc_patch.pw, "width", "encoder");
  check_divides(frames, dec_patch.pt, "time", "decoder");
  check_divides(height, dec_patch.ph, "height", "decoder");
  check_divides(width, dec_patch.pw, "width", "decoder");
  check_transformer(encoder, "encoder");
  check_transformer(cross_self, "cross_self");
  check_transformer(decoder, "decoder");
  if (mlp_ratio == 0) throw ConfigError("model: mlp_ratio must be positive");
  if (plane_h == 0 || plane_w == 0 || plane_t == 0 || latent_dim == 0) {
    throw ConfigError("model: plane extents and latent_dim must be positive");
  }
  if (split_factor == 0) throw ConfigError("model: split_factor must be positive");
  const std::size_t lengths[3] = {plane_h * plane_w, plane_w * plane_t, plane_h * plane_t};
  const char* names[3] = {"xy", "yt", "xt"};
  for (int p = 0; p < 3; ++p) {
    if (lengths[p] % split_factor != 0) {
      throw ConfigError(std::string("model: plane ") + names[p] + " sequence length " +
                        std::to_string(lengths[p]) + " not divisible into " +
                        std::to_string(split_factor) + " chunks");
    }
  }
  if (coord_embed_nodes == 0) throw ConfigError("model: coord_embed_nodes must be positive");
}

ModelConfig ModelConfig::with_clip(std::size_t t, std::size_t h, std::size_t w) const {
  ModelConfig c = *this;
  c.frames = t;
  c.height = h;
  c.width = w;
  return c;
}

ModelConfig model_preset(const std::string& name) {
  ModelConfig c;
  if (name == "tiny") return c;
  if (name != "S" && name != "B" && name != "L") {
    throw ConfigError("unknown model preset '" + name + "' (expected tiny, S, B or L)");
  }
  c.preset = name;
  c.frames = 128;
  c.height = 128;
  c.width = 128;
  c.enc_patch = {4, 8, 8};
  c.dec_patch = {1, 8, 8};
  c.plane_h = 16;
  c.plane_w = 16;
  c.plane_t = 32;
  c.latent_dim = 8;
  c.coord_embed_nodes = 128;
  if (name == "S") {
    c.encoder = {8, 512, 8};
    c.cross_self = {8, 512, 8};
    c.decoder = {8, 512, 8};
  } else if (name == "B") {
    c.encoder = {8, 768, 12};
    c.cross_self = {12, 768, 12};
    c.decoder = {12, 768, 12};
  } else {
    c.encoder = {8, 1024, 16};
    c.cross_self = {24, 1024, 16};
    c.decoder = {24, 1024, 16};
  }
  return c;
}

void to_json(nlohmann::json& j, const PatchSpec& p) { j = nlohmann::json::array({p.pt, p.ph, p.pw}); }

void from_json(const nlohmann::json& j, PatchSpec& p) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("patch spec must be [pt, ph, pw]");
  p = {j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>()};
}

void to_json(nlohmann::json& j, const TransformerSpec& s) {
  j = {{"layers", s.layers}, {"dim", s.dim}, {"heads", s.heads}};
}

void from_json(const nlohmann::json& j, TransformerSpec& s) {
  s.layers = j.value("layers", s.layers);
  s.dim = j.value("dim", s.dim);
  s.heads = j.value("heads", s.heads);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {
      {"preset", c.preset},
      {"frames", c.frames},
      {"height", c.height},
      {"width", c.width},
      {"channels", c.channels},
      {"enc_patch", c.enc_patch},
      {"dec_patch", c.dec_patch},
      {"encoder", c.encoder},
      {"cross_self", c.cross_self},
      {"decoder", c.decoder},
      {"mlp_ratio", c.mlp_ratio},
      {"plane_h", c.plane_h},
      {"plane_w", c.plane_w},
      {"plane_t", c.plane_t},
      {"latent_dim", c.latent_dim},
      {"split_factor", c.split_factor},
      {"coord_embed_nodes", c.coord_embed_nodes},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  if (j.contains("preset")) {
    const std::string name = j.at("preset").get<std::string>();
    if (name != c.preset) c = model_preset(name);
  }
  c.frames = j.value("frames", c.frames);
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.channels = j.value("channels", c.channels);
  if (j.contains("enc_patch")) c.enc_patch = j.at("enc_patch").get<PatchSpec>();
  if (j.contains("dec_patch")) c.dec_patch = j.at("dec_patch").get<PatchSpec>();
  if (j.contains("encoder")) from_json(j.at("encoder"), c.encoder);
  if (j.contains("cross_self")) from_json(j.at("cross_self"), c.cross_self);
  if (j.contains("decoder")) from_json(j.at("decoder"), c.decoder);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.plane_h = j.value("plane_h", c.plane_h);
  c.plane_w = j.value("plane_w", c.plane_w);
  c.plane_t = j.value("plane_t", c.plane_t);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.split_factor = j.value("split_factor", c.split_factor);
  c.coord_embed_nodes = j.value("coord_embed_nodes", c.coord_embed_nodes);
}

}  // namespace coordtok
