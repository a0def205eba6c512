// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

#include "coordtok/model/video.hpp"

namespace coordtok {

struct TransformerSpec {
  std::size_t layers = 1;
  std::size_t dim = 64;
  std::size_t heads = 4;

  friend bool operator==(const TransformerSpec&, const TransformerSpec&) = default;
};

/// Architecture hyperparameters. The encoder positional table is sized for
/// one clip shape (frames x height x width), so a config is tied to it.
struct ModelConfig {
  std::string preset = "tiny";

  std::size_t frames = 16;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;

  PatchSpec enc_patch{2, 4, 4};
  PatchSpec dec_patch{2, 4, 4};

  TransformerSpec encoder{2, 64, 4};
  TransformerSpec cross_self{2, 64, 4};
  TransformerSpec decoder{2, 128, 4};
  std::size_t mlp_ratio = 4;

  // Triplane extents H', W', T' and latent width D_z.
  std::size_t plane_h = 8;
  std::size_t plane_w = 8;
  std::size_t plane_t = 8;
  std::size_t latent_dim = 8;

  /// Each plane's learnable query sequence is cut into this many equal chunks.
  std::size_t split_factor = 4;

  /// Nodes per axis of the decoder's interpolated coordinate embedding.
  std::size_t coord_embed_nodes = 16;

  GridDims encoder_grid() const noexcept {
    return {frames / enc_patch.pt, height / enc_patch.ph, width / enc_patch.pw};
  }
  GridDims decoder_grid() const noexcept {
    return {frames / dec_patch.pt, height / dec_patch.ph, width / dec_patch.pw};
  }
  std::size_t enc_patch_dim() const noexcept { return enc_patch.volume() * channels; }
  std::size_t dec_patch_dim() const noexcept { return dec_patch.volume() * channels; }

  /// H'W' + W'T' + H'T'.
  std::size_t token_count() const noexcept {
    return plane_h * plane_w + plane_w * plane_t + plane_h * plane_t;
  }

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  /// Same architecture with the clip extents replaced (encoder table resized).
  ModelConfig with_clip(std::size_t t, std::size_t h, std::size_t w) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named presets: "tiny" (desk scale), "S", "B", "L".
ModelConfig model_preset(const std::string& name);

void to_json(nlohmann::json& j, const PatchSpec& p);
void from_json(const nlohmann::json& j, PatchSpec& p);
void to_json(nlohmann::json& j, const TransformerSpec& s);
void from_json(const nlohmann::json& j, TransformerSpec& s);
void to_json(nlohmann::json& j, const ModelConfig& c);
/// Fields absent from `j` keep the values already in `c`.
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace coordtok
