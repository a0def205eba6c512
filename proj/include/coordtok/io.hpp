// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "coordtok/model/config.hpp"
#include "coordtok/model/coordtok.hpp"
#include "coordtok/model/params.hpp"
#include "coordtok/model/video.hpp"
#include "coordtok/train.hpp"

// Byte layouts (all integers little-endian):
//
//   CVID  "CVID" u32 version | u32 T H W C | u8 pixels, (t, h, w, c) row-major
//   CTCK  "CTCK" u32 version | u32 n + n bytes JSON | u32 tensor count |
//         per tensor: u16 n + name, u8 dtype (0 = f32), u8 rank, u32 dims[rank],
//         f32 payload
//   CTOK  "CTOK" u32 version | u32 H' W' T' D_z | f32 xy, yt, xt
//
// The CTCK JSON holds {"format", "model", "train", "train_state"}; with a
// train state, AdamW moments follow the parameters as "adamw.m/<name>" and
// "adamw.v/<name>".

namespace coordtok {

inline constexpr std::uint32_t kCvidVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kTokenVersion = 1;
inline constexpr std::size_t kCvidHeaderBytes = 24;
inline constexpr std::size_t kTokenHeaderBytes = 24;

std::string encode_cvid(const Video& video);
Video decode_cvid(std::string_view bytes);
void write_cvid(const std::filesystem::path& path, const Video& video);
Video read_cvid(const std::filesystem::path& path);

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  ParameterStore<float> params;
  bool has_state = false;
  TrainState state;
};

std::string encode_checkpoint(const ModelConfig& model, const TrainConfig& train,
                              const ParameterStore<float>& params, const TrainState* state = nullptr);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& model, const TrainConfig& train,
                     const ParameterStore<float>& params, const TrainState* state = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string encode_tokens(const Triplane<float>& z);
Triplane<float> decode_tokens(std::string_view bytes);
void write_tokens(const std::filesystem::path& path, const Triplane<float>& z);
Triplane<float> read_tokens(const std::filesystem::path& path);
/// Also checks the planes against the model's H', W', T' and D_z.
Triplane<float> read_tokens(const std::filesystem::path& path, const ModelConfig& config);

/// Whole-file helpers. Writes go to a sibling temp file renamed into place.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace coordtok
