// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>
#include <unistd.h>

#include "coordtok/error.hpp"

namespace coordtok {

using Kind = FormatError::Kind;

namespace {

constexpr std::size_t kMaxRank = 8;

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view data, const char* what) : data_(data), what_(what) {}

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::string_view bytes(std::size_t n) {
    need(n);
    const std::string_view s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint16_t u16() {
    const auto b = bytes(2);
    return static_cast<std::uint16_t>(static_cast<std::uint8_t>(b[0]) | static_cast<std::uint8_t>(b[1]) << 8);
  }
  std::uint32_t u32() {
    const auto b = bytes(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = v << 8 | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

  void need(std::size_t n) const {
    if (n > remaining()) {
      throw FormatError(Kind::kTruncated, std::string(what_) + ": truncated (needed " + std::to_string(n) +
                                              " bytes at offset " + std::to_string(pos_) + ", " +
                                              std::to_string(remaining()) + " left)");
    }
  }
  void expect_end() const {
    if (remaining() != 0) {
      throw FormatError(Kind::kCorrupt, std::string(what_) + ": " + std::to_string(remaining()) + " trailing bytes");
    }
  }

 private:
  std::string_view data_;
  const char* what_;
  std::size_t pos_ = 0;
};

void header(Reader& r, std::string_view magic, std::uint32_t version, const char* what) {
  if (r.remaining() < magic.size()) {
    throw FormatError(Kind::kTruncated, std::string(what) + ": file shorter than its magic");
  }
  if (r.bytes(magic.size()) != magic) {
    throw FormatError(Kind::kBadMagic, std::string(what) + ": bad magic, expected '" + std::string(magic) + "'");
  }
  const std::uint32_t v = r.u32();
  if (v != version) {
    throw FormatError(Kind::kVersionMismatch, std::string(what) + ": version " + std::to_string(v) +
                                                   ", reader supports " + std::to_string(version));
  }
}

// Product of extents, or an error if any is zero or the product exceeds `limit`.
std::size_t checked_product(std::initializer_list<std::uint32_t> dims, std::size_t limit, const char* what) {
  std::size_t n = 1;
  for (std::uint32_t d : dims) {
    if (d == 0) throw FormatError(Kind::kCorrupt, std::string(what) + ": zero extent");
    if (n > limit / d) throw FormatError(Kind::kTruncated, std::string(what) + ": payload larger than file");
    n *= d;
  }
  return n;
}

void put_tensor(Writer& w, const std::string& name, const diff::Shape& shape, std::span<const float> values) {
  if (name.size() > 0xffff) throw InputError("checkpoint: tensor name too long");
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.bytes(name);
  w.u8(0);
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (std::size_t d : shape) w.u32(static_cast<std::uint32_t>(d));
  for (float v : values) w.f32(v);
}

std::vector<float> read_f32(Reader& r, std::size_t count) {
  r.need(count * 4);
  std::vector<float> out(count);
  for (float& v : out) v = r.f32();
  return out;
}

}  // namespace

// ---------------------------------------------------------------- files

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("cannot read " + path.string());
  return data;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("cannot write " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

// ---------------------------------------------------------------- CVID

std::string encode_cvid(const Video& video) {
  video.validate();
  Writer w;
  w.bytes("CVID");
  w.u32(kCvidVersion);
  for (std::size_t d : {video.frames, video.height, video.width, video.channels}) {
    if (d > 0xffffffffu) throw InputError("CVID: extent exceeds u32");
    w.u32(static_cast<std::uint32_t>(d));
  }
  for (float p : video.pixels) w.u8(static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f)));
  return w.take();
}

Video decode_cvid(std::string_view bytes) {
  Reader r(bytes, "CVID");
  header(r, "CVID", kCvidVersion, "CVID");
  const std::uint32_t t = r.u32(), h = r.u32(), wd = r.u32(), c = r.u32();
  const std::size_t n = checked_product({t, h, wd, c}, r.remaining(), "CVID");
  const auto payload = r.bytes(n);
  r.expect_end();
  Video v;
  v.frames = t;
  v.height = h;
  v.width = wd;
  v.channels = c;
  v.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) v.pixels[i] = static_cast<std::uint8_t>(payload[i]) / 255.0f;
  return v;
}

void write_cvid(const std::filesystem::path& path, const Video& video) { write_file_atomic(path, encode_cvid(video)); }

Video read_cvid(const std::filesystem::path& path) { return decode_cvid(read_file(path)); }

// ---------------------------------------------------------------- CTCK

std::string encode_checkpoint(const ModelConfig& model, const TrainConfig& train,
                              const ParameterStore<float>& params, const TrainState* state) {
  nlohmann::json meta = {{"format", {{"checkpoint", kCheckpointVersion}, {"cvid", kCvidVersion}, {"tokens", kTokenVersion}}},
                         {"model", model},
                         {"train", train},
                         {"train_state", state ? train_state_json(*state) : nlohmann::json(nullptr)}};
  const std::string blob = meta.dump();
  Writer w;
  w.bytes("CTCK");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(blob.size()));
  w.bytes(blob);

  std::size_t count = params.size();
  if (state) {
    for (const auto& [name, t] : params.entries()) {
      count += state->optimizer.m.contains(name);
      count += state->optimizer.v.contains(name);
    }
  }
  w.u32(static_cast<std::uint32_t>(count));
  for (const auto& [name, t] : params.entries()) put_tensor(w, name, t.shape(), t.data());
  if (state) {
    for (const auto& [name, t] : params.entries()) {
      if (auto it = state->optimizer.m.find(name); it != state->optimizer.m.end()) {
        put_tensor(w, "adamw.m/" + name, t.shape(), it->second);
      }
      if (auto it = state->optimizer.v.find(name); it != state->optimizer.v.end()) {
        put_tensor(w, "adamw.v/" + name, t.shape(), it->second);
      }
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes, "CTCK");
  header(r, "CTCK", kCheckpointVersion, "CTCK");
  const std::uint32_t blob_len = r.u32();
  const std::string_view blob = r.bytes(blob_len);
  Checkpoint ck;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(blob);
    ck.model = meta.at("model").get<ModelConfig>();
    ck.train = meta.at("train").get<TrainConfig>();
    ck.model.validate();
    if (!meta.at("train_state").is_null()) {
      ck.has_state = true;
      train_state_from_json(meta.at("train_state"), ck.state);
      ck.state.optimizer.config = ck.train.optimizer();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(Kind::kCorrupt, std::string("CTCK: config blob: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(Kind::kCorrupt, std::string("CTCK: config blob: ") + e.what());
  }

  const auto layout = parameter_layout(ck.model);
  std::map<std::string, diff::Shape> expected(layout.begin(), layout.end());
  std::map<std::string, std::vector<float>> values;
  std::set<std::string> seen;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name(r.bytes(r.u16()));
    const std::uint8_t dtype = r.u8();
    if (dtype != 0) throw FormatError(Kind::kCorrupt, "CTCK: tensor '" + name + "' has unknown dtype " + std::to_string(dtype));
    const std::uint8_t rank = r.u8();
    if (rank == 0 || rank > kMaxRank) throw FormatError(Kind::kCorrupt, "CTCK: tensor '" + name + "' has rank " + std::to_string(rank));
    diff::Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = r.u32();
      if (d == 0) throw FormatError(Kind::kCorrupt, "CTCK: tensor '" + name + "' has a zero extent");
      if (numel > r.remaining() / 4 / d) throw FormatError(Kind::kTruncated, "CTCK: tensor '" + name + "' runs past end of file");
      numel *= d;
    }
    std::string_view param = name;
    const bool is_m = name.starts_with("adamw.m/"), is_v = name.starts_with("adamw.v/");
    if (is_m || is_v) {
      if (!ck.has_state) throw FormatError(Kind::kUnknownTensor, "CTCK: moment tensor '" + name + "' without a train state");
      param.remove_prefix(8);
    }
    const auto it = expected.find(std::string(param));
    if (it == expected.end()) throw FormatError(Kind::kUnknownTensor, "CTCK: unknown tensor '" + name + "'");
    if (it->second != shape) {
      throw FormatError(Kind::kShapeMismatch, "CTCK: tensor '" + name + "' has shape " + diff::shape_str(shape) +
                                                  ", config needs " + diff::shape_str(it->second));
    }
    if (!seen.insert(name).second) throw FormatError(Kind::kCorrupt, "CTCK: duplicate tensor '" + name + "'");
    std::vector<float> data = read_f32(r, numel);
    if (is_m) {
      ck.state.optimizer.m[std::string(param)] = std::move(data);
    } else if (is_v) {
      ck.state.optimizer.v[std::string(param)] = std::move(data);
    } else {
      values[name] = std::move(data);
    }
  }
  r.expect_end();
  for (const auto& [name, shape] : layout) {
    auto it = values.find(name);
    if (it == values.end()) throw FormatError(Kind::kMissingTensor, "CTCK: missing tensor '" + name + "'");
    ck.params.add(name, shape, std::move(it->second));
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& model, const TrainConfig& train,
                     const ParameterStore<float>& params, const TrainState* state) {
  write_file_atomic(path, encode_checkpoint(model, train, params, state));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

// ---------------------------------------------------------------- CTOK

std::string encode_tokens(const Triplane<float>& z) {
  z.validate();
  Writer w;
  w.bytes("CTOK");
  w.u32(kTokenVersion);
  for (std::size_t d : {z.plane_h(), z.plane_w(), z.plane_t(), z.latent_dim()}) w.u32(static_cast<std::uint32_t>(d));
  for (const auto* plane : {&z.xy, &z.yt, &z.xt})
    for (float v : plane->data()) w.f32(v);
  return w.take();
}

Triplane<float> decode_tokens(std::string_view bytes) {
  Reader r(bytes, "CTOK");
  header(r, "CTOK", kTokenVersion, "CTOK");
  const std::uint32_t h = r.u32(), w = r.u32(), t = r.u32(), d = r.u32();
  const std::size_t limit = r.remaining() / 4;
  const std::size_t nxy = checked_product({h, w, d}, limit, "CTOK");
  const std::size_t nyt = checked_product({w, t, d}, limit, "CTOK");
  const std::size_t nxt = checked_product({h, t, d}, limit, "CTOK");
  if (nxy + nyt + nxt > limit) {
    throw FormatError(Kind::kTruncated, "CTOK: payload needs " + std::to_string(4 * (nxy + nyt + nxt)) +
                                            " bytes, file has " + std::to_string(r.remaining()));
  }
  Triplane<float> z;
  z.xy = diff::Tensor<float>::from({h, w, d}, read_f32(r, nxy));
  z.yt = diff::Tensor<float>::from({w, t, d}, read_f32(r, nyt));
  z.xt = diff::Tensor<float>::from({h, t, d}, read_f32(r, nxt));
  r.expect_end();
  return z;
}

void write_tokens(const std::filesystem::path& path, const Triplane<float>& z) { write_file_atomic(path, encode_tokens(z)); }

Triplane<float> read_tokens(const std::filesystem::path& path) { return decode_tokens(read_file(path)); }

Triplane<float> read_tokens(const std::filesystem::path& path, const ModelConfig& config) {
  Triplane<float> z = read_tokens(path);
  if (z.plane_h() != config.plane_h || z.plane_w() != config.plane_w || z.plane_t() != config.plane_t ||
      z.latent_dim() != config.latent_dim) {
    throw FormatError(Kind::kShapeMismatch,
                      "CTOK: planes (" + std::to_string(z.plane_h()) + "," + std::to_string(z.plane_w()) + "," +
                          std::to_string(z.plane_t()) + "," + std::to_string(z.latent_dim()) +
                          ") do not match the model (" + std::to_string(config.plane_h) + "," +
                          std::to_string(config.plane_w) + "," + std::to_string(config.plane_t) + "," +
                          std::to_string(config.latent_dim) + ")");
  }
  return z;
}

}  // namespace coordtok
