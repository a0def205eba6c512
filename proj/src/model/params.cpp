// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include "coordtok/model/params.hpp"

#include <algorithm>

#include "coordtok/error.hpp"

namespace coordtok {

using diff::Shape;
using diff::Tensor;

template <typename T>
Tensor<T>& ParameterStore<T>::add(std::string name, Shape shape, std::vector<T> values) {
  if (contains(name)) throw ConfigError("parameter '" + name + "' registered twice");
  auto t = Tensor<T>::from(std::move(shape), std::move(values), /*requires_grad=*/true);
  t.set_name(name);
  entries_.emplace_back(std::move(name), std::move(t));
  return entries_.back().second;
}

template <typename T>
bool ParameterStore<T>::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

template <typename T>
const Tensor<T>& ParameterStore<T>::at(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

template <typename T>
Tensor<T>& ParameterStore<T>::at(std::string_view name) {
  return const_cast<Tensor<T>&>(static_cast<const ParameterStore&>(*this).at(name));
}

template <typename T>
std::size_t ParameterStore<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

template <typename T>
std::vector<diff::ParamRef<T>> ParameterStore<T>::optimizer_refs() {
  std::vector<diff::ParamRef<T>> refs;
  refs.reserve(entries_.size());
  for (auto& [name, t] : entries_) {
    auto g = t.mutable_grad();
    refs.push_back({name, t.mutable_data(), std::span<const T>(g.data(), g.size())});
  }
  return refs;
}

namespace {

void transformer_layout(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
                        std::size_t dim, std::size_t kv_dim, std::size_t mlp_dim, bool cross) {
  auto ln = [&](const std::string& n) {
    out.push_back({prefix + n + ".gain", {dim}});
    out.push_back({prefix + n + ".bias", {dim}});
  };
  auto attn = [&](const std::string& n, std::size_t in_kv) {
    out.push_back({prefix + n + ".q.w", {dim, dim}});
    out.push_back({prefix + n + ".q.b", {dim}});
    out.push_back({prefix + n + ".k.w", {in_kv, dim}});
    out.push_back({prefix + n + ".k.b", {dim}});
    out.push_back({prefix + n + ".v.w", {in_kv, dim}});
    out.push_back({prefix + n + ".v.b", {dim}});
    out.push_back({prefix + n + ".o.w", {dim, dim}});
    out.push_back({prefix + n + ".o.b", {dim}});
  };
  if (cross) {
    ln("ln_cross");
    out.push_back({prefix + "ln_kv.gain", {kv_dim}});
    out.push_back({prefix + "ln_kv.bias", {kv_dim}});
    attn("cross", kv_dim);
  }
  ln("ln_attn");
  attn("attn", dim);
  ln("ln_mlp");
  out.push_back({prefix + "mlp.fc1.w", {dim, mlp_dim}});
  out.push_back({prefix + "mlp.fc1.b", {mlp_dim}});
  out.push_back({prefix + "mlp.fc2.w", {mlp_dim, dim}});
  out.push_back({prefix + "mlp.fc2.b", {dim}});
}

bool is_gain(const std::string& name) { return name.ends_with(".gain"); }
bool is_bias(const std::string& name) {
  return name.ends_with(".b") || name.ends_with(".bias");
}

}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& c) {
  c.validate();
  std::vector<std::pair<std::string, Shape>> out;
  const std::size_t de = c.encoder.dim, dc = c.cross_self.dim, dd = c.decoder.dim;
  const GridDims eg = c.encoder_grid();

  out.push_back({"enc.patch_embed.w", {c.enc_patch_dim(), de}});
  out.push_back({"enc.patch_embed.b", {de}});
  out.push_back({"enc.pos", {eg.count(), de}});
  for (std::size_t l = 0; l < c.encoder.layers; ++l) {
    transformer_layout(out, "enc.blocks." + std::to_string(l) + ".", de, de, c.mlp_ratio * de, false);
  }

  out.push_back({"cs.latent.xy", {c.plane_h * c.plane_w, dc}});
  out.push_back({"cs.latent.yt", {c.plane_w * c.plane_t, dc}});
  out.push_back({"cs.latent.xt", {c.plane_h * c.plane_t, dc}});
  for (std::size_t l = 0; l < c.cross_self.layers; ++l) {
    transformer_layout(out, "cs.blocks." + std::to_string(l) + ".", dc, de, c.mlp_ratio * dc, true);
  }
  out.push_back({"cs.ln_out.gain", {dc}});
  out.push_back({"cs.ln_out.bias", {dc}});
  for (const char* p : {"xy", "yt", "xt"}) {
    out.push_back({std::string("cs.proj.") + p + ".w", {dc, c.latent_dim}});
    out.push_back({std::string("cs.proj.") + p + ".b", {c.latent_dim}});
  }

  out.push_back({"dec.embed.w", {3 * c.latent_dim, dd}});
  out.push_back({"dec.embed.b", {dd}});
  for (const char* axis : {"i", "j", "k"}) {
    out.push_back({std::string("dec.coord_pos.") + axis, {c.coord_embed_nodes, 1, dd}});
  }
  for (std::size_t l = 0; l < c.decoder.layers; ++l) {
    transformer_layout(out, "dec.blocks." + std::to_string(l) + ".", dd, dd, c.mlp_ratio * dd, false);
  }
  out.push_back({"dec.ln_out.gain", {dd}});
  out.push_back({"dec.ln_out.bias", {dd}});
  out.push_back({"dec.out.w", {dd, c.dec_patch_dim()}});
  out.push_back({"dec.out.b", {c.dec_patch_dim()}});
  return out;
}

bool is_embedding_parameter(std::string_view name) {
  return name == "enc.pos" || name.starts_with("cs.latent.") || name.starts_with("dec.coord_pos.");
}

template <typename T>
ParameterStore<T> init_parameters(const ModelConfig& config, std::uint64_t seed,
                                  const InitOptions& options) {
  Rng rng(seed);
  ParameterStore<T> store;
  for (auto& [name, shape] : parameter_layout(config)) {
    const std::size_t n = diff::shape_numel(shape);
    std::vector<T> values(n, T{0});
    if (is_gain(name)) {
      std::fill(values.begin(), values.end(), T{1});
    } else if (is_bias(name)) {
      // zeros
    } else if (name == "dec.out.w" && options.zero_output_projection) {
      // zeros
    } else {
      const double std = is_embedding_parameter(name) ? options.embedding_std : options.std;
      for (auto& v : values) v = static_cast<T>(rng.truncated_normal(std));
    }
    store.add(name, shape, std::move(values));
  }
  return store;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template ParameterStore<float> init_parameters(const ModelConfig&, std::uint64_t, const InitOptions&);
template ParameterStore<double> init_parameters(const ModelConfig&, std::uint64_t, const InitOptions&);

}  // namespace coordtok
