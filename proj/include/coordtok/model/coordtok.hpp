// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "coordtok/diffcore/tensor.hpp"
#include "coordtok/model/config.hpp"
#include "coordtok/model/params.hpp"
#include "coordtok/model/patchify.hpp"
#include "coordtok/model/video.hpp"

namespace coordtok {

/// Factorized latent: a content plane xy [H', W', D_z] and two motion planes
/// yt [W', T', D_z] and xt [H', T', D_z].
template <typename T>
struct Triplane {
  diff::Tensor<T> xy;
  diff::Tensor<T> yt;
  diff::Tensor<T> xt;

  std::size_t plane_h() const { return xy.dim(0); }
  std::size_t plane_w() const { return xy.dim(1); }
  std::size_t plane_t() const { return yt.dim(1); }
  std::size_t latent_dim() const { return xy.dim(2); }
  std::size_t token_count() const {
    return plane_h() * plane_w() + plane_w() * plane_t() + plane_h() * plane_t();
  }

  /// Leaf copies, optionally requiring grad (cuts the encoder graph).
  Triplane detach(bool requires_grad = false) const {
    return {xy.detach(requires_grad), yt.detach(requires_grad), xt.detach(requires_grad)};
  }

  /// Throws ShapeError if the planes disagree on H', W', T' or D_z.
  void validate() const;
};

/// Coordinate-based representations h = [h^xy, h^yt, h^xt] for each coord,
/// one [3 D_z] row per coordinate. Plane lookups use fractional grid
/// positions coord * (extent - 1): xy at (i, j), yt at (j, k), xt at (i, k).
template <typename T>
diff::Tensor<T> query_triplane(const Triplane<T>& z, std::span<const Coord> coords);

/// Encoder, cross-self triplane encoder and coordinate decoder bound to a
/// parameter store.
template <typename T>
class CoordTokModel {
 public:
  CoordTokModel(ModelConfig config, ParameterStore<T> params);

  /// Fresh model with parameters drawn from `seed`.
  static CoordTokModel init(const ModelConfig& config, std::uint64_t seed,
                            const InitOptions& options = {});

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore<T>& params() noexcept { return params_; }
  const ParameterStore<T>& params() const noexcept { return params_; }

  /// Patch embedding + positional table + transformer layers: [M, enc_patch_dim] -> [M, D_enc].
  diff::Tensor<T> encode_features(const diff::Tensor<T>& patches) const;

  /// Learnable plane queries cross-attend to the features; per-plane projection to D_z.
  Triplane<T> encode_triplane(const diff::Tensor<T>& features) const;

  /// patchify -> encode_features -> encode_triplane.
  Triplane<T> tokenize(const Video& video) const;

  /// Coordinate reps [N, 3 D_z] -> patch pixels [N, dec_patch_dim], in input order.
  diff::Tensor<T> decode_patches(const diff::Tensor<T>& reps, std::span<const Coord> coords) const;

  /// query_triplane followed by decode_patches.
  diff::Tensor<T> decode(const Triplane<T>& z, std::span<const Coord> coords) const;

  /// Decodes all M patch centers of the configured decoder grid. `chunk` = 0
  /// decodes them as one attention set; otherwise consecutive groups of
  /// `chunk` coordinates are decoded independently (results may differ).
  Video reconstruct_full(const Triplane<T>& z, std::size_t chunk = 0) const;

  /// Patch matrix of `video` as a constant tensor [M, patch_dim].
  static diff::Tensor<T> patch_tensor(const PatchMatrix& patches);

 private:
  diff::Tensor<T> self_block(const diff::Tensor<T>& x, const std::string& prefix,
                             std::size_t heads) const;
  diff::Tensor<T> attention(const diff::Tensor<T>& x, const diff::Tensor<T>& kv,
                            const std::string& prefix, std::size_t heads) const;
  diff::Tensor<T> mlp(const diff::Tensor<T>& x, const std::string& prefix) const;
  diff::Tensor<T> norm(const diff::Tensor<T>& x, const std::string& prefix) const;

  ModelConfig config_;
  ParameterStore<T> params_;
};

/// Every patch center of `grid` in row order (t outer, w inner).
std::vector<Coord> all_patch_coords(const GridDims& grid);

extern template class CoordTokModel<float>;
extern template class CoordTokModel<double>;

}  // namespace coordtok
