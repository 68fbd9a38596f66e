// Copyright 2026 The avalign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Audio-guided cross attention over image patches and the box-consistency
// loss on the resulting attention map.

#include <cstddef>
#include <random>

#include "autodiff/tape.hpp"
#include "codec/codec.hpp"

namespace avalign {

struct GridShape {
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t cells() const noexcept { return height * width; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Picks the most square H x W factorisation of n (H <= W).
GridShape square_grid(std::size_t patches);

struct AvaceConfig {
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double eps1 = 1e-9;
  double eps2 = 1e-9;

  void validate() const;
};

/// Single-head cross attention parameters. The audio query attends over the
/// image patches: W_q, W_k, W_v are D x Da; the output projections map the
/// attended vectors back to the image and audio embedding widths.
struct CrossAttentionBlock {
  Tensor w_query;
  Tensor w_key;
  Tensor w_value;
  Tensor w_out_image;  // Da x D_image
  Tensor w_out_audio;  // Da x D_audio

  std::size_t embed_dim() const noexcept { return w_query.rows(); }
  std::size_t attn_dim() const noexcept { return w_query.cols(); }
  void validate() const;

  /// Gaussian init with std 1/sqrt(fan_in).
  static CrossAttentionBlock random(std::size_t embed_dim, std::size_t attn_dim, std::mt19937_64& rng);
};

/// The block's tensors registered on a tape.
struct CrossAttentionVars {
  Var w_query, w_key, w_value, w_out_image, w_out_audio;

  static CrossAttentionVars leaves(Tape& tape, const CrossAttentionBlock& block);
  static CrossAttentionVars constants(Tape& tape, const CrossAttentionBlock& block);
};

struct CrossAttentionOutput {
  Var image;      // z~_I, S_I x D
  Var audio;      // z~_A, S_A x D
  Var attention;  // A^c, H x W, min-max normalised scores
  Var scores;     // raw scaled dot products, S_I x 1
};

/// q = mean(z_A) W_q, s_i = (z_I W_k)_i . q / sqrt(Da), A^c = minmax(s) on the grid,
/// w = softmax(s), c = w^T (z_I W_v);
/// z~_I = z_I + A^c (q W_oI), z~_A = z_A + 1 (c W_oA).
CrossAttentionOutput cross_attend(Var z_image, Var z_audio, GridShape grid, const CrossAttentionVars& block);

/// Entries in [0,1]; min 0 and max 1 unless all zero.
class AttentionMap {
 public:
  explicit AttentionMap(Tensor grid);
  const Tensor& grid() const noexcept { return grid_; }

 private:
  Tensor grid_;
};

struct CrossAttentionValues {
  Tensor image;
  Tensor audio;
  AttentionMap attention;
  Tensor scores;
};

/// Off-tape evaluation of cross_attend.
CrossAttentionValues cross_attend(const Tensor& z_image, const Tensor& z_audio, GridShape grid,
                                  const CrossAttentionBlock& block);

struct BoxMask {
  Tensor grid;              // H x W of 0/1
  bool degenerate = false;  // no cell centre inside the box
};

/// Cell (i, j) is set iff its centre ((j + 0.5)/W, (i + 0.5)/H) lies in the closed box.
BoxMask rasterize_mask(const BoundingBox& box, GridShape grid);

/// L = l1 (1 - sum(M A) / (sum M + e1)) + l2 sum((1 - M) A) / (sum(1 - M) + e2).
Var attention_consistency_loss(Var attention, const Tensor& mask, const AvaceConfig& cfg);
double attention_consistency_loss(const Tensor& attention, const Tensor& mask, const AvaceConfig& cfg);

}  // namespace avalign
