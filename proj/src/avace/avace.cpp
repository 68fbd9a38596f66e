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

#include "avace/avace.hpp"

#include <cmath>
#include <string>

#include "error.hpp"

namespace avalign {

GridShape square_grid(std::size_t patches) {
  if (patches == 0) fail(ErrorCode::kInvalidArgument, "patch count must be positive");
  std::size_t h = static_cast<std::size_t>(std::sqrt(static_cast<double>(patches)));
  while (h > 1 && patches % h != 0) --h;
  return GridShape{h, patches / h};
}

void AvaceConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) fail(ErrorCode::kInvalidArgument, "lambda1/lambda2 must be >= 0");
  if (!(eps1 > 0.0) || !(eps2 > 0.0)) fail(ErrorCode::kInvalidArgument, "eps1/eps2 must be > 0");
  if (!std::isfinite(lambda1) || !std::isfinite(lambda2) || !std::isfinite(eps1) || !std::isfinite(eps2)) {
    fail(ErrorCode::kNonFinite, "avace config must be finite");
  }
}

void CrossAttentionBlock::validate() const {
  for (const Tensor* t : {&w_query, &w_key, &w_value, &w_out_image, &w_out_audio}) require_matrix(*t, "attention block");
  const std::size_t d = w_query.rows(), da = w_query.cols();
  if (da < 1) fail(ErrorCode::kInvalidArgument, "attention width must be >= 1");
  if (w_key.shape() != w_query.shape() || w_value.shape() != w_query.shape()) {
    fail(ErrorCode::kDimensionMismatch, "query/key/value projections must share a shape");
  }
  if (w_out_image.shape() != Shape{da, d} || w_out_audio.shape() != Shape{da, d}) {
    fail(ErrorCode::kDimensionMismatch, "output projections must be Da x D");
  }
}

CrossAttentionBlock CrossAttentionBlock::random(std::size_t embed_dim, std::size_t attn_dim, std::mt19937_64& rng) {
  if (embed_dim == 0 || attn_dim == 0) fail(ErrorCode::kInvalidArgument, "attention dims must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](std::size_t rows, std::size_t cols) {
    std::vector<double> v(rows * cols);
    double s = 1.0 / std::sqrt(static_cast<double>(rows));
    for (double& x : v) x = s * normal(rng);
    return Tensor({rows, cols}, std::move(v));
  };
  CrossAttentionBlock b;
  b.w_query = draw(embed_dim, attn_dim);
  b.w_key = draw(embed_dim, attn_dim);
  b.w_value = draw(embed_dim, attn_dim);
  b.w_out_image = draw(attn_dim, embed_dim);
  b.w_out_audio = draw(attn_dim, embed_dim);
  return b;
}

CrossAttentionVars CrossAttentionVars::leaves(Tape& tape, const CrossAttentionBlock& block) {
  block.validate();
  return {tape.leaf(block.w_query), tape.leaf(block.w_key), tape.leaf(block.w_value), tape.leaf(block.w_out_image),
          tape.leaf(block.w_out_audio)};
}

CrossAttentionVars CrossAttentionVars::constants(Tape& tape, const CrossAttentionBlock& block) {
  block.validate();
  return {tape.constant(block.w_query), tape.constant(block.w_key), tape.constant(block.w_value),
          tape.constant(block.w_out_image), tape.constant(block.w_out_audio)};
}

CrossAttentionOutput cross_attend(Var z_image, Var z_audio, GridShape grid, const CrossAttentionVars& block) {
  Tape& tape = *z_image.tape();
  require_matrix(z_image.value(), "cross_attend image embeddings");
  require_matrix(z_audio.value(), "cross_attend audio embeddings");
  const std::size_t patches = z_image.value().rows();
  if (grid.cells() != patches) {
    fail(ErrorCode::kDimensionMismatch, "cross_attend: " + std::to_string(patches) + " image patches do not fill a " +
                                            std::to_string(grid.height) + "x" + std::to_string(grid.width) + " grid");
  }
  const std::size_t d = block.w_query.value().rows();
  if (z_image.value().cols() != d || z_audio.value().cols() != d) {
    fail(ErrorCode::kDimensionMismatch, "cross_attend: embedding width differs from the projection input width");
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(block.w_query.value().cols()));

  Var query = matmul(mean_rows(z_audio), block.w_query);  // 1 x Da
  Var keys = matmul(z_image, block.w_key);                // S_I x Da
  Var scores = scale(matmul(keys, transpose(query)), inv_sqrt);
  Var normalized = minmax_normalize(scores);
  Var attention = reshape(normalized, {grid.height, grid.width});

  Var weights = softmax(scores, 0);
  Var context = matmul(transpose(weights), matmul(z_image, block.w_value));  // 1 x Da

  Var image = add(z_image, matmul(normalized, matmul(query, block.w_out_image)));
  Var ones = tape.constant(Tensor::full({z_audio.value().rows(), 1}, 1.0));
  Var audio = add(z_audio, matmul(ones, matmul(context, block.w_out_audio)));
  return {image, audio, attention, scores};
}

AttentionMap::AttentionMap(Tensor grid) : grid_(std::move(grid)) {
  require_matrix(grid_, "attention map");
  for (double v : grid_.values()) {
    if (v < 0.0 || v > 1.0) fail(ErrorCode::kOutOfRange, "attention values must lie in [0, 1]");
  }
}

CrossAttentionValues cross_attend(const Tensor& z_image, const Tensor& z_audio, GridShape grid,
                                  const CrossAttentionBlock& block) {
  Tape tape;
  auto out = cross_attend(tape.constant(z_image), tape.constant(z_audio), grid,
                          CrossAttentionVars::constants(tape, block));
  return {out.image.value(), out.audio.value(), AttentionMap(out.attention.value()), out.scores.value()};
}

BoxMask rasterize_mask(const BoundingBox& box, GridShape grid) {
  if (grid.height == 0 || grid.width == 0) fail(ErrorCode::kInvalidArgument, "grid must be non-empty");
  std::vector<double> cells(grid.cells(), 0.0);
  bool any = false;
  for (std::size_t i = 0; i < grid.height; ++i) {
    double cy = (static_cast<double>(i) + 0.5) / static_cast<double>(grid.height);
    for (std::size_t j = 0; j < grid.width; ++j) {
      double cx = (static_cast<double>(j) + 0.5) / static_cast<double>(grid.width);
      if (cx >= box.x_left && cx <= box.x_right && cy >= box.y_top && cy <= box.y_bottom) {
        cells[i * grid.width + j] = 1.0;
        any = true;
      }
    }
  }
  return BoxMask{Tensor({grid.height, grid.width}, std::move(cells)), !any};
}

namespace {

struct MaskTotals {
  double inside, outside;
};

MaskTotals check_mask(const Tensor& attention, const Tensor& mask) {
  if (attention.shape() != mask.shape()) {
    fail(ErrorCode::kDimensionMismatch, "attention " + shape_string(attention.shape()) + " vs mask " +
                                            shape_string(mask.shape()));
  }
  MaskTotals t{0.0, 0.0};
  for (double m : mask.values()) {
    if (m != 0.0 && m != 1.0) fail(ErrorCode::kInvalidArgument, "mask entries must be 0 or 1");
    t.inside += m;
    t.outside += 1.0 - m;
  }
  return t;
}

Tensor complement(const Tensor& mask) {
  std::vector<double> v(mask.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 - mask[i];
  return Tensor(mask.shape(), std::move(v));
}

}  // namespace

Var attention_consistency_loss(Var attention, const Tensor& mask, const AvaceConfig& cfg) {
  cfg.validate();
  MaskTotals totals = check_mask(attention.value(), mask);
  Var inside = frobenius_dot(attention, mask);
  Var outside = frobenius_dot(attention, complement(mask));
  Var reward = add_scalar(scale(inside, -cfg.lambda1 / (totals.inside + cfg.eps1)), cfg.lambda1);
  Var penalty = scale(outside, cfg.lambda2 / (totals.outside + cfg.eps2));
  return add(reward, penalty);
}

double attention_consistency_loss(const Tensor& attention, const Tensor& mask, const AvaceConfig& cfg) {
  cfg.validate();
  MaskTotals totals = check_mask(attention, mask);
  double inside = 0.0, outside = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    inside += mask[i] * attention[i];
    outside += (1.0 - mask[i]) * attention[i];
  }
  return cfg.lambda1 * (1.0 - inside / (totals.inside + cfg.eps1)) +
         cfg.lambda2 * (outside / (totals.outside + cfg.eps2));
}

}  // namespace avalign
