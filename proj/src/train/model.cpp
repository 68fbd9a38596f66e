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

#include "train/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "error.hpp"

namespace avalign {

std::size_t box_bin(double coordinate) {
  long b = std::lround(coordinate / kBoxBinWidth);
  return static_cast<std::size_t>(std::clamp<long>(b, 0, kVocabSize - 1));
}

std::size_t time_bin(double seconds) {
  long b = std::lround(seconds / kTimeBinWidth);
  return static_cast<std::size_t>(std::clamp<long>(b, 0, kVocabSize - 1));
}

double box_bin_value(std::size_t bin) { return static_cast<double>(bin) / 100.0; }
double time_bin_value(std::size_t bin) { return static_cast<double>(bin) * 3.0 / 10.0; }

ModelDims ModelDims::for_scenes(const SceneSpec& spec, std::size_t embed_dim, std::size_t attn_dim,
                                std::size_t adapter_rank) {
  ModelDims d;
  d.adapter_rank = adapter_rank;
  d.feature_dim = spec.feature_dim;
  d.embed_dim = embed_dim;
  d.attn_dim = attn_dim;
  d.grid_height = spec.grid_height;
  d.grid_width = spec.grid_width;
  d.audio_tokens = spec.audio_tokens;
  return d;
}

namespace {

std::vector<Shape> param_shapes(const ModelDims& d) {
  const std::size_t v = kVocabSize;
  std::vector<Shape> s(kNumParams);
  s[kPImageProj] = {d.feature_dim, d.adapter_rank};
  s[kPAudioProj] = {d.feature_dim, d.adapter_rank};
  s[kPImageUp] = {d.adapter_rank, d.embed_dim};
  s[kPAudioUp] = {d.adapter_rank, d.embed_dim};
  s[kPQuery] = {d.embed_dim, d.attn_dim};
  s[kPKey] = {d.embed_dim, d.attn_dim};
  s[kPValue] = {d.embed_dim, d.attn_dim};
  s[kPOutImage] = {d.attn_dim, d.embed_dim};
  s[kPOutAudio] = {d.attn_dim, d.embed_dim};
  s[kPBoxReadout] = {d.embed_dim, 1};
  s[kPXHead] = {d.grid_width, 2 * v};
  s[kPYHead] = {d.grid_height, 2 * v};
  s[kPTimeReadout] = {d.embed_dim, 1};
  s[kPTimeHead] = {d.audio_tokens, 2 * v};
  s[kPObjectHead] = {d.embed_dim, v};
  s[kPVerdictHead] = {d.embed_dim, v};
  s[kPTokenBias] = {kNumTokens, v};
  return s;
}

void check_dims(const ModelDims& d) {
  if (d.feature_dim == 0 || d.embed_dim == 0 || d.attn_dim == 0 || d.adapter_rank == 0 || d.grid_height == 0 ||
      d.grid_width == 0 || d.audio_tokens == 0) {
    fail(ErrorCode::kInvalidArgument, "model dimensions must be positive");
  }
}

constexpr double kSmallInit = 0.1;

}  // namespace

Tensor rectangular_identity(std::size_t rows, std::size_t cols) {
  Tensor t = Tensor::zeros({rows, cols});
  std::vector<double> v(t.data());
  for (std::size_t i = 0; i < std::min(rows, cols); ++i) v[i * cols + i] = 1.0;
  return Tensor({rows, cols}, std::move(v));
}

const std::vector<std::string>& ToyModel::param_names() {
  static const std::vector<std::string> names = {
      "image_proj", "audio_proj",   "w_query",   "w_key",       "w_value",      "w_out_image",
      "w_out_audio", "box_readout", "x_head",    "y_head",      "time_readout", "time_head",
      "object_head", "verdict_head", "token_bias", "image_adapter_up", "audio_adapter_up"};
  return names;
}

ToyModel ToyModel::zeros(const ModelDims& dims) {
  check_dims(dims);
  ToyModel m;
  m.dims_ = dims;
  for (const Shape& s : param_shapes(dims)) m.params_.push_back(Tensor::zeros(s));
  return m;
}

ToyModel ToyModel::init(const ModelDims& dims, std::uint64_t seed) {
  ToyModel m = zeros(dims);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto shapes = param_shapes(dims);
  for (std::size_t p = 0; p <= kPTimeReadout; ++p) {
    if (p == kPXHead || p == kPYHead) continue;
    const Shape& s = shapes[p];
    // Adapter up-factors stay zero so the encoders start as the identity path;
    // query/key maps start near identity; the rest gets a fan-in scale.
    const bool small = p == kPQuery || p == kPKey;
    double std_dev = (small ? kSmallInit : 1.0) / std::sqrt(static_cast<double>(s[0]));
    std::vector<double> v(shape_size(s));
    for (double& x : v) x = std_dev * normal(rng);
    if (p == kPQuery || p == kPKey) {
      for (std::size_t i = 0; i < std::min(s[0], s[1]); ++i) v[i * s[1] + i] += 1.0;
    }
    m.params_[p] = Tensor(s, std::move(v));
  }
  return m;
}

std::size_t ToyModel::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

CrossAttentionBlock ToyModel::attention_block() const {
  return {params_[kPQuery], params_[kPKey], params_[kPValue], params_[kPOutImage], params_[kPOutAudio]};
}

ForwardResult forward(const ToyModel& model, std::span<const Var> p, Var image, Var audio) {
  if (p.size() != kNumParams) fail(ErrorCode::kInvalidArgument, "forward: wrong parameter count");
  const ModelDims& d = model.dims();
  Tape& tape = *image.tape();
  if (image.shape() != Shape{d.grid_height * d.grid_width, d.feature_dim} ||
      audio.shape() != Shape{d.audio_tokens, d.feature_dim}) {
    fail(ErrorCode::kDimensionMismatch, "forward: scene tensors " + shape_string(image.shape()) + " / " +
                                            shape_string(audio.shape()) + " do not match the model");
  }
  // Encoders are residual: a fixed identity path plus a learned correction.
  Var eye = tape.constant(rectangular_identity(d.feature_dim, d.embed_dim));
  Var z_image = add(matmul(image, eye), matmul(matmul(image, p[kPImageProj]), p[kPImageUp]));
  Var z_audio = add(matmul(audio, eye), matmul(matmul(audio, p[kPAudioProj]), p[kPAudioUp]));
  CrossAttentionVars block{p[kPQuery], p[kPKey], p[kPValue], p[kPOutImage], p[kPOutAudio]};
  CrossAttentionOutput att = cross_attend(z_image, z_audio, {d.grid_height, d.grid_width}, block);

  const std::size_t v = kVocabSize;
  // Box tokens read the row and column profiles of a scalar patch map.
  Var patch_map = reshape(matmul(att.image, p[kPBoxReadout]), {d.grid_height, d.grid_width});
  Var col_avg = tape.constant(Tensor::full({1, d.grid_height}, 1.0 / static_cast<double>(d.grid_height)));
  Var row_avg = tape.constant(Tensor::full({d.grid_width, 1}, 1.0 / static_cast<double>(d.grid_width)));
  Var col_profile = matmul(col_avg, patch_map);                // 1 x W
  Var row_profile = transpose(matmul(patch_map, row_avg));     // 1 x H
  Var x_tokens = reshape(matmul(col_profile, p[kPXHead]), {2, v});
  Var y_tokens = reshape(matmul(row_profile, p[kPYHead]), {2, v});

  Var token_map = transpose(matmul(att.audio, p[kPTimeReadout]));  // 1 x S_A
  Var t_tokens = reshape(matmul(token_map, p[kPTimeHead]), {2, v});

  // The label and the verdict look at the attended image region.
  Var attended = matmul(transpose(softmax(att.scores, 0)), att.image);  // 1 x D
  Var object_token = matmul(attended, p[kPObjectHead]);
  Var verdict_token = matmul(mul(mean_rows(att.audio), attended), p[kPVerdictHead]);

  Var parts[] = {x_tokens, y_tokens, t_tokens, object_token, verdict_token};
  Var logits = add(concat_rows(parts), p[kPTokenBias]);
  return {logits, att.attention, z_image, z_audio};
}

TokenTargets scene_targets(const SyntheticScene& s) {
  TokenTargets t;
  auto push = [&](std::size_t pos, std::size_t tok) {
    t.positions.push_back(pos);
    t.tokens.push_back(tok);
  };
  if (s.is_positive) {
    push(kTokXLeft, box_bin(s.gt_box.x_left));
    push(kTokXRight, box_bin(s.gt_box.x_right));
    push(kTokYTop, box_bin(s.gt_box.y_top));
    push(kTokYBottom, box_bin(s.gt_box.y_bottom));
    push(kTokObject, s.image_class);
  }
  push(kTokTStart, time_bin(s.gt_segment.t_start));
  push(kTokTEnd, time_bin(s.gt_segment.t_end));
  push(kTokVerdict, s.is_positive ? 1 : 0);
  return t;
}

SceneLoss scene_loss(const ToyModel& model, std::span<const Var> params, const SyntheticScene& scene,
                     const LossConfig& cfg, const Tensor* frozen_plan) {
  if (!(cfg.weights.lambda_ot >= 0.0) || !(cfg.weights.lambda_ac >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, "loss weights must be non-negative");
  }
  Tape& tape = *params[0].tape();
  ForwardResult f = forward(model, params, tape.constant(scene.image), tape.constant(scene.audio));

  TokenTargets targets = scene_targets(scene);
  std::vector<double> select(targets.positions.size() * kNumTokens, 0.0);
  for (std::size_t r = 0; r < targets.positions.size(); ++r) select[r * kNumTokens + targets.positions[r]] = 1.0;
  Var picked = matmul(tape.constant(Tensor({targets.positions.size(), kNumTokens}, std::move(select))), f.logits);
  Var ce = cross_entropy(picked, targets.tokens);

  SceneLoss out;
  out.parts.l_ce = ce.value().item();
  Var total = ce;
  if (cfg.weights.lambda_ot > 0.0 && scene.is_positive) {
    Var ot = frozen_plan ? frozen_plan_loss(f.z_image, f.z_audio, *frozen_plan)
                         : ot_loss(f.z_image, f.z_audio, cfg.sinkhorn, &out.plan);
    if (frozen_plan) out.plan.plan.entries = *frozen_plan;
    out.parts.l_ot = ot.value().item();
    total = add(total, scale(ot, cfg.weights.lambda_ot));
  }
  if (cfg.weights.lambda_ac > 0.0 && scene.is_positive) {
    const ModelDims& d = model.dims();
    BoxMask mask = rasterize_mask(scene.gt_box, {d.grid_height, d.grid_width});
    Var ac = attention_consistency_loss(f.attention, mask.grid, cfg.avace);
    out.parts.l_ac = ac.value().item();
    total = add(total, scale(ac, cfg.weights.lambda_ac));
  }
  out.total = total;
  out.parts.total = total.value().item();
  return out;
}

Tensor predict_logits(const ToyModel& model, const SyntheticScene& scene) {
  Tape tape;
  std::vector<Var> params;
  for (const Tensor& t : model.params()) params.push_back(tape.constant(t));
  return forward(model, params, tape.constant(scene.image), tape.constant(scene.audio)).logits.value();
}

namespace {

std::size_t row_argmax(const Tensor& logits, std::size_t row) {
  const std::size_t v = logits.cols();
  std::size_t best = 0;
  for (std::size_t k = 1; k < v; ++k) {
    if (logits.at(row, k) > logits.at(row, best)) best = k;
  }
  return best;
}

}  // namespace

Decoded decode(const Tensor& logits) {
  if (logits.shape() != Shape{kNumTokens, kVocabSize}) fail(ErrorCode::kDimensionMismatch, "decode: logits shape");
  Decoded d;
  d.object_class = row_argmax(logits, kTokObject);
  const auto& names = scene_class_names();
  std::string label = d.object_class < names.size() ? names[d.object_class] : "class" + std::to_string(d.object_class);
  char buf[128];
  std::snprintf(buf, sizeof buf, "[%s,%.2f,%.2f,%.2f,%.2f]", label.c_str(),
                box_bin_value(row_argmax(logits, kTokXLeft)), box_bin_value(row_argmax(logits, kTokYTop)),
                box_bin_value(row_argmax(logits, kTokXRight)), box_bin_value(row_argmax(logits, kTokYBottom)));
  d.box_text = buf;
  std::snprintf(buf, sizeof buf, "(%.1f,%.1f)", time_bin_value(row_argmax(logits, kTokTStart)),
                time_bin_value(row_argmax(logits, kTokTEnd)));
  d.time_text = buf;
  d.verdict = logits.at(kTokVerdict, 1) > logits.at(kTokVerdict, 0);

  auto box = parse_box(d.box_text);
  d.box_status = box.status;
  if (box.ok()) d.box = box.value->box;
  auto seg = parse_time(d.time_text);
  d.time_status = seg.status;
  if (seg.ok()) d.segment = *seg.value;
  return d;
}

}  // namespace avalign
