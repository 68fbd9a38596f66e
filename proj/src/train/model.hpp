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

// A toy grounding model: linear patch/token encoders, the audio-guided cross
// attention block, and coordinate-token heads over 101-bin vocabularies.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "autodiff/tape.hpp"
#include "avace/avace.hpp"
#include "codec/codec.hpp"
#include "data/data.hpp"
#include "ot/ot.hpp"

namespace avalign {

constexpr std::size_t kVocabSize = 101;
constexpr double kBoxBinWidth = 0.01;
constexpr double kTimeBinWidth = 0.3;

/// Output positions, one token each.
enum TokenPosition : std::size_t {
  kTokXLeft = 0,
  kTokXRight,
  kTokYTop,
  kTokYBottom,
  kTokObject,
  kTokTStart,
  kTokTEnd,
  kTokVerdict,
  kNumTokens,
};

std::size_t box_bin(double coordinate);
std::size_t time_bin(double seconds);
double box_bin_value(std::size_t bin);
double time_bin_value(std::size_t bin);

struct ModelDims {
  std::size_t feature_dim = 16;
  std::size_t embed_dim = 16;
  std::size_t attn_dim = 16;
  std::size_t adapter_rank = 16;  // rank of the learned encoder corrections
  std::size_t grid_height = 8;
  std::size_t grid_width = 8;
  std::size_t audio_tokens = 30;

  static ModelDims for_scenes(const SceneSpec& spec, std::size_t embed_dim, std::size_t attn_dim,
                              std::size_t adapter_rank);
};

/// rows x cols matrix with ones on the leading diagonal.
Tensor rectangular_identity(std::size_t rows, std::size_t cols);

/// Every trainable tensor, in a fixed order.
class ToyModel {
 public:
  ToyModel() = default;
  /// Encoders and attention get Gaussian initial values, the heads start at zero.
  static ToyModel init(const ModelDims& dims, std::uint64_t seed);
  static ToyModel zeros(const ModelDims& dims);

  const ModelDims& dims() const noexcept { return dims_; }
  std::vector<Tensor>& params() noexcept { return params_; }
  const std::vector<Tensor>& params() const noexcept { return params_; }
  static const std::vector<std::string>& param_names();
  std::size_t param_count() const;

  CrossAttentionBlock attention_block() const;

 private:
  ModelDims dims_;
  std::vector<Tensor> params_;
};

/// Indices into ToyModel::params().
enum ParamIndex : std::size_t {
  kPImageProj = 0,
  kPAudioProj,
  kPQuery,
  kPKey,
  kPValue,
  kPOutImage,
  kPOutAudio,
  kPBoxReadout,   // D x 1, patch map for the box head
  kPXHead,        // W x 2V: column profile -> [left | right]
  kPYHead,        // H x 2V: row profile -> [top | bottom]
  kPTimeReadout,  // D x 1
  kPTimeHead,     // S_A x 2V: token map -> [start | end]
  kPObjectHead,   // D x V
  kPVerdictHead,  // D x V
  kPTokenBias,    // kNumTokens x V
  kPImageUp,      // r x D, second factor of the image adapter
  kPAudioUp,      // r x D
  kNumParams,
};

struct ForwardResult {
  Var logits;     // kNumTokens x kVocabSize
  Var attention;  // A^c
  Var z_image;    // encoder outputs before attention
  Var z_audio;
};

/// params must hold kNumParams vars on the same tape as the inputs.
ForwardResult forward(const ToyModel& model, std::span<const Var> params, Var image, Var audio);

/// Ground-truth token per position; negatives carry no box tokens.
struct TokenTargets {
  std::vector<std::size_t> positions;
  std::vector<std::size_t> tokens;
};
TokenTargets scene_targets(const SyntheticScene& scene);

struct LossWeights {
  double lambda_ot = 0.75;
  double lambda_ac = 0.35;
};

struct LossBreakdown {
  double l_ce = 0.0;
  double l_ot = 0.0;
  double l_ac = 0.0;
  double total = 0.0;
};

struct LossConfig {
  LossWeights weights;
  AvaceConfig avace;
  SinkhornConfig sinkhorn;
};

struct SceneLoss {
  Var total;
  LossBreakdown parts;
  SinkhornResult plan;
};

/// total = l_ce + lambda_ot * l_ot + lambda_ac * l_ac. The box-mask term is
/// skipped for negatives; a weight of 0 skips its term entirely. With
/// frozen_plan the transport plan is taken as given instead of solved.
SceneLoss scene_loss(const ToyModel& model, std::span<const Var> params, const SyntheticScene& scene,
                     const LossConfig& cfg, const Tensor* frozen_plan = nullptr);

/// Decoded model answers, as text and as values.
struct Decoded {
  std::string box_text;
  std::string time_text;
  bool verdict = false;
  std::size_t object_class = 0;
  std::optional<BoundingBox> box;
  std::optional<TimeSegment> segment;
  ParseStatus box_status = ParseStatus::kOk;
  ParseStatus time_status = ParseStatus::kOk;
};
Decoded decode(const Tensor& logits);

/// Off-tape inference.
Tensor predict_logits(const ToyModel& model, const SyntheticScene& scene);

}  // namespace avalign
