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

// Training loop for the toy grounding model: AdamW with gradient
// accumulation, linear warmup then cosine decay, per-epoch validation and
// best-validation checkpointing; plus the loss-combination ablation.

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "data/data.hpp"
#include "train/model.hpp"

namespace avalign {

struct TrainConfig {
  double base_lr = 1e-3;
  double warmup_ratio = 0.03;
  std::size_t epochs = 5;
  std::size_t grad_accumulation = 3;
  std::size_t batch_size = 4;  // scenes per micro-batch
  double lambda_ot = 0.75;
  double lambda_ac = 0.35;
  std::uint64_t seed = 0;      // model init and shuffling
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double val_fraction = 0.1;
  bool two_stage = false;      // stage I: transport loss only
  std::size_t stage1_epochs = 1;
  std::size_t embed_dim = 16;
  std::size_t attn_dim = 16;
  std::size_t adapter_rank = 16;
  AvaceConfig avace;
  SinkhornConfig sinkhorn;

  void validate() const;
  LossConfig loss_config() const;
};

/// Flat key=value view of TrainConfig; keys are listed by train_config_keys().
const std::vector<std::pair<std::string, std::string>>& train_config_keys();  // key, description
/// Applies one key=value setting; kUnknownKey for unknown keys, kParse for bad values.
void set_train_option(TrainConfig& cfg, const std::string& key, const std::string& value);
/// Lines of "key = value"; '#' starts a comment.
void apply_config_text(TrainConfig& cfg, const std::string& text);
/// Every key with its resolved value, in train_config_keys() order.
std::vector<std::pair<std::string, std::string>> resolved_config(const TrainConfig& cfg);

/// Linear ramp 0 -> base over the first ceil(warmup_ratio * total) steps,
/// then cosine decay to 0 at step == total.
double lr_at(std::size_t step, std::size_t total_steps, double base_lr, double warmup_ratio);
std::size_t warmup_steps(std::size_t total_steps, double warmup_ratio);

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown train;  // mean over training scenes
  LossBreakdown val;
  double lr_end = 0.0;
};

struct TrainResult {
  ToyModel best;             // lowest validation loss
  std::size_t best_epoch = 0;
  std::vector<ToyModel> checkpoints;  // after each epoch
  std::vector<EpochLog> epochs;
  std::vector<double> step_losses;    // mean total per optimizer step
  std::size_t total_steps = 0;
};

/// Splits `scenes` into train/validation by val_fraction (tail of the list)
/// and trains. Throws kNanLoss with step diagnostics if a loss turns non-finite.
TrainResult train(const TrainConfig& cfg, const std::vector<SyntheticScene>& scenes, const ModelDims& dims,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

struct HeldOutMetrics {
  double ciou = 0.0;  // box cIoU@0.5 on positive scenes
  double auc = 0.0;
  double segment_f1 = 0.0;
  double verdict_f1 = 0.0;
  double verdict_accuracy = 0.0;
  std::size_t box_parse_failures = 0;
};
HeldOutMetrics evaluate_model(const ToyModel& model, const std::vector<SyntheticScene>& scenes);

/// Learning rate the ablation uses by default. It was chosen on seeds 0-3,
/// which is why the default seed set starts at 100.
constexpr double kAblationBaseLr = 1e-2;

inline TrainConfig ablation_train_config() {
  TrainConfig c;
  c.base_lr = kAblationBaseLr;
  return c;
}

struct AblationConfig {
  TrainConfig train = ablation_train_config();
  SceneSpec scenes;
  std::size_t train_scenes = 2000;
  std::size_t test_scenes = 500;
  double positive_fraction = 0.5;
  std::vector<std::uint64_t> seeds = {100, 101, 102, 103, 104, 105, 106, 107, 108, 109};
  std::size_t jobs = 1;
};

struct AblationRun {
  std::string combo;  // "ce", "ce+ot", "ce+ac", "ce+ot+ac"
  std::uint64_t seed = 0;
  double lambda_ot = 0.0, lambda_ac = 0.0;
  HeldOutMetrics metrics;
  double seconds = 0.0;
};

struct AblationTable {
  std::vector<AblationRun> runs;  // combo-major, seeds in order
  std::vector<std::string> combos() const;
  std::vector<const AblationRun*> runs_for(const std::string& combo) const;
};

/// For each seed the scenes and the initial model are shared by all four
/// loss combinations. Seeds run one after another; the combinations of a
/// seed run on up to min(jobs, 4) threads.
AblationTable run_ablation(const AblationConfig& cfg, const std::function<void(const AblationRun&)>& on_run = {});
std::string ablation_markdown(const AblationTable& t);
double median(std::vector<double> v);

/// Parameters as {"dims": {...}, "params": {name: {"shape": [...], "values": [...]}}}.
std::string model_to_json(const ToyModel& model);
ToyModel model_from_json(const std::string& text);

}  // namespace avalign
