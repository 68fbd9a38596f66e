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

// Dataset curation utilities (class lookup, pairing, scoring, frame
// selection, audio windowing) and a seeded synthetic scene generator that
// stands in for pretrained image/audio encoders.

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autodiff/tensor.hpp"
#include "codec/codec.hpp"

namespace avalign {

// ---------------------------------------------------------------------------
// Class lookup and pairing.

struct LookupRow {
  std::string image_label;
  std::optional<std::string> audio_primary;
  std::optional<std::string> audio_alt;

  bool usable() const noexcept { return audio_primary.has_value() || audio_alt.has_value(); }
  bool matches_audio(const std::string& audio_label) const;
};

class ClassLookupTable {
 public:
  ClassLookupTable() = default;
  /// Throws kInvalidArgument on a duplicate image label.
  explicit ClassLookupTable(std::vector<LookupRow> rows);

  const std::vector<LookupRow>& rows() const noexcept { return rows_; }
  const LookupRow* find(const std::string& image_label) const;

 private:
  std::vector<LookupRow> rows_;
};

/// Three columns (image label, primary audio label, alternative audio label),
/// "--" or an empty cell marking an absent label. A leading header row whose
/// first cell is "image_label" is skipped.
ClassLookupTable parse_lookup(std::istream& in);
ClassLookupTable load_lookup(const std::string& path);

struct LabeledItem {
  std::string id;
  std::string label;
};

struct PairingCandidate {
  std::string image_id;
  std::string audio_id;
  std::string matched_label;  // the image-side label
  double score = 1.0;
};

/// Any (image_id, audio_id) -> score in [0, 1].
using SimilarityProvider = std::function<double(const std::string& image_id, const std::string& audio_id)>;

/// Every (image, audio) pair whose labels meet in a usable lookup row,
/// sorted by (image_id, audio_id). Scores are 1 without a provider.
std::vector<PairingCandidate> match_pairs(std::span<const LabeledItem> images, std::span<const LabeledItem> audios,
                                          const ClassLookupTable& table, const SimilarityProvider& score = {});

/// sum_i clip_i * clap_i / N over the shared text vocabulary.
double bridged_similarity(std::span<const double> clip_scores, std::span<const double> clap_scores);

struct ScoredId {
  std::string id;
  double score = 0.0;
};

struct TopKResult {
  std::vector<std::string> ids;
  bool short_list = false;  // fewer than k items were available
};

/// Highest scores first, ties broken by lexicographic id.
TopKResult top_k(std::span<const ScoredId> scores, std::size_t k = 3);

/// Rows [onset, min(onset + target, S)) of tokens, then zero rows up to target.
Tensor pad_or_trim_audio(const Tensor& tokens, std::size_t target_tokens, std::size_t onset = 0);

// ---------------------------------------------------------------------------
// Synthetic scenes.

struct SceneSpec {
  std::size_t grid_height = 8;
  std::size_t grid_width = 8;
  std::size_t feature_dim = 16;   // per patch and per audio token
  std::size_t audio_tokens = 30;  // one token per second of audio
  std::size_t num_classes = 8;
  double signal = 1.0;            // signature amplitude at full box coverage
  double tail = 0.4;              // amplitude just outside the box
  double tail_decay = 0.08;       // decay length of the tail, normalised units
  double noise_std = 0.1;         // isotropic noise on every feature
  double nuisance_std = 1.0;      // extra noise on the trailing nuisance features
  double background = 1.0;        // backdrop / silence level where no object is present
  double min_box_side = 0.25;
  double max_box_side = 0.55;
  std::size_t min_segment = 4;    // seconds
  std::size_t max_segment = 16;

  void validate() const;
  std::size_t patches() const noexcept { return grid_height * grid_width; }
};

/// Category names used when the scene class is written as text.
const std::vector<std::string>& scene_class_names();

struct SyntheticScene {
  std::string id;
  Tensor image;         // patches x feature_dim, patches in row-major grid order
  Tensor audio;         // audio_tokens x feature_dim
  Tensor blob;          // grid_height x grid_width noise-free amplitude of the sounding class
  BoundingBox gt_box;   // object of image_class
  TimeSegment gt_segment;
  std::size_t image_class = 0;  // class of the boxed object
  std::size_t audio_class = 0;  // class heard in the audio
  bool is_positive = true;      // audio_class == image_class
};

/// Scene i depends only on (seed, i), so ranges can be generated independently.
/// Positives are interleaved so that exactly round(n * positive_fraction) are
/// positive.
std::vector<SyntheticScene> generate_dataset(std::uint64_t seed, std::size_t n, double positive_fraction = 0.5,
                                             const SceneSpec& spec = {}, std::size_t first_index = 0);
SyntheticScene generate_scene(std::uint64_t seed, std::size_t index, bool positive, const SceneSpec& spec = {});
/// Whether scene `index` of a dataset with this fraction is positive.
bool interleaved_positive(std::size_t index, double positive_fraction);

/// Flat JSON object of the SceneSpec fields. Parsing starts from the defaults,
/// so partial objects are accepted; unknown keys throw kUnknownKey.
std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(std::string_view text);

/// JSONL: a header object {"format":"avalign-scenes","version":1,"spec":{...},...}
/// followed by one scene object per line.
void write_dataset(std::ostream& out, const std::vector<SyntheticScene>& scenes, const SceneSpec& spec,
                   std::uint64_t seed);
struct LoadedDataset {
  SceneSpec spec;
  std::uint64_t seed = 0;
  std::vector<SyntheticScene> scenes;
};
LoadedDataset read_dataset(std::istream& in);

}  // namespace avalign
