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

#include "data/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "io/io.hpp"
#include "metrics/metrics.hpp"

namespace avalign {

bool LookupRow::matches_audio(const std::string& audio_label) const {
  return (audio_primary && *audio_primary == audio_label) || (audio_alt && *audio_alt == audio_label);
}

ClassLookupTable::ClassLookupTable(std::vector<LookupRow> rows) : rows_(std::move(rows)) {
  std::map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].image_label.empty()) fail(ErrorCode::kInvalidArgument, "lookup row with an empty image label");
    if (!seen.emplace(rows_[i].image_label, i).second) {
      fail(ErrorCode::kInvalidArgument, "duplicate image label '" + rows_[i].image_label + "' in lookup table");
    }
  }
}

const LookupRow* ClassLookupTable::find(const std::string& image_label) const {
  for (const auto& r : rows_) {
    if (r.image_label == image_label) return &r;
  }
  return nullptr;
}

namespace {

std::string trimmed(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(" \t") - a + 1);
}

std::optional<std::string> optional_label(const std::string& cell) {
  std::string t = trimmed(cell);
  if (t.empty() || t == "--") return std::nullopt;
  return t;
}

}  // namespace

ClassLookupTable parse_lookup(std::istream& in) {
  auto records = parse_csv(in);
  std::vector<LookupRow> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.size() != 3) {
      fail(ErrorCode::kParse, "lookup line " + std::to_string(i + 1) + ": expected 3 columns, found " +
                                  std::to_string(rec.size()));
    }
    if (i == 0 && trimmed(rec[0]) == "image_label") continue;
    LookupRow row{trimmed(rec[0]), optional_label(rec[1]), optional_label(rec[2])};
    if (row.image_label.empty() || row.image_label == "--") {
      fail(ErrorCode::kParse, "lookup line " + std::to_string(i + 1) + ": missing image label");
    }
    rows.push_back(std::move(row));
  }
  return ClassLookupTable(std::move(rows));
}

ClassLookupTable load_lookup(const std::string& path) {
  std::istringstream in(read_text_file(path));
  return parse_lookup(in);
}

std::vector<PairingCandidate> match_pairs(std::span<const LabeledItem> images, std::span<const LabeledItem> audios,
                                          const ClassLookupTable& table, const SimilarityProvider& score) {
  std::vector<PairingCandidate> out;
  for (const auto& img : images) {
    const LookupRow* row = table.find(img.label);
    if (!row || !row->usable()) continue;
    for (const auto& aud : audios) {
      if (!row->matches_audio(aud.label)) continue;
      double s = score ? score(img.id, aud.id) : 1.0;
      if (!(s >= 0.0 && s <= 1.0)) {
        fail(ErrorCode::kOutOfRange, "pair score for (" + img.id + ", " + aud.id + ") outside [0, 1]");
      }
      out.push_back({img.id, aud.id, img.label, s});
    }
  }
  std::sort(out.begin(), out.end(), [](const PairingCandidate& a, const PairingCandidate& b) {
    return std::tie(a.image_id, a.audio_id) < std::tie(b.image_id, b.audio_id);
  });
  return out;
}

double bridged_similarity(std::span<const double> clip_scores, std::span<const double> clap_scores) {
  if (clip_scores.size() != clap_scores.size()) {
    fail(ErrorCode::kDimensionMismatch, "bridged_similarity: score vectors differ in length");
  }
  if (clip_scores.empty()) fail(ErrorCode::kInvalidArgument, "bridged_similarity: empty score vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < clip_scores.size(); ++i) {
    double a = clip_scores[i], b = clap_scores[i];
    if (!(a >= 0.0 && a <= 1.0) || !(b >= 0.0 && b <= 1.0)) {
      fail(ErrorCode::kOutOfRange, "bridged_similarity: scores must lie in [0, 1]");
    }
    s += a * b;
  }
  return s / static_cast<double>(clip_scores.size());
}

TopKResult top_k(std::span<const ScoredId> scores, std::size_t k) {
  if (k < 1) fail(ErrorCode::kInvalidArgument, "top_k: k must be at least 1");
  std::vector<ScoredId> sorted(scores.begin(), scores.end());
  for (const auto& s : sorted) {
    if (!std::isfinite(s.score)) fail(ErrorCode::kNonFinite, "top_k: score for '" + s.id + "' is not finite");
  }
  std::sort(sorted.begin(), sorted.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  TopKResult r;
  r.short_list = sorted.size() < k;
  for (std::size_t i = 0; i < std::min(k, sorted.size()); ++i) r.ids.push_back(sorted[i].id);
  return r;
}

Tensor pad_or_trim_audio(const Tensor& tokens, std::size_t target_tokens, std::size_t onset) {
  require_matrix(tokens, "pad_or_trim_audio");
  const std::size_t s = tokens.rows(), d = tokens.cols();
  if (target_tokens < 1) fail(ErrorCode::kInvalidArgument, "pad_or_trim_audio: target must be at least 1");
  if (onset >= s) fail(ErrorCode::kInvalidArgument, "pad_or_trim_audio: onset beyond the last token");
  const std::size_t stop = std::min(onset + target_tokens, s);
  std::vector<double> out(target_tokens * d, 0.0);
  std::copy(tokens.data().begin() + static_cast<std::ptrdiff_t>(onset * d),
            tokens.data().begin() + static_cast<std::ptrdiff_t>(stop * d), out.begin());
  return Tensor({target_tokens, d}, std::move(out));
}

// ---------------------------------------------------------------------------

void SceneSpec::validate() const {
  if (grid_height < 1 || grid_width < 1) fail(ErrorCode::kInvalidArgument, "scene grid must be non-empty");
  if (num_classes < 3) fail(ErrorCode::kInvalidArgument, "scenes need at least 3 classes");
  if (num_classes > scene_class_names().size()) fail(ErrorCode::kInvalidArgument, "too many scene classes");
  if (feature_dim < num_classes + 2) {
    fail(ErrorCode::kInvalidArgument, "feature_dim must hold the class directions plus two background directions");
  }
  if (audio_tokens < 1 || audio_tokens > static_cast<std::size_t>(kMaxAudioSeconds)) {
    fail(ErrorCode::kInvalidArgument, "audio_tokens must be in [1, 30]");
  }
  if (!(min_box_side > 0.0 && min_box_side <= max_box_side && max_box_side <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "box side range must satisfy 0 < min <= max <= 1");
  }
  if (min_segment < 1 || min_segment > max_segment || max_segment > audio_tokens) {
    fail(ErrorCode::kInvalidArgument, "segment range must satisfy 1 <= min <= max <= audio_tokens");
  }
  if (!(noise_std >= 0.0) || !(nuisance_std >= 0.0) || !(background >= 0.0) || !(signal > 0.0) ||
      !(tail >= 0.0 && tail < 1.0) || !(tail_decay > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "invalid scene amplitudes");
  }
}

const std::vector<std::string>& scene_class_names() {
  static const std::vector<std::string> names = {"dog",   "cat",   "violin", "guitar", "drum",  "car",
                                                 "bird",  "piano", "horse",  "train",  "bell",  "flute",
                                                 "cello", "siren", "frog",   "clock"};
  return names;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// std::mt19937_64 is fully specified; the adaptors below avoid the
// implementation-defined standard distributions so datasets are identical
// across standard libraries.
class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
  double normal() {
    if (spare_) {
      double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

BoundingBox sample_box(SceneRng& rng, const SceneSpec& spec) {
  auto hundredths = [](double v) { return static_cast<std::size_t>(std::lround(v * 100.0)); };
  std::size_t lo = hundredths(spec.min_box_side), hi = hundredths(spec.max_box_side);
  std::size_t w = rng.between(lo, hi), h = rng.between(lo, hi);
  std::size_t x = rng.between(0, 100 - w), y = rng.between(0, 100 - h);
  return make_box(x / 100.0, y / 100.0, (x + w) / 100.0, (y + h) / 100.0);
}

// Box coverage of each cell plus a decaying tail around the box.
std::vector<double> blob_amplitude(const BoundingBox& box, const SceneSpec& spec) {
  const double ch = 1.0 / static_cast<double>(spec.grid_height), cw = 1.0 / static_cast<double>(spec.grid_width);
  std::vector<double> amp(spec.patches());
  for (std::size_t i = 0; i < spec.grid_height; ++i) {
    for (std::size_t j = 0; j < spec.grid_width; ++j) {
      double x0 = j * cw, x1 = x0 + cw, y0 = i * ch, y1 = y0 + ch;
      double ox = std::max(0.0, std::min(x1, box.x_right) - std::max(x0, box.x_left));
      double oy = std::max(0.0, std::min(y1, box.y_bottom) - std::max(y0, box.y_top));
      double cover = (ox * oy) / (cw * ch);
      double cx = x0 + cw / 2.0, cy = y0 + ch / 2.0;
      double dx = std::max({box.x_left - cx, 0.0, cx - box.x_right});
      double dy = std::max({box.y_top - cy, 0.0, cy - box.y_bottom});
      double dist = std::hypot(dx, dy);
      amp[i * spec.grid_width + j] = cover + spec.tail * (1.0 - cover) * std::exp(-dist / spec.tail_decay);
    }
  }
  return amp;
}

std::size_t other_class(SceneRng& rng, std::size_t classes, std::initializer_list<std::size_t> exclude) {
  std::vector<std::size_t> pool;
  for (std::size_t c = 0; c < classes; ++c) {
    if (std::find(exclude.begin(), exclude.end(), c) == exclude.end()) pool.push_back(c);
  }
  return pool[rng.below(pool.size())];
}

}  // namespace

bool interleaved_positive(std::size_t index, double positive_fraction) {
  auto count_before = [&](std::size_t i) { return std::floor(static_cast<double>(i) * positive_fraction + 0.5); };
  return count_before(index + 1) - count_before(index) >= 1.0;
}

SyntheticScene generate_scene(std::uint64_t seed, std::size_t index, bool positive, const SceneSpec& spec) {
  spec.validate();
  SceneRng rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index) + 0x5eedULL)));
  const std::size_t k = spec.num_classes, f = spec.feature_dim;

  SyntheticScene scene;
  char id[32];
  std::snprintf(id, sizeof id, "scene-%06zu", index);
  scene.id = id;
  scene.is_positive = positive;
  scene.image_class = rng.below(k);
  const std::size_t distractor_class = other_class(rng, k, {scene.image_class});
  scene.audio_class = positive ? scene.image_class : other_class(rng, k, {scene.image_class, distractor_class});

  scene.gt_box = sample_box(rng, spec);
  BoundingBox distractor = sample_box(rng, spec);
  for (int attempt = 0; attempt < 50 && box_iou(distractor, scene.gt_box) > 0.05; ++attempt) {
    distractor = sample_box(rng, spec);
  }
  std::vector<double> amp = blob_amplitude(scene.gt_box, spec);
  std::vector<double> amp_distractor = blob_amplitude(distractor, spec);

  std::vector<double> image(spec.patches() * f);
  for (std::size_t p = 0; p < spec.patches(); ++p) {
    double* row = &image[p * f];
    for (std::size_t d = 0; d < f; ++d) row[d] = spec.noise_std * rng.normal();
    for (std::size_t d = k + 2; d < f; ++d) row[d] += spec.nuisance_std * rng.normal();
    row[scene.image_class] += spec.signal * amp[p];
    row[distractor_class] += spec.signal * amp_distractor[p];
    row[k] += spec.background * std::max(0.0, 1.0 - amp[p] - amp_distractor[p]);
  }
  scene.image = Tensor({spec.patches(), f}, std::move(image));
  scene.blob = Tensor({spec.grid_height, spec.grid_width}, std::move(amp));

  const std::size_t length = rng.between(spec.min_segment, spec.max_segment);
  const std::size_t start = rng.between(0, spec.audio_tokens - length);
  scene.gt_segment = make_segment(static_cast<double>(start), static_cast<double>(start + length));
  std::vector<double> audio(spec.audio_tokens * f);
  for (std::size_t t = 0; t < spec.audio_tokens; ++t) {
    double* row = &audio[t * f];
    for (std::size_t d = 0; d < f; ++d) row[d] = spec.noise_std * rng.normal();
    for (std::size_t d = k + 2; d < f; ++d) row[d] += spec.nuisance_std * rng.normal();
    if (t >= start && t < start + length) {
      row[scene.audio_class] += spec.signal;
    } else {
      row[k + 1] += spec.background;
    }
  }
  scene.audio = Tensor({spec.audio_tokens, f}, std::move(audio));
  return scene;
}

std::vector<SyntheticScene> generate_dataset(std::uint64_t seed, std::size_t n, double positive_fraction,
                                             const SceneSpec& spec, std::size_t first_index) {
  if (n < 1) fail(ErrorCode::kInvalidArgument, "generate_dataset: n must be at least 1");
  if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "generate_dataset: positive_fraction must lie in [0, 1]");
  }
  spec.validate();
  std::vector<SyntheticScene> scenes;
  scenes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    scenes.push_back(generate_scene(seed, first_index + i, interleaved_positive(i, positive_fraction), spec));
  }
  return scenes;
}

// ---------------------------------------------------------------------------
// Dataset files.

namespace {

using nlohmann::json;

json spec_to_json(const SceneSpec& s) {
  return json{{"grid_height", s.grid_height},   {"grid_width", s.grid_width},     {"feature_dim", s.feature_dim},
              {"audio_tokens", s.audio_tokens}, {"num_classes", s.num_classes},   {"signal", s.signal},
              {"tail", s.tail},                 {"tail_decay", s.tail_decay},     {"noise_std", s.noise_std},
              {"nuisance_std", s.nuisance_std}, {"background", s.background},     {"min_box_side", s.min_box_side},
              {"max_box_side", s.max_box_side}, {"min_segment", s.min_segment},   {"max_segment", s.max_segment}};
}

// Missing keys keep their defaults; unknown keys are rejected.
SceneSpec spec_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::kParse, "scene spec must be a JSON object");
  SceneSpec s;
  const json defaults = spec_to_json(s);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) fail(ErrorCode::kUnknownKey, "scene spec: unknown key '" + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  get("grid_height", s.grid_height);
  get("grid_width", s.grid_width);
  get("feature_dim", s.feature_dim);
  get("audio_tokens", s.audio_tokens);
  get("num_classes", s.num_classes);
  get("signal", s.signal);
  get("tail", s.tail);
  get("tail_decay", s.tail_decay);
  get("noise_std", s.noise_std);
  get("nuisance_std", s.nuisance_std);
  get("background", s.background);
  get("min_box_side", s.min_box_side);
  get("max_box_side", s.max_box_side);
  get("min_segment", s.min_segment);
  get("max_segment", s.max_segment);
  s.validate();
  return s;
}

Tensor tensor_from_json(const json& j, Shape shape) {
  std::vector<double> v = j.get<std::vector<double>>();
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

std::string scene_spec_to_json(const SceneSpec& spec) { return spec_to_json(spec).dump(); }

SceneSpec scene_spec_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("scene spec: ") + e.what());
  }
  try {
    return spec_from_json(j);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("scene spec: ") + e.what());
  }
}

void write_dataset(std::ostream& out, const std::vector<SyntheticScene>& scenes, const SceneSpec& spec,
                   std::uint64_t seed) {
  json header{{"format", "avalign-scenes"}, {"version", 1},           {"seed", seed},
              {"count", scenes.size()},      {"spec", spec_to_json(spec)}};
  out << header.dump() << '\n';
  for (const auto& s : scenes) {
    json j{{"id", s.id},
           {"image_class", s.image_class},
           {"audio_class", s.audio_class},
           {"is_positive", s.is_positive},
           {"box", {s.gt_box.x_left, s.gt_box.y_top, s.gt_box.x_right, s.gt_box.y_bottom}},
           {"segment", {s.gt_segment.t_start, s.gt_segment.t_end}},
           {"image", s.image.data()},
           {"audio", s.audio.data()},
           {"blob", s.blob.data()}};
    out << j.dump() << '\n';
  }
}

LoadedDataset read_dataset(std::istream& in) {
  LoadedDataset ds;
  std::string line;
  std::size_t lineno = 0;
  std::size_t expected = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j = json::parse(line);
      if (lineno == 1) {
        if (j.value("format", "") != "avalign-scenes" || j.value("version", 0) != 1) {
          fail(ErrorCode::kParse, "dataset: unsupported header");
        }
        ds.spec = spec_from_json(j.at("spec"));
        ds.seed = j.at("seed").get<std::uint64_t>();
        expected = j.at("count").get<std::size_t>();
        continue;
      }
      const SceneSpec& sp = ds.spec;
      SyntheticScene s;
      s.id = j.at("id").get<std::string>();
      s.image_class = j.at("image_class").get<std::size_t>();
      s.audio_class = j.at("audio_class").get<std::size_t>();
      s.is_positive = j.at("is_positive").get<bool>();
      auto b = j.at("box").get<std::vector<double>>();
      auto t = j.at("segment").get<std::vector<double>>();
      if (b.size() != 4 || t.size() != 2) fail(ErrorCode::kParse, "dataset: bad box or segment arity");
      s.gt_box = make_box(b[0], b[1], b[2], b[3]);
      s.gt_segment = make_segment(t[0], t[1]);
      s.image = tensor_from_json(j.at("image"), {sp.patches(), sp.feature_dim});
      s.audio = tensor_from_json(j.at("audio"), {sp.audio_tokens, sp.feature_dim});
      s.blob = tensor_from_json(j.at("blob"), {sp.grid_height, sp.grid_width});
      ds.scenes.push_back(std::move(s));
    }
  } catch (const Error& e) {
    fail(e.code(), "dataset line " + std::to_string(lineno) + ": " + e.what());
  } catch (const std::exception& e) {
    fail(ErrorCode::kParse, "dataset line " + std::to_string(lineno) + ": " + e.what());
  }
  if (lineno == 0) fail(ErrorCode::kParse, "dataset: empty file");
  if (ds.scenes.size() != expected) fail(ErrorCode::kParse, "dataset: scene count differs from header");
  return ds;
}

}  // namespace avalign
