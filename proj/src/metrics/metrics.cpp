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

#include "metrics/metrics.hpp"

#include <algorithm>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "error.hpp"

namespace avalign {

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  double iw = std::min(a.x_right, b.x_right) - std::max(a.x_left, b.x_left);
  double ih = std::min(a.y_bottom, b.y_bottom) - std::max(a.y_top, b.y_top);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  double inter = iw * ih;
  double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double temporal_iou(const TimeSegment& a, const TimeSegment& b) {
  double inter = std::min(a.t_end, b.t_end) - std::max(a.t_start, b.t_start);
  if (inter <= 0.0) return 0.0;
  double uni = a.length() + b.length() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

std::string_view sample_kind_name(SampleKind k) noexcept {
  switch (k) {
    case SampleKind::kBox: return "box";
    case SampleKind::kSegment: return "segment";
    case SampleKind::kBool: return "bool";
  }
  return "unknown";
}

EvalSample make_sample(std::string id, Prediction prediction, GroundTruth ground_truth) {
  if (!std::holds_alternative<ParseFailure>(prediction) && prediction.index() != ground_truth.index()) {
    fail(ErrorCode::kInvalidArgument, "sample '" + id + "': prediction and ground truth kinds differ");
  }
  return EvalSample{std::move(id), std::move(prediction), std::move(ground_truth)};
}

namespace {

void require_kind(std::span<const EvalSample> samples, SampleKind kind, const char* what) {
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, std::string(what) + ": empty sample set");
  for (const auto& s : samples) {
    if (s.kind() != kind) {
      fail(ErrorCode::kInvalidArgument, std::string(what) + ": sample '" + s.id + "' is a " +
                                            std::string(sample_kind_name(s.kind())) + " sample");
    }
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double ciou_at(std::span<const EvalSample> samples, double tau) {
  require_kind(samples, SampleKind::kBox, "ciou_at");
  std::size_t hits = 0;
  for (const auto& s : samples) {
    if (s.parse_failed()) continue;
    if (box_iou(std::get<BoundingBox>(s.prediction), std::get<BoundingBox>(s.ground_truth)) >= tau) ++hits;
  }
  return ratio(hits, samples.size());
}

std::vector<double> auc_thresholds() {
  std::vector<double> t;
  for (int k = 1; k <= 19; ++k) t.push_back(k * 5 / 100.0);
  return t;
}

double auc(std::span<const EvalSample> samples) {
  require_kind(samples, SampleKind::kBox, "auc");
  auto grid = auc_thresholds();
  double total = 0.0;
  for (double tau : grid) total += ciou_at(samples, tau);
  return total / static_cast<double>(grid.size());
}

SegmentCounts segment_counts(std::span<const EvalSample> samples, double tau) {
  require_kind(samples, SampleKind::kSegment, "segment_f1");
  SegmentCounts c;
  for (const auto& s : samples) {
    if (s.parse_failed()) {
      ++c.fn;
    } else if (temporal_iou(std::get<TimeSegment>(s.prediction), std::get<TimeSegment>(s.ground_truth)) >= tau) {
      ++c.tp;
    } else {
      ++c.fp;
      ++c.fn;
    }
  }
  return c;
}

double segment_f1(std::span<const EvalSample> samples, double tau) {
  SegmentCounts c = segment_counts(samples, tau);
  return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
}

BinaryScores binary_prf(std::span<const EvalSample> samples) {
  require_kind(samples, SampleKind::kBool, "binary_prf");
  BinaryScores r;
  for (const auto& s : samples) {
    bool truth = std::get<bool>(s.ground_truth);
    if (s.parse_failed()) {
      ++(truth ? r.fn : r.fp);
      continue;
    }
    bool pred = std::get<bool>(s.prediction);
    if (pred && truth) ++r.tp;
    else if (pred) ++r.fp;
    else if (truth) ++r.fn;
    else ++r.tn;
  }
  r.precision = ratio(r.tp, r.tp + r.fp);
  r.recall = ratio(r.tp, r.tp + r.fn);
  r.f1 = ratio(2 * r.tp, 2 * r.tp + r.fp + r.fn);
  r.accuracy = ratio(r.tp + r.tn, samples.size());
  return r;
}

namespace {

// IoU (or tIoU) of every sample, -1 for parse failures; scored by index so
// the result does not depend on the shard count.
std::vector<double> overlap_scores(std::span<const EvalSample> samples, std::size_t jobs) {
  std::vector<double> scores(samples.size(), -1.0);
  auto score_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const EvalSample& s = samples[i];
      if (s.parse_failed()) continue;
      if (s.kind() == SampleKind::kBox) {
        scores[i] = box_iou(std::get<BoundingBox>(s.prediction), std::get<BoundingBox>(s.ground_truth));
      } else {
        scores[i] = temporal_iou(std::get<TimeSegment>(s.prediction), std::get<TimeSegment>(s.ground_truth));
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, samples.size()));
  if (jobs == 1) {
    score_range(0, samples.size());
    return scores;
  }
  std::vector<std::thread> workers;
  const std::size_t chunk = (samples.size() + jobs - 1) / jobs;
  for (std::size_t lo = 0; lo < samples.size(); lo += chunk) {
    workers.emplace_back(score_range, lo, std::min(lo + chunk, samples.size()));
  }
  for (auto& w : workers) w.join();
  return scores;
}

}  // namespace

MetricReport evaluate(std::span<const EvalSample> samples, std::size_t jobs) {
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "evaluate: empty sample set");
  MetricReport report;
  report.kind = samples.front().kind();
  report.samples = samples.size();
  for (const auto& s : samples) {
    if (s.kind() != report.kind) fail(ErrorCode::kInvalidArgument, "evaluate: samples of mixed tasks");
    if (!s.parse_failed()) continue;
    ++report.parse_failures;
    ++report.failure_modes[std::string(parse_status_name(std::get<ParseFailure>(s.prediction).status))];
  }
  const double n = static_cast<double>(samples.size());
  switch (report.kind) {
    case SampleKind::kBox: {
      std::vector<double> iou = overlap_scores(samples, jobs);
      auto success = [&](double tau) {
        return ratio(static_cast<std::size_t>(std::count_if(iou.begin(), iou.end(), [&](double x) { return x >= tau; })),
                     samples.size());
      };
      report.metrics["ciou@0.5"] = success(0.5);
      auto grid = auc_thresholds();
      double total = 0.0;
      for (double tau : grid) total += success(tau);
      report.metrics["auc"] = total / static_cast<double>(grid.size());
      double mean = 0.0;
      for (double x : iou) {
        if (x >= 0.0) mean += x;
      }
      report.metrics["mean_iou"] = mean / n;
      break;
    }
    case SampleKind::kSegment: {
      std::vector<double> tiou = overlap_scores(samples, jobs);
      SegmentCounts c;
      for (double x : tiou) {
        if (x < 0.0) {
          ++c.fn;
        } else if (x >= 0.5) {
          ++c.tp;
        } else {
          ++c.fp;
          ++c.fn;
        }
      }
      report.metrics["f1@0.5"] = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
      report.metrics["tp"] = static_cast<double>(c.tp);
      report.metrics["fp"] = static_cast<double>(c.fp);
      report.metrics["fn"] = static_cast<double>(c.fn);
      break;
    }
    case SampleKind::kBool: {
      BinaryScores b = binary_prf(samples);
      report.metrics["precision"] = b.precision;
      report.metrics["recall"] = b.recall;
      report.metrics["f1"] = b.f1;
      report.metrics["accuracy"] = b.accuracy;
      report.metrics["tp"] = static_cast<double>(b.tp);
      report.metrics["fp"] = static_cast<double>(b.fp);
      report.metrics["fn"] = static_cast<double>(b.fn);
      report.metrics["tn"] = static_cast<double>(b.tn);
      break;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSONL reader.

namespace {

using nlohmann::json;

[[noreturn]] void bad_record(std::size_t line, const std::string& msg) {
  fail(ErrorCode::kParse, "line " + std::to_string(line) + ": " + msg);
}

std::optional<std::vector<double>> number_array(const json& j, std::size_t arity) {
  if (!j.is_array() || j.size() != arity) return std::nullopt;
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) return std::nullopt;
    v.push_back(x.get<double>());
  }
  return v;
}

// Decodes a JSON value of the given kind. Strings go through the codec.
Prediction decode(const json& j, SampleKind kind) {
  if (j.is_null()) return ParseFailure{ParseStatus::kNoMatch, "null prediction"};
  switch (kind) {
    case SampleKind::kBox: {
      if (j.is_string()) {
        auto r = parse_box(j.get<std::string>());
        if (!r.ok()) return ParseFailure{r.status, r.detail};
        return r.value->box;
      }
      auto v = number_array(j, 4);
      if (!v) return ParseFailure{ParseStatus::kMalformed, "box must be a string or 4 numbers"};
      BoundingBox b{(*v)[0], (*v)[1], (*v)[2], (*v)[3]};
      if (!b.is_valid()) return ParseFailure{ParseStatus::kOutOfRange, "box violates invariants"};
      return b;
    }
    case SampleKind::kSegment: {
      if (j.is_string()) {
        auto r = parse_time(j.get<std::string>());
        if (!r.ok()) return ParseFailure{r.status, r.detail};
        return *r.value;
      }
      auto v = number_array(j, 2);
      if (!v) return ParseFailure{ParseStatus::kMalformed, "segment must be a string or 2 numbers"};
      TimeSegment s{(*v)[0], (*v)[1]};
      if (!s.is_valid()) return ParseFailure{ParseStatus::kOutOfRange, "segment violates invariants"};
      return s;
    }
    case SampleKind::kBool: {
      if (j.is_boolean()) return j.get<bool>();
      if (j.is_string()) {
        auto r = parse_verdict(j.get<std::string>());
        if (!r.ok()) return ParseFailure{r.status, r.detail};
        return *r.value;
      }
      return ParseFailure{ParseStatus::kMalformed, "verdict must be a boolean or a string"};
    }
  }
  return ParseFailure{ParseStatus::kMalformed, "unknown kind"};
}

}  // namespace

std::vector<EvalSample> read_eval_jsonl(std::istream& in) {
  std::vector<EvalSample> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) bad_record(line, "not a JSON object");
    if (!j.contains("id") || !j.contains("task") || !j.contains("pred") || !j.contains("gt")) {
      bad_record(line, "record needs id, task, pred and gt");
    }
    if (!j["task"].is_string()) bad_record(line, "task must be a string");
    std::string task = j["task"].get<std::string>();
    SampleKind kind;
    if (task == "box") kind = SampleKind::kBox;
    else if (task == "segment") kind = SampleKind::kSegment;
    else if (task == "bool") kind = SampleKind::kBool;
    else bad_record(line, "unknown task '" + task + "'");
    std::string id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    Prediction gt = decode(j["gt"], kind);
    if (std::holds_alternative<ParseFailure>(gt)) {
      bad_record(line, "invalid ground truth: " + std::get<ParseFailure>(gt).detail);
    }
    GroundTruth truth = std::visit(
        [](const auto& v) -> GroundTruth {
          if constexpr (std::is_same_v<std::decay_t<decltype(v)>, ParseFailure>) {
            return false;
          } else {
            return v;
          }
        },
        gt);
    out.push_back(make_sample(std::move(id), decode(j["pred"], kind), std::move(truth)));
  }
  return out;
}

}  // namespace avalign
