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

// Grounding metrics: box IoU with success-rate summaries, temporal IoU with
// segment-level F1, and binary verification scores.

#include <cstddef>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "codec/codec.hpp"

namespace avalign {

double box_iou(const BoundingBox& a, const BoundingBox& b);
double temporal_iou(const TimeSegment& a, const TimeSegment& b);

/// A prediction that could not be decoded; scored as a miss.
struct ParseFailure {
  ParseStatus status = ParseStatus::kMalformed;
  std::string detail;
};

enum class SampleKind { kBox, kSegment, kBool };
std::string_view sample_kind_name(SampleKind k) noexcept;

using Prediction = std::variant<BoundingBox, TimeSegment, bool, ParseFailure>;
using GroundTruth = std::variant<BoundingBox, TimeSegment, bool>;

struct EvalSample {
  std::string id;
  Prediction prediction;
  GroundTruth ground_truth;

  SampleKind kind() const noexcept { return static_cast<SampleKind>(ground_truth.index()); }
  bool parse_failed() const noexcept { return std::holds_alternative<ParseFailure>(prediction); }
};

/// Throws kInvalidArgument when the prediction kind disagrees with the ground truth.
EvalSample make_sample(std::string id, Prediction prediction, GroundTruth ground_truth);

/// Fraction of box samples with IoU >= tau; parse failures count as IoU 0.
double ciou_at(std::span<const EvalSample> samples, double tau = 0.5);
/// tau_k = k / 20 for k = 1..19.
std::vector<double> auc_thresholds();
/// Mean of ciou_at over auc_thresholds().
double auc(std::span<const EvalSample> samples);

struct SegmentCounts {
  std::size_t tp = 0, fp = 0, fn = 0;
};
/// A valid prediction with tIoU >= tau is a true positive; otherwise it is a
/// false positive and its ground truth a false negative. Parse failures are
/// false negatives only.
SegmentCounts segment_counts(std::span<const EvalSample> samples, double tau = 0.5);
/// 2TP / (2TP + FP + FN).
double segment_f1(std::span<const EvalSample> samples, double tau = 0.5);

struct BinaryScores {
  double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};
/// True is the positive class. An undecodable answer is wrong: a false
/// negative when the truth is True, a false positive when it is False.
/// Ratios with an empty denominator are 0.
BinaryScores binary_prf(std::span<const EvalSample> samples);

struct MetricReport {
  SampleKind kind = SampleKind::kBox;
  std::map<std::string, double> metrics;
  std::size_t samples = 0;
  std::size_t parse_failures = 0;
  std::map<std::string, std::size_t> failure_modes;  // parse status name -> count
};

/// All samples must share one kind; kInvalidArgument on an empty set or mixed
/// kinds. Overlaps are scored on up to `jobs` threads; the report does not
/// depend on the thread count.
MetricReport evaluate(std::span<const EvalSample> samples, std::size_t jobs = 1);

/// Reads {"id", "task", "pred", "gt"} records, one JSON object per line.
/// String predictions go through the codec parsers; blank lines are skipped.
/// Malformed records or ground truths throw kParse with the line number.
std::vector<EvalSample> read_eval_jsonl(std::istream& in);

}  // namespace avalign
