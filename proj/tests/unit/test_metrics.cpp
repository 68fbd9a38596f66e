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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "metrics/metrics.hpp"
#include "test_util.hpp"

namespace avalign {
namespace {

using testing::error_code_of;

BoundingBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    if (std::abs(a - b) < 0.01 || std::abs(c - d) < 0.01) continue;
    return make_box(std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d));
  }
}

// Counts pixel centres of an n x n raster covered by each box. Exact when
// every box edge lies on the 1/n lattice.
double raster_iou(const BoundingBox& a, const BoundingBox& b, int n = 1000) {
  long inter = 0, uni = 0;
  for (int i = 0; i < n; ++i) {
    double y = (i + 0.5) / n;
    for (int j = 0; j < n; ++j) {
      double x = (j + 0.5) / n;
      bool in_a = x >= a.x_left && x < a.x_right && y >= a.y_top && y < a.y_bottom;
      bool in_b = x >= b.x_left && x < b.x_right && y >= b.y_top && y < b.y_bottom;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

// Area-weighted raster: each pixel contributes the fraction of it a box covers.
double coverage_raster_iou(const BoundingBox& a, const BoundingBox& b, int n = 1000) {
  auto overlap = [](double lo, double hi, double p0, double p1) { return std::max(0.0, std::min(hi, p1) - std::max(lo, p0)); };
  double inter = 0.0, area_a = 0.0, area_b = 0.0;
  for (int i = 0; i < n; ++i) {
    double y0 = static_cast<double>(i) / n, y1 = static_cast<double>(i + 1) / n;
    double ya = overlap(a.y_top, a.y_bottom, y0, y1), yb = overlap(b.y_top, b.y_bottom, y0, y1);
    if (ya == 0.0 && yb == 0.0) continue;
    for (int j = 0; j < n; ++j) {
      double x0 = static_cast<double>(j) / n, x1 = static_cast<double>(j + 1) / n;
      double ca = ya * overlap(a.x_left, a.x_right, x0, x1), cb = yb * overlap(b.x_left, b.x_right, x0, x1);
      area_a += ca;
      area_b += cb;
      double iy = overlap(std::max(a.y_top, b.y_top), std::min(a.y_bottom, b.y_bottom), y0, y1);
      inter += iy * overlap(std::max(a.x_left, b.x_left), std::min(a.x_right, b.x_right), x0, x1);
    }
  }
  double uni = area_a + area_b - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

BoundingBox lattice_box(std::mt19937_64& rng, int n = 1000) {
  std::uniform_int_distribution<int> d(0, n);
  int x0 = d(rng), x1 = d(rng), y0 = d(rng), y1 = d(rng);
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  if (x0 == x1) x1 < n ? ++x1 : --x0;
  if (y0 == y1) y1 < n ? ++y1 : --y0;
  return make_box(static_cast<double>(x0) / n, static_cast<double>(y0) / n, static_cast<double>(x1) / n,
                  static_cast<double>(y1) / n);
}

EvalSample box_sample(BoundingBox pred, BoundingBox gt) { return make_sample("s", pred, gt); }

// Boxes with a prescribed IoU against the unit-height strip [0, 0.5] x [0, 1].
EvalSample sample_with_iou(double iou) {
  BoundingBox gt = make_box(0.0, 0.0, 0.5, 1.0);
  return box_sample(make_box(0.0, 0.0, 0.5 * iou, 1.0), gt);
}

TEST(BoxIou, Examples) {
  BoundingBox a = make_box(0, 0, 0.5, 0.5), b = make_box(0.25, 0.25, 0.75, 0.75);
  EXPECT_EQ(box_iou(a, a), 1.0);
  EXPECT_EQ(box_iou(a, make_box(0.6, 0.6, 0.9, 0.9)), 0.0);
  EXPECT_NEAR(box_iou(a, b), 1.0 / 7.0, 1e-9);
  EXPECT_NEAR(raster_iou(a, b), 1.0 / 7.0, 1e-3);
}

TEST(BoxIou, MatchesRasterOracleOnLatticeBoxes) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    BoundingBox a = lattice_box(rng), b = lattice_box(rng);
    EXPECT_NEAR(box_iou(a, b), raster_iou(a, b), 1e-3) << trial;
  }
}

TEST(BoxIou, MatchesCoverageRasterOnArbitraryBoxes) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    BoundingBox a = random_box(rng), b = random_box(rng);
    EXPECT_NEAR(box_iou(a, b), coverage_raster_iou(a, b), 1e-3) << trial;
  }
}

TEST(BoxIou, SymmetryBoundsAndTranslation) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    BoundingBox a = random_box(rng), b = random_box(rng);
    double iou = box_iou(a, b);
    EXPECT_EQ(iou, box_iou(b, a));
    EXPECT_GE(iou, 0.0);
    EXPECT_LE(iou, 1.0);
    if (!(a == b)) {
      EXPECT_LT(iou, 1.0);
    }
    double lo_x = std::min(a.x_left, b.x_left), hi_x = std::max(a.x_right, b.x_right);
    double lo_y = std::min(a.y_top, b.y_top), hi_y = std::max(a.y_bottom, b.y_bottom);
    double dx = -lo_x + u(rng) * (1.0 - hi_x + lo_x), dy = -lo_y + u(rng) * (1.0 - hi_y + lo_y);
    auto shift = [&](const BoundingBox& x) {
      return BoundingBox{x.x_left + dx, x.y_top + dy, x.x_right + dx, x.y_bottom + dy};
    };
    EXPECT_NEAR(box_iou(shift(a), shift(b)), iou, 1e-12);
  }
}

TEST(TemporalIou, Examples) {
  EXPECT_EQ(temporal_iou(make_segment(3, 9), make_segment(3, 9)), 1.0);
  EXPECT_NEAR(temporal_iou(make_segment(0, 10), make_segment(5, 15)), 1.0 / 3.0, 1e-9);
  EXPECT_EQ(temporal_iou(make_segment(0, 5), make_segment(6, 9)), 0.0);
  EXPECT_EQ(temporal_iou(make_segment(0, 10), make_segment(5, 15)), temporal_iou(make_segment(5, 15), make_segment(0, 10)));
}

TEST(Ciou, Examples) {
  std::vector<EvalSample> same{box_sample(make_box(0, 0, 1, 1), make_box(0, 0, 1, 1))};
  EXPECT_EQ(ciou_at(same), 1.0);
  std::vector<EvalSample> disjoint{box_sample(make_box(0, 0, 0.2, 0.2), make_box(0.5, 0.5, 1, 1))};
  EXPECT_EQ(ciou_at(disjoint), 0.0);
  std::vector<EvalSample> mixed{sample_with_iou(0.6), sample_with_iou(0.4)};
  EXPECT_EQ(ciou_at(mixed, 0.5), 0.5);
  EXPECT_EQ(error_code_of([] { ciou_at(std::vector<EvalSample>{}); }), ErrorCode::kInvalidArgument);
}

TEST(Auc, Examples) {
  std::vector<EvalSample> perfect{box_sample(make_box(0.1, 0.1, 0.3, 0.3), make_box(0.1, 0.1, 0.3, 0.3))};
  EXPECT_EQ(auc(perfect), 1.0);
  std::vector<EvalSample> disjoint{box_sample(make_box(0, 0, 0.2, 0.2), make_box(0.5, 0.5, 1, 1))};
  EXPECT_EQ(auc(disjoint), 0.0);
  std::vector<EvalSample> single{sample_with_iou(0.6)};
  EXPECT_NEAR(box_iou(std::get<BoundingBox>(single[0].prediction), std::get<BoundingBox>(single[0].ground_truth)), 0.6,
              1e-15);
  EXPECT_NEAR(auc(single), 12.0 / 19.0, 1e-12);
}

TEST(Auc, GridAndConsistency) {
  auto grid = auc_thresholds();
  ASSERT_EQ(grid.size(), 19u);
  for (std::size_t k = 0; k < 19; ++k) EXPECT_NEAR(grid[k], (k + 1) / 20.0, 1e-15);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<EvalSample> s;
    for (int i = 0; i < 30; ++i) s.push_back(box_sample(random_box(rng), random_box(rng)));
    s.push_back(make_sample("bad", ParseFailure{}, random_box(rng)));
    double mean = 0.0;
    for (double t : grid) mean += ciou_at(s, t);
    EXPECT_EQ(auc(s), mean / 19.0);
    double prev = 1.0;
    for (double t = 0.0; t <= 1.0; t += 0.01) {
      double c = ciou_at(s, t);
      EXPECT_LE(c, prev);
      prev = c;
    }
  }
}

TEST(SegmentF1, Examples) {
  auto seg = [](double a, double b, double c, double d) { return make_sample("s", make_segment(a, b), make_segment(c, d)); };
  std::vector<EvalSample> exact{seg(0, 5, 0, 5), seg(10, 20, 10, 20)};
  EXPECT_EQ(segment_f1(exact), 1.0);
  std::vector<EvalSample> third{seg(0, 10, 5, 15)};
  EXPECT_EQ(segment_f1(third), 0.0);
  std::vector<EvalSample> half{seg(0, 5, 0, 5), seg(6, 9, 6, 9), seg(0, 5, 20, 25), seg(0, 5, 20, 25)};
  EXPECT_DOUBLE_EQ(segment_f1(half), 0.5);
  std::vector<EvalSample> failure{make_sample("f", ParseFailure{}, make_segment(0, 5))};
  SegmentCounts c = segment_counts(failure);
  EXPECT_EQ(c.tp, 0u);
  EXPECT_EQ(c.fp, 0u);
  EXPECT_EQ(c.fn, 1u);
}

TEST(BinaryPrf, Examples) {
  auto b = [](bool p, bool g) { return make_sample("b", p, g); };
  std::vector<EvalSample> correct{b(true, true), b(false, false)};
  BinaryScores all = binary_prf(correct);
  EXPECT_EQ(all.precision, 1.0);
  EXPECT_EQ(all.recall, 1.0);
  EXPECT_EQ(all.f1, 1.0);
  EXPECT_EQ(all.accuracy, 1.0);

  std::vector<EvalSample> mixed{b(true, true), b(true, false), b(false, false), b(false, true)};
  BinaryScores m = binary_prf(mixed);
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.tn, 1u);
  EXPECT_EQ(m.precision, 0.5);
  EXPECT_EQ(m.recall, 0.5);
  EXPECT_EQ(m.f1, 0.5);
  EXPECT_EQ(m.accuracy, 0.5);

  std::vector<EvalSample> all_true{b(true, true), b(true, false), b(true, true), b(true, false)};
  BinaryScores t = binary_prf(all_true);
  EXPECT_EQ(t.precision, 0.5);
  EXPECT_EQ(t.recall, 1.0);

  std::vector<EvalSample> failed{make_sample("f", ParseFailure{}, true), make_sample("g", ParseFailure{}, false)};
  BinaryScores f = binary_prf(failed);
  EXPECT_EQ(f.fn, 1u);
  EXPECT_EQ(f.fp, 1u);
}

TEST(Samples, KindMismatchRejected) {
  EXPECT_EQ(error_code_of([] { make_sample("x", true, make_box(0, 0, 1, 1)); }), ErrorCode::kInvalidArgument);
}

TEST(Evaluate, ReportIndependentOfJobs) {
  std::mt19937_64 rng(4);
  std::vector<EvalSample> s;
  for (int i = 0; i < 1000; ++i) s.push_back(box_sample(random_box(rng), random_box(rng)));
  for (int i = 0; i < 10; ++i) s.push_back(make_sample("f", ParseFailure{ParseStatus::kNoMatch, ""}, random_box(rng)));
  MetricReport one = evaluate(s, 1);
  EXPECT_EQ(one.samples, 1010u);
  EXPECT_EQ(one.parse_failures, 10u);
  EXPECT_EQ(one.failure_modes.at("no_match"), 10u);
  EXPECT_EQ(one.metrics.at("ciou@0.5"), ciou_at(s));
  EXPECT_EQ(one.metrics.at("auc"), auc(s));
  for (std::size_t jobs : {2u, 3u, 8u}) {
    MetricReport r = evaluate(s, jobs);
    EXPECT_EQ(r.metrics, one.metrics);
    EXPECT_EQ(r.parse_failures, one.parse_failures);
  }
  for (const auto& [name, v] : one.metrics) {
    EXPECT_GE(v, 0.0) << name;
    EXPECT_LE(v, 1.0) << name;
  }
}

TEST(Evaluate, MixedKindsAndEmptyRejected) {
  std::vector<EvalSample> mixed{make_sample("a", true, true), box_sample(make_box(0, 0, 1, 1), make_box(0, 0, 1, 1))};
  EXPECT_EQ(error_code_of([&] { evaluate(mixed); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { evaluate(std::vector<EvalSample>{}); }), ErrorCode::kInvalidArgument);
}

TEST(EvalJsonl, ParsesRecords) {
  std::istringstream in(
      "{\"id\":\"a\",\"task\":\"box\",\"pred\":\"[cat,0.1,0.1,0.5,0.5]\",\"gt\":[0.1,0.1,0.5,0.5]}\n"
      "\n"
      "{\"id\":\"b\",\"task\":\"box\",\"pred\":\"garbage\",\"gt\":[0.1,0.1,0.5,0.5]}\n");
  auto s = read_eval_jsonl(in);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_FALSE(s[0].parse_failed());
  EXPECT_TRUE(s[1].parse_failed());

  std::istringstream bools("{\"id\":\"c\",\"task\":\"bool\",\"pred\":\"True.\",\"gt\":true}\n"
                           "{\"id\":\"d\",\"task\":\"bool\",\"pred\":false,\"gt\":true}\n");
  auto b = read_eval_jsonl(bools);
  EXPECT_EQ(std::get<bool>(b[0].prediction), true);
  EXPECT_EQ(std::get<bool>(b[1].prediction), false);

  std::istringstream bad("{\"id\":\"e\",\"task\":\"box\",\"pred\":\"x\",\"gt\":[0.5,0.5,0.1,0.1]}\n");
  EXPECT_EQ(error_code_of([&] { read_eval_jsonl(bad); }), ErrorCode::kParse);
  std::istringstream broken("{not json\n");
  EXPECT_EQ(error_code_of([&] { read_eval_jsonl(broken); }), ErrorCode::kParse);
}

}  // namespace
}  // namespace avalign
