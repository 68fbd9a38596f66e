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
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "codec/codec.hpp"
#include "test_util.hpp"

namespace avalign {
namespace {

using testing::error_code_of;

TEST(SerializeBox, Examples) {
  EXPECT_EQ(serialize_box({"dog", make_box(0.1, 0.2, 0.8, 0.9)}), "[dog,0.10,0.20,0.80,0.90]");
  EXPECT_EQ(serialize_box({"obj", make_box(0, 0, 1, 1)}), "[obj,0.00,0.00,1.00,1.00]");
  EXPECT_EQ(serialize_box({"dog", make_box(0.1, 0.2, 0.8, 0.9)}, 3), "[dog,0.100,0.200,0.800,0.900]");
}

TEST(SerializeBox, CollapsingPrecisionIsAnError) {
  EXPECT_EQ(error_code_of([] { serialize_box({"a", make_box(0.101, 0.2, 0.104, 0.9)}); }), ErrorCode::kOutOfRange);
}

TEST(ParseBox, Examples) {
  auto ok = parse_box("Answer: [cat,0.25,0.25,0.75,0.75].");
  ASSERT_TRUE(ok.ok());
  EXPECT_EQ(*ok.value, (GroundedObject{"cat", make_box(0.25, 0.25, 0.75, 0.75)}));
  EXPECT_EQ(parse_box("[dog,0.9,0.2,0.1,0.8]").status, ParseStatus::kOutOfRange);
  EXPECT_EQ(parse_box("[dog,0.1,0.2,0.8]").status, ParseStatus::kMalformed);
  EXPECT_EQ(parse_box("no box in here").status, ParseStatus::kNoMatch);
  EXPECT_EQ(parse_box("[dog,0.1,abc,0.8,0.9]").status, ParseStatus::kMalformed);
  EXPECT_EQ(parse_box("[dog,0.1,0.2,1.5,0.9]").status, ParseStatus::kOutOfRange);
  EXPECT_EQ(parse_box("[dog,0.1,0.2,0.8,0.9").status, ParseStatus::kMalformed);
}

TEST(ParseBox, TakesFirstGroup) {
  auto r = parse_box("first [a,0.1,0.1,0.2,0.2] then [b,0.5,0.5,0.6,0.6]");
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.value->label, "a");
}

TEST(Time, Examples) {
  EXPECT_EQ(serialize_time(make_segment(5, 15)), "(5.0,15.0)");
  auto back = parse_time("(5.0,15.0)");
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(*back.value, make_segment(5, 15));
  auto edge = parse_time("(12.5,30.0)");
  ASSERT_TRUE(edge.ok());
  EXPECT_EQ(*edge.value, make_segment(12.5, 30.0));
  EXPECT_EQ(parse_time("(20,10)").status, ParseStatus::kOutOfRange);
  EXPECT_EQ(parse_time("(10,31)").status, ParseStatus::kOutOfRange);
  EXPECT_EQ(parse_time("(1,2,3)").status, ParseStatus::kMalformed);
  EXPECT_EQ(parse_time("nothing").status, ParseStatus::kNoMatch);
  EXPECT_EQ(error_code_of([] { make_segment(0, 31); }), ErrorCode::kOutOfRange);
}

TEST(Verdict, FirstStandaloneWord) {
  EXPECT_EQ(parse_verdict("True").value, true);
  EXPECT_EQ(parse_verdict("answer: FALSE.").value, false);
  EXPECT_EQ(parse_verdict("false, then true").value, false);
  EXPECT_EQ(parse_verdict("untrue").status, ParseStatus::kNoMatch);
}

TEST(Labels, Validation) {
  EXPECT_TRUE(is_valid_label("dog baying"));
  EXPECT_FALSE(is_valid_label(""));
  EXPECT_FALSE(is_valid_label("a,b"));
  EXPECT_FALSE(is_valid_label("a]"));
  EXPECT_EQ(error_code_of([] { make_grounded_object("x[y", make_box(0, 0, 1, 1)); }), ErrorCode::kInvalidArgument);
}

TEST(Codec, RandomRoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<std::string> labels{"dog", "cat", "violin", "dog baying", "x"};
  for (int trial = 0; trial < 1000; ++trial) {
    double x0 = u(rng) * 0.9, y0 = u(rng) * 0.9;
    double x1 = x0 + 0.02 + u(rng) * (0.98 - x0), y1 = y0 + 0.02 + u(rng) * (0.98 - y0);
    GroundedObject g{labels[trial % labels.size()], make_box(x0, y0, std::min(x1, 1.0), std::min(y1, 1.0))};
    auto back = parse_box(serialize_box(g));
    ASSERT_TRUE(back.ok()) << serialize_box(g);
    EXPECT_EQ(back.value->label, g.label);
    EXPECT_LE(std::abs(back.value->box.x_left - g.box.x_left), 1e-2);
    EXPECT_LE(std::abs(back.value->box.y_top - g.box.y_top), 1e-2);
    EXPECT_LE(std::abs(back.value->box.x_right - g.box.x_right), 1e-2);
    EXPECT_LE(std::abs(back.value->box.y_bottom - g.box.y_bottom), 1e-2);

    double t0 = u(rng) * 29.0;
    double t1 = std::min(30.0, t0 + 0.2 + u(rng) * (30.0 - t0));
    TimeSegment s = make_segment(t0, t1);
    auto ts = parse_time(serialize_time(s, 2));
    ASSERT_TRUE(ts.ok()) << serialize_time(s, 2);
    EXPECT_LE(std::abs(ts.value->t_start - s.t_start), 1e-2);
    EXPECT_LE(std::abs(ts.value->t_end - s.t_end), 1e-2);
  }
}

std::string random_input(std::mt19937_64& rng) {
  static const std::string alphabet = "[](),.-+e0123456789 abcTrueFalse\t\n";
  std::uniform_int_distribution<int> len(0, 40), kind(0, 2), byte(0, 255);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s(len(rng), '\0');
  int k = kind(rng);
  for (char& c : s) c = k == 0 ? static_cast<char>(byte(rng)) : alphabet[pick(rng)];
  if (k == 2) s = "[" + s + "]";
  return s;
}

template <typename T>
void check_total(const ParseResult<T>& r) {
  ASSERT_TRUE(r.status == ParseStatus::kOk || r.status == ParseStatus::kNoMatch || r.status == ParseStatus::kMalformed ||
              r.status == ParseStatus::kOutOfRange);
  ASSERT_EQ(r.value.has_value(), r.ok());
}

TEST(Codec, FuzzedInputsAreTotal) {
  std::mt19937_64 rng(2);
  std::map<ParseStatus, int> seen;
  for (int i = 0; i < 100000; ++i) {
    std::string s = random_input(rng);
    auto b = parse_box(s);
    check_total(b);
    check_total(parse_time(s));
    check_total(parse_verdict(s));
    ++seen[b.status];
    if (b.ok()) {
      EXPECT_TRUE(b.value->box.is_valid());
    }
  }
  EXPECT_GT(seen[ParseStatus::kNoMatch], 0);
  EXPECT_GT(seen[ParseStatus::kMalformed], 0);
}

TEST(NormalizeBox, Examples) {
  EXPECT_EQ(normalize_box(0, 0, 100, 100, 100, 100), make_box(0, 0, 1, 1));
  EXPECT_EQ(normalize_box(10, 20, 80, 90, 100, 100), make_box(0.1, 0.2, 0.8, 0.9));
  EXPECT_EQ(normalize_box(25, 50, 75, 100, 200, 200), make_box(0.125, 0.25, 0.375, 0.5));
  EXPECT_EQ(error_code_of([] { normalize_box(0, 0, 1, 1, 0, 10); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { normalize_box(0, 0, 120, 10, 100, 100); }), ErrorCode::kOutOfRange);
}

BinaryMask mask_with(std::size_t h, std::size_t w, std::vector<std::pair<std::size_t, std::size_t>> pixels) {
  BinaryMask m{h, w, std::vector<std::uint8_t>(h * w, 0)};
  for (auto [r, c] : pixels) m.cells[r * w + c] = 1;
  return m;
}

TEST(SegMask, Examples) {
  BinaryMask one = mask_with(10, 10, {{2, 3}});
  PixelBox p = seg_mask_pixel_box(one);
  EXPECT_EQ(p.row_min, 2u);
  EXPECT_EQ(p.row_max, 2u);
  EXPECT_EQ(p.col_min, 3u);
  EXPECT_EQ(p.col_max, 3u);
  BoundingBox b = seg_mask_to_bbox(one);
  EXPECT_DOUBLE_EQ(b.x_left, 0.3);
  EXPECT_DOUBLE_EQ(b.y_top, 0.2);
  EXPECT_DOUBLE_EQ(b.x_right, 0.4);
  EXPECT_DOUBLE_EQ(b.y_bottom, 0.3);

  PixelBox two = seg_mask_pixel_box(mask_with(10, 10, {{2, 3}, {5, 7}}));
  EXPECT_EQ(two.row_min, 2u);
  EXPECT_EQ(two.row_max, 5u);
  EXPECT_EQ(two.col_min, 3u);
  EXPECT_EQ(two.col_max, 7u);

  EXPECT_EQ(error_code_of([] { seg_mask_to_bbox(mask_with(4, 4, {})); }), ErrorCode::kInvalidArgument);
}

TEST(SegMask, MatchesExhaustiveScan) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<std::size_t> dim(1, 40);
    std::size_t h = dim(rng), w = dim(rng);
    std::bernoulli_distribution on(std::uniform_real_distribution<double>(0.01, 0.3)(rng));
    BinaryMask m{h, w, std::vector<std::uint8_t>(h * w)};
    for (auto& c : m.cells) c = on(rng);
    m.cells[std::uniform_int_distribution<std::size_t>(0, h * w - 1)(rng)] = 1;
    std::size_t rmin = h, rmax = 0, cmin = w, cmax = 0;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        if (!m.at(r, c)) continue;
        rmin = std::min(rmin, r), rmax = std::max(rmax, r), cmin = std::min(cmin, c), cmax = std::max(cmax, c);
      }
    }
    PixelBox p = seg_mask_pixel_box(m);
    EXPECT_EQ(p.row_min, rmin);
    EXPECT_EQ(p.row_max, rmax);
    EXPECT_EQ(p.col_min, cmin);
    EXPECT_EQ(p.col_max, cmax);
    BoundingBox b = seg_mask_to_bbox(m);
    EXPECT_EQ(b.x_left, static_cast<double>(cmin) / w);
    EXPECT_EQ(b.y_top, static_cast<double>(rmin) / h);
    EXPECT_EQ(b.x_right, static_cast<double>(cmax + 1) / w);
    EXPECT_EQ(b.y_bottom, static_cast<double>(rmax + 1) / h);
    // Every set pixel lies inside the normalised box.
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        if (!m.at(r, c)) continue;
        EXPECT_GE(static_cast<double>(c) / w, b.x_left);
        EXPECT_LE(static_cast<double>(c + 1) / w, b.x_right);
        EXPECT_GE(static_cast<double>(r) / h, b.y_top);
        EXPECT_LE(static_cast<double>(r + 1) / h, b.y_bottom);
      }
    }
  }
}

TEST(Templates, RejectUnknownPlaceholders) {
  EXPECT_EQ(error_code_of([] { InstructionTemplate("Is the <Object> louder?"); }), ErrorCode::kInvalidArgument);
  InstructionTemplate t("<image> <audio> then <obj> and <obj>");
  EXPECT_EQ(t.placeholders(), (std::vector<std::string>{"<image>", "<audio>", "<obj>"}));
}

TEST(Templates, RenderSubstitutesOnlyPlaceholders) {
  InstructionTemplate t("Where is the <obj>? Give [<obj>,x,y] (no <obj>s).");
  EXPECT_EQ(render_instruction(t, {{"obj", "violin"}}), "Where is the violin? Give [violin,x,y] (no violins).");
  // Bound values are not rescanned.
  EXPECT_EQ(render_instruction(InstructionTemplate("<obj>"), {{"<obj>", "<audio>"}}), "<audio>");
}

TEST(Templates, RenderErrors) {
  InstructionTemplate t("Listen in <placeholder_time>. Box <placeholder_bbox>.");
  EXPECT_EQ(error_code_of([&] { render_instruction(t, {{"placeholder_bbox", "[a,0,0,1,1]"}}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([&] {
              render_instruction(t, {{"placeholder_bbox", "b"}, {"placeholder_time", "t"}, {"colour", "red"}});
            }),
            ErrorCode::kInvalidArgument);
}

std::map<std::string, std::vector<std::string>> golden_templates() {
  std::ifstream in(std::string(AVALIGN_TEST_DATA) + "/instruction_templates.txt");
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    auto tab = line.find('\t');
    out[line.substr(0, tab)].push_back(line.substr(tab + 1));
  }
  return out;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) s.replace(pos, from.size(), to);
  return s;
}

TEST(Templates, BuiltinsAreByteExactAndRenderExactly) {
  auto golden = golden_templates();
  const std::string box = serialize_box({"violin", make_box(0.1, 0.2, 0.8, 0.9)});
  const std::string time = serialize_time(make_segment(12.5, 30.0));
  const std::map<std::string, std::string> values{
      {"<obj>", "violin"}, {"<placeholder_bbox>", box}, {"<placeholder_time>", time},
      {"<image>", "IMAGE"}, {"<audio>", "AUDIO"}};
  std::size_t total = 0;
  for (TaskFamily f : {TaskFamily::kArig, TaskFamily::kIgatl, TaskFamily::kAvfact}) {
    const auto& expected = golden.at(std::string(task_family_name(f)));
    const auto& builtins = builtin_templates(f);
    ASSERT_EQ(builtins.size(), expected.size()) << task_family_name(f);
    for (std::size_t i = 0; i < builtins.size(); ++i) {
      EXPECT_EQ(builtins[i].text(), expected[i]);
      Bindings b;
      std::string want = expected[i];
      for (const auto& p : builtins[i].placeholders()) {
        b[p] = values.at(p);
        want = replace_all(want, p, values.at(p));
      }
      EXPECT_EQ(render_instruction(builtins[i], b), want);
      ++total;
    }
  }
  EXPECT_EQ(total, 27u);
}

}  // namespace
}  // namespace avalign
