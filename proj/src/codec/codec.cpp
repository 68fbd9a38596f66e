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

#include "codec/codec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

#include "error.hpp"

namespace avalign {

namespace {

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

// Whole-field decimal number; rejects inf/nan spellings and trailing junk.
std::optional<double> parse_number(std::string_view field) {
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  if (field.empty()) return std::nullopt;
  double value = 0.0;
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value, std::chars_format::general);
  if (ec != std::errc() || end != field.data() + field.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

// Locates the first open..close group. Returns false when no opener exists;
// an opener without a closer yields an empty optional body.
bool first_group(std::string_view text, char open, char close, std::optional<std::string_view>& body) {
  std::size_t a = text.find(open);
  if (a == std::string_view::npos) return false;
  std::size_t b = text.find(close, a + 1);
  if (b == std::string_view::npos) {
    body.reset();
  } else {
    body = text.substr(a + 1, b - a - 1);
  }
  return true;
}

std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

void check_precision(int precision) {
  if (precision < 0 || precision > 12) fail(ErrorCode::kInvalidArgument, "precision must be in [0, 12]");
}

template <typename T>
ParseResult<T> parse_failure(ParseStatus status, std::string detail) {
  ParseResult<T> r;
  r.status = status;
  r.detail = std::move(detail);
  return r;
}

}  // namespace

bool BoundingBox::is_valid() const noexcept {
  return std::isfinite(x_left) && std::isfinite(y_top) && std::isfinite(x_right) && std::isfinite(y_bottom) &&
         x_left >= 0.0 && x_left < x_right && x_right <= 1.0 && y_top >= 0.0 && y_top < y_bottom && y_bottom <= 1.0;
}

BoundingBox make_box(double x_left, double y_top, double x_right, double y_bottom) {
  BoundingBox b{x_left, y_top, x_right, y_bottom};
  if (!b.is_valid()) {
    fail(ErrorCode::kOutOfRange, "box (" + fixed(x_left, 4) + "," + fixed(y_top, 4) + "," + fixed(x_right, 4) + "," +
                                     fixed(y_bottom, 4) + ") violates 0 <= left < right <= 1, 0 <= top < bottom <= 1");
  }
  return b;
}

bool TimeSegment::is_valid() const noexcept {
  return std::isfinite(t_start) && std::isfinite(t_end) && t_start >= 0.0 && t_start < t_end &&
         t_end <= kMaxAudioSeconds;
}

TimeSegment make_segment(double t_start, double t_end) {
  TimeSegment s{t_start, t_end};
  if (!s.is_valid()) {
    fail(ErrorCode::kOutOfRange,
         "segment (" + fixed(t_start, 3) + "," + fixed(t_end, 3) + ") violates 0 <= start < end <= 30");
  }
  return s;
}

bool is_valid_label(std::string_view label) noexcept {
  if (trim(label).empty() || trim(label).size() != label.size()) return false;
  return label.find_first_of("[](),") == std::string_view::npos;
}

GroundedObject make_grounded_object(std::string label, BoundingBox box) {
  if (!is_valid_label(label)) fail(ErrorCode::kInvalidArgument, "invalid object label '" + label + "'");
  if (!box.is_valid()) make_box(box.x_left, box.y_top, box.x_right, box.y_bottom);
  return GroundedObject{std::move(label), box};
}

std::string_view parse_status_name(ParseStatus s) noexcept {
  switch (s) {
    case ParseStatus::kOk: return "ok";
    case ParseStatus::kNoMatch: return "no_match";
    case ParseStatus::kMalformed: return "malformed";
    case ParseStatus::kOutOfRange: return "out_of_range";
  }
  return "unknown";
}

std::string serialize_box(const GroundedObject& g, int precision) {
  check_precision(precision);
  make_grounded_object(g.label, g.box);
  const BoundingBox& b = g.box;
  std::string coords[4] = {fixed(b.x_left, precision), fixed(b.y_top, precision), fixed(b.x_right, precision),
                           fixed(b.y_bottom, precision)};
  BoundingBox rounded{std::stod(coords[0]), std::stod(coords[1]), std::stod(coords[2]), std::stod(coords[3])};
  if (!rounded.is_valid()) {
    fail(ErrorCode::kOutOfRange, "box collapses at " + std::to_string(precision) + " decimals");
  }
  return "[" + g.label + "," + coords[0] + "," + coords[1] + "," + coords[2] + "," + coords[3] + "]";
}

ParseResult<GroundedObject> parse_box(std::string_view text) {
  std::optional<std::string_view> body;
  if (!first_group(text, '[', ']', body)) return parse_failure<GroundedObject>(ParseStatus::kNoMatch, "no '[' found");
  if (!body) return parse_failure<GroundedObject>(ParseStatus::kMalformed, "unterminated '['");
  auto fields = split_commas(*body);
  if (fields.size() != 5) {
    return parse_failure<GroundedObject>(ParseStatus::kMalformed,
                                         "expected 5 fields, found " + std::to_string(fields.size()));
  }
  if (!is_valid_label(fields[0])) return parse_failure<GroundedObject>(ParseStatus::kMalformed, "invalid label");
  double c[4];
  for (int k = 0; k < 4; ++k) {
    auto v = parse_number(fields[k + 1]);
    if (!v) return parse_failure<GroundedObject>(ParseStatus::kMalformed, "non-numeric coordinate");
    c[k] = *v;
  }
  BoundingBox box{c[0], c[1], c[2], c[3]};
  if (!box.is_valid()) return parse_failure<GroundedObject>(ParseStatus::kOutOfRange, "box violates invariants");
  ParseResult<GroundedObject> r;
  r.status = ParseStatus::kOk;
  r.value = GroundedObject{std::string(fields[0]), box};
  return r;
}

std::string serialize_time(const TimeSegment& s, int precision) {
  check_precision(precision);
  make_segment(s.t_start, s.t_end);
  std::string a = fixed(s.t_start, precision), b = fixed(s.t_end, precision);
  if (!TimeSegment{std::stod(a), std::stod(b)}.is_valid()) {
    fail(ErrorCode::kOutOfRange, "segment collapses at " + std::to_string(precision) + " decimals");
  }
  return "(" + a + "," + b + ")";
}

ParseResult<TimeSegment> parse_time(std::string_view text) {
  std::optional<std::string_view> body;
  if (!first_group(text, '(', ')', body)) return parse_failure<TimeSegment>(ParseStatus::kNoMatch, "no '(' found");
  if (!body) return parse_failure<TimeSegment>(ParseStatus::kMalformed, "unterminated '('");
  auto fields = split_commas(*body);
  if (fields.size() != 2) {
    return parse_failure<TimeSegment>(ParseStatus::kMalformed,
                                      "expected 2 fields, found " + std::to_string(fields.size()));
  }
  auto a = parse_number(fields[0]);
  auto b = parse_number(fields[1]);
  if (!a || !b) return parse_failure<TimeSegment>(ParseStatus::kMalformed, "non-numeric time");
  TimeSegment seg{*a, *b};
  if (!seg.is_valid()) return parse_failure<TimeSegment>(ParseStatus::kOutOfRange, "segment violates invariants");
  ParseResult<TimeSegment> r;
  r.status = ParseStatus::kOk;
  r.value = seg;
  return r;
}

ParseResult<bool> parse_verdict(std::string_view text) {
  auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; };
  auto word_char = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (i > 0 && word_char(text[i - 1])) continue;
    for (std::string_view word : {std::string_view("true"), std::string_view("false")}) {
      if (i + word.size() > text.size()) continue;
      bool same = true;
      for (std::size_t k = 0; k < word.size() && same; ++k) same = lower(text[i + k]) == word[k];
      if (!same) continue;
      if (i + word.size() < text.size() && word_char(text[i + word.size()])) continue;
      ParseResult<bool> r;
      r.status = ParseStatus::kOk;
      r.value = word == "true";
      return r;
    }
  }
  return parse_failure<bool>(ParseStatus::kNoMatch, "no true/false answer found");
}

BoundingBox normalize_box(std::int64_t x_left, std::int64_t y_top, std::int64_t x_right, std::int64_t y_bottom,
                          std::int64_t width, std::int64_t height) {
  if (width < 1 || height < 1) fail(ErrorCode::kInvalidArgument, "image dimensions must be at least 1 pixel");
  auto inside = [](std::int64_t v, std::int64_t dim) { return v >= 0 && v <= dim; };
  if (!inside(x_left, width) || !inside(x_right, width) || !inside(y_top, height) || !inside(y_bottom, height)) {
    fail(ErrorCode::kOutOfRange, "pixel box lies outside the image");
  }
  const double w = static_cast<double>(width), h = static_cast<double>(height);
  return make_box(x_left / w, y_top / h, x_right / w, y_bottom / h);
}

PixelBox seg_mask_pixel_box(const BinaryMask& mask) {
  if (mask.cells.size() != mask.height * mask.width) fail(ErrorCode::kDimensionMismatch, "mask size mismatch");
  PixelBox p{mask.height, 0, mask.width, 0};
  bool any = false;
  for (std::size_t r = 0; r < mask.height; ++r) {
    for (std::size_t c = 0; c < mask.width; ++c) {
      if (!mask.at(r, c)) continue;
      any = true;
      p.row_min = std::min(p.row_min, r);
      p.row_max = std::max(p.row_max, r);
      p.col_min = std::min(p.col_min, c);
      p.col_max = std::max(p.col_max, c);
    }
  }
  if (!any) fail(ErrorCode::kInvalidArgument, "segmentation mask has no set pixels");
  return p;
}

BoundingBox seg_mask_to_bbox(const BinaryMask& mask) {
  PixelBox p = seg_mask_pixel_box(mask);
  const double w = static_cast<double>(mask.width), h = static_cast<double>(mask.height);
  return make_box(p.col_min / w, p.row_min / h, (p.col_max + 1) / w, (p.row_max + 1) / h);
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& allowed_placeholders() {
  static const std::vector<std::string> names = {"<image>", "<audio>", "<obj>", "<placeholder_bbox>",
                                                 "<placeholder_time>"};
  return names;
}

namespace {

bool is_ident_char(char c, bool first) {
  bool alpha = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  return first ? alpha : (alpha || (c >= '0' && c <= '9'));
}

// Calls visit(pos, len) for every "<identifier>" token in text.
template <typename F>
void scan_tokens(std::string_view text, F&& visit) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '<') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && is_ident_char(text[j], j == i + 1)) ++j;
    if (j > i + 1 && j < text.size() && text[j] == '>') {
      visit(i, j - i + 1);
      i = j + 1;
    } else {
      ++i;
    }
  }
}

bool is_allowed(std::string_view token) {
  const auto& names = allowed_placeholders();
  return std::find(names.begin(), names.end(), token) != names.end();
}

std::string canonical_key(const std::string& key) {
  if (key.size() >= 2 && key.front() == '<' && key.back() == '>') return key;
  return "<" + key + ">";
}

}  // namespace

InstructionTemplate::InstructionTemplate(std::string text) : text_(std::move(text)) {
  scan_tokens(text_, [&](std::size_t pos, std::size_t len) {
    std::string token = text_.substr(pos, len);
    if (!is_allowed(token)) fail(ErrorCode::kInvalidArgument, "template uses unknown placeholder " + token);
    if (std::find(placeholders_.begin(), placeholders_.end(), token) == placeholders_.end()) {
      placeholders_.push_back(token);
    }
  });
}

std::string render_instruction(const InstructionTemplate& t, const Bindings& bindings) {
  std::map<std::string, std::string> resolved;
  for (const auto& [key, value] : bindings) {
    std::string k = canonical_key(key);
    if (!is_allowed(k)) fail(ErrorCode::kInvalidArgument, "binding for unknown placeholder " + k);
    if (!resolved.emplace(k, value).second) fail(ErrorCode::kInvalidArgument, "duplicate binding for " + k);
  }
  for (const auto& p : t.placeholders()) {
    if (!resolved.count(p)) fail(ErrorCode::kInvalidArgument, "missing binding for " + p);
  }
  const std::string& text = t.text();
  std::string out;
  out.reserve(text.size());
  std::size_t copied = 0;
  scan_tokens(text, [&](std::size_t pos, std::size_t len) {
    out.append(text, copied, pos - copied);
    out += resolved.at(text.substr(pos, len));
    copied = pos + len;
  });
  out.append(text, copied, std::string::npos);
  return out;
}

std::string_view task_family_name(TaskFamily f) noexcept {
  switch (f) {
    case TaskFamily::kArig: return "arig";
    case TaskFamily::kIgatl: return "igatl";
    case TaskFamily::kAvfact: return "avfact";
  }
  return "unknown";
}

}  // namespace avalign
