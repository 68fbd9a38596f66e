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

// Textual numeric formats for spatial and temporal grounding:
//   box   "[label,xLeft,yTop,xRight,yBottom]"  (coordinates normalised to [0,1])
//   time  "(tStart,tEnd)"                       (seconds, 0 <= tStart < tEnd <= 30)

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace avalign {

constexpr double kMaxAudioSeconds = 30.0;

struct BoundingBox {
  double x_left = 0.0;
  double y_top = 0.0;
  double x_right = 1.0;
  double y_bottom = 1.0;

  double width() const noexcept { return x_right - x_left; }
  double height() const noexcept { return y_bottom - y_top; }
  double area() const noexcept { return width() * height(); }
  bool is_valid() const noexcept;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Throws kOutOfRange unless 0 <= x_left < x_right <= 1 and likewise for y.
BoundingBox make_box(double x_left, double y_top, double x_right, double y_bottom);

struct TimeSegment {
  double t_start = 0.0;
  double t_end = kMaxAudioSeconds;

  double length() const noexcept { return t_end - t_start; }
  bool is_valid() const noexcept;

  friend bool operator==(const TimeSegment&, const TimeSegment&) = default;
};

/// Throws kOutOfRange unless 0 <= t_start < t_end <= 30.
TimeSegment make_segment(double t_start, double t_end);

struct GroundedObject {
  std::string label;
  BoundingBox box;

  friend bool operator==(const GroundedObject&, const GroundedObject&) = default;
};

/// Labels are non-empty and free of brackets, parentheses and commas.
bool is_valid_label(std::string_view label) noexcept;
GroundedObject make_grounded_object(std::string label, BoundingBox box);

enum class ParseStatus { kOk, kNoMatch, kMalformed, kOutOfRange };
std::string_view parse_status_name(ParseStatus s) noexcept;

template <typename T>
struct ParseResult {
  ParseStatus status = ParseStatus::kNoMatch;
  std::optional<T> value;
  std::string detail;

  bool ok() const noexcept { return status == ParseStatus::kOk; }
};

constexpr int kDefaultBoxPrecision = 2;
constexpr int kDefaultTimePrecision = 1;

/// Fixed-point rendering. Throws kOutOfRange when rounding to the requested
/// precision would produce a box that no longer parses (zero width/height).
std::string serialize_box(const GroundedObject& g, int precision = kDefaultBoxPrecision);
/// Reads the first "[...]" group in text. Never throws.
ParseResult<GroundedObject> parse_box(std::string_view text);

std::string serialize_time(const TimeSegment& s, int precision = kDefaultTimePrecision);
/// Reads the first "(...)" group in text. Never throws.
ParseResult<TimeSegment> parse_time(std::string_view text);

/// First standalone "true"/"false" word, case-insensitive. Never throws.
ParseResult<bool> parse_verdict(std::string_view text);

/// Pixel corners divided by the image size.
BoundingBox normalize_box(std::int64_t x_left, std::int64_t y_top, std::int64_t x_right, std::int64_t y_bottom,
                          std::int64_t width, std::int64_t height);

/// Binary mask stored row-major, height x width.
struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> cells;

  bool at(std::size_t row, std::size_t col) const { return cells[row * width + col] != 0; }
};

struct PixelBox {
  std::size_t row_min, row_max, col_min, col_max;  // inclusive
};

/// Tight box over the set pixels, in pixels (kInvalidArgument for empty masks).
PixelBox seg_mask_pixel_box(const BinaryMask& mask);
/// The same box normalised; the right/bottom edges sit at (max + 1) / dim.
BoundingBox seg_mask_to_bbox(const BinaryMask& mask);

// ---------------------------------------------------------------------------
// Instruction templates.

/// Placeholder tokens a template may contain.
const std::vector<std::string>& allowed_placeholders();

class InstructionTemplate {
 public:
  /// Throws kInvalidArgument if text holds a "<name>" token outside the allowed set.
  explicit InstructionTemplate(std::string text);

  const std::string& text() const noexcept { return text_; }
  /// Placeholders present in the text, in order of first appearance.
  const std::vector<std::string>& placeholders() const noexcept { return placeholders_; }

 private:
  std::string text_;
  std::vector<std::string> placeholders_;
};

/// Keys are placeholder tokens, written either "<obj>" or "obj".
using Bindings = std::map<std::string, std::string>;

/// Single-pass substitution; bound values are inserted verbatim and never
/// rescanned. Throws kInvalidArgument on a missing binding or an unknown key.
std::string render_instruction(const InstructionTemplate& t, const Bindings& bindings);

enum class TaskFamily { kArig, kIgatl, kAvfact };
std::string_view task_family_name(TaskFamily f) noexcept;
/// The instruction templates used for each grounding task.
const std::vector<InstructionTemplate>& builtin_templates(TaskFamily family);

}  // namespace avalign
