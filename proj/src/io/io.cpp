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

#include "io/io.hpp"

#include <cerrno>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "error.hpp"

namespace avalign {

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    // A line holding nothing at all is skipped rather than read as one empty field.
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty()) {
          fail(ErrorCode::kParse, "csv line " + std::to_string(line) + ": quote inside an unquoted field");
        }
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        end_row();
        ++line;
        break;
      case '\n':
        end_row();
        ++line;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (quoted) fail(ErrorCode::kParse, "csv: unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

namespace {

double parse_cell(const std::string& cell, std::size_t r, std::size_t c) {
  std::size_t a = cell.find_first_not_of(" \t");
  std::size_t b = cell.find_last_not_of(" \t");
  std::string s = a == std::string::npos ? "" : cell.substr(a, b - a + 1);
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    fail(ErrorCode::kParse, "csv cell (" + std::to_string(r + 1) + "," + std::to_string(c + 1) + ") '" + s +
                                "' is not a finite number");
  }
  return v;
}

std::ifstream open_file(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return in;
}

}  // namespace

Tensor read_matrix_csv(std::istream& in) {
  auto rows = parse_csv(in);
  if (rows.empty()) fail(ErrorCode::kParse, "csv matrix is empty");
  const std::size_t cols = rows[0].size();
  std::vector<double> values;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      fail(ErrorCode::kParse, "csv row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                                  " columns, expected " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) values.push_back(parse_cell(rows[r][c], r, c));
  }
  return Tensor({rows.size(), cols}, std::move(values));
}

Tensor read_matrix_csv_file(const std::string& path) {
  auto in = open_file(path);
  return read_matrix_csv(in);
}

std::string matrix_to_csv(const Tensor& m) {
  std::ostringstream os;
  os << std::setprecision(17);
  const std::size_t rows = m.rows(), cols = m.size() / rows;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) os << ',';
      os << m[r * cols + c];
    }
    os << '\n';
  }
  return os.str();
}

BinaryMask read_pgm_mask(std::istream& in) {
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") fail(ErrorCode::kParse, "pgm: expected P2 or P5 header");
  auto next_int = [&](const char* what) {
    // Skips whitespace and '#' comments between header tokens.
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        std::string comment;
        std::getline(in, comment);
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        in.get();
      } else {
        break;
      }
    }
    long v = -1;
    if (!(in >> v) || v < 0) fail(ErrorCode::kParse, std::string("pgm: bad ") + what);
    return v;
  };
  long width = next_int("width"), height = next_int("height"), maxval = next_int("maxval");
  if (width < 1 || height < 1) fail(ErrorCode::kParse, "pgm: empty image");
  if (maxval < 1 || maxval > 65535) fail(ErrorCode::kParse, "pgm: maxval out of range");
  BinaryMask mask;
  mask.width = static_cast<std::size_t>(width);
  mask.height = static_cast<std::size_t>(height);
  mask.cells.resize(mask.width * mask.height);
  if (magic == "P2") {
    for (auto& cell : mask.cells) {
      long v = -1;
      if (!(in >> v) || v < 0 || v > maxval) fail(ErrorCode::kParse, "pgm: bad pixel value");
      cell = v != 0;
    }
  } else {
    in.get();  // single whitespace byte after maxval
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    std::vector<char> raw(mask.cells.size() * bytes);
    if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size()))) fail(ErrorCode::kParse, "pgm: truncated data");
    for (std::size_t i = 0; i < mask.cells.size(); ++i) {
      unsigned v = static_cast<unsigned char>(raw[i * bytes]);
      if (bytes == 2) v = (v << 8) | static_cast<unsigned char>(raw[i * bytes + 1]);
      mask.cells[i] = v != 0;
    }
  }
  return mask;
}

BinaryMask read_csv_mask(std::istream& in) {
  Tensor grid = read_matrix_csv(in);
  BinaryMask mask;
  mask.height = grid.rows();
  mask.width = grid.cols();
  for (double v : grid.values()) {
    if (v != 0.0 && v != 1.0) fail(ErrorCode::kParse, "csv mask entries must be 0 or 1");
    mask.cells.push_back(v != 0.0);
  }
  return mask;
}

BinaryMask read_mask_file(const std::string& path) {
  auto in = open_file(path, std::ios::in | std::ios::binary);
  char head[2] = {0, 0};
  in.read(head, 2);
  in.clear();
  in.seekg(0);
  if (head[0] == 'P' && (head[1] == '2' || head[1] == '5')) return read_pgm_mask(in);
  return read_csv_mask(in);
}

std::string read_text_file(const std::string& path) {
  auto in = open_file(path, std::ios::in | std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace avalign
