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

#include <random>
#include <sstream>
#include <string>

#include "io/io.hpp"
#include "test_util.hpp"

namespace avalign {
namespace {

using testing::error_code_of;

TEST(Csv, QuotedFields) {
  auto rows = parse_csv(std::string_view("a,\"b,c\",\"say \"\"hi\"\"\"\n\"multi\nline\",x\n"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b,c", "say \"hi\""}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"multi\nline", "x"}));
  EXPECT_EQ(error_code_of([] { parse_csv(std::string_view("a,\"open\n")); }), ErrorCode::kParse);
}

TEST(Csv, MatrixRoundTripIsExact) {
  std::mt19937_64 rng(1);
  Tensor m = testing::gaussian_tensor(rng, {4, 3}, 1e3);
  std::istringstream in(matrix_to_csv(m));
  EXPECT_EQ(read_matrix_csv(in), m);
}

TEST(Csv, MatrixErrors) {
  std::istringstream ragged("1,2\n3\n");
  EXPECT_NE(error_code_of([&] { read_matrix_csv(ragged); }), ErrorCode::kOk);
  std::istringstream text("1,x\n");
  EXPECT_EQ(error_code_of([&] { read_matrix_csv(text); }), ErrorCode::kParse);
}

TEST(Masks, PlainAndRawPgm) {
  std::istringstream plain("P2\n# comment\n3 2\n255\n0 255 0\n0 0 7\n");
  BinaryMask a = read_pgm_mask(plain);
  EXPECT_EQ(a.height, 2u);
  EXPECT_EQ(a.width, 3u);
  EXPECT_EQ(a.cells, (std::vector<std::uint8_t>{0, 1, 0, 0, 0, 1}));

  std::string raw = "P5\n2 2\n255\n";
  raw += std::string("\x00\xff\x01\x00", 4);
  std::istringstream rin(raw);
  BinaryMask b = read_pgm_mask(rin);
  EXPECT_EQ(b.cells, (std::vector<std::uint8_t>{0, 1, 1, 0}));
}

TEST(Masks, CsvGrid) {
  std::istringstream in("0,1\n1,1\n0,0\n");
  BinaryMask m = read_csv_mask(in);
  EXPECT_EQ(m.height, 3u);
  EXPECT_EQ(m.width, 2u);
  EXPECT_EQ(m.cells, (std::vector<std::uint8_t>{0, 1, 1, 1, 0, 0}));
}

TEST(Files, MissingFileIsIoError) {
  EXPECT_EQ(error_code_of([] { read_text_file("/nonexistent/file.txt"); }), ErrorCode::kIo);
}

}  // namespace
}  // namespace avalign
