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

// Small text-format readers shared by the library and the command line.

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "autodiff/tensor.hpp"
#include "codec/codec.hpp"

namespace avalign {

/// RFC 4180 records: comma separated, double-quoted fields may hold commas,
/// newlines and doubled quotes. Throws kParse on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::istream& in);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Numeric CSV matrix; every row must have the same number of columns.
Tensor read_matrix_csv(std::istream& in);
Tensor read_matrix_csv_file(const std::string& path);
/// Full-precision rendering, one row per line.
std::string matrix_to_csv(const Tensor& m);

/// Plain (P2) or raw (P5) PGM; any non-zero pixel is set.
BinaryMask read_pgm_mask(std::istream& in);
/// CSV grid of 0/1 values.
BinaryMask read_csv_mask(std::istream& in);
/// Chooses the PGM reader when the file starts with "P2" or "P5".
BinaryMask read_mask_file(const std::string& path);

std::string read_text_file(const std::string& path);

}  // namespace avalign
