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

#include "error.hpp"

namespace avalign {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kZeroNorm: return "zero_norm";
    case ErrorCode::kNonConvergence: return "non_convergence";
    case ErrorCode::kNumericalUnderflow: return "numerical_underflow";
    case ErrorCode::kInstanceTooLarge: return "instance_too_large";
    case ErrorCode::kNoMatch: return "no_match";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kNanLoss: return "nan_loss";
    case ErrorCode::kUnknownKey: return "unknown_key";
    case ErrorCode::kInternal: return "internal";
  }
  return "internal";
}

}  // namespace avalign
