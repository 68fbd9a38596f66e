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

// Finite-difference checks of the analytic gradients of the training losses.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "autodiff/gradcheck.hpp"

namespace avalign {

struct GradcheckTarget {
  std::string name;
  std::string description;
  double tolerance = 0.0;  // pass iff max_relative_error < tolerance
};

/// composite, avace, ot, objective.
const std::vector<GradcheckTarget>& gradcheck_targets();
const GradcheckTarget& find_gradcheck_target(std::string_view name);

struct GradcheckOutcome {
  GradcheckTarget target;
  std::uint64_t seed = 0;
  std::string wrt;  // what the gradient is taken with respect to
  GradientReport report;
  bool passed() const noexcept { return report.max_relative_error < target.tolerance; }
};

/// Builds a random instance from `seed` and compares the tape gradient with
/// central differences of step h. Transport plans are solved once and held
/// fixed for the numeric side.
GradcheckOutcome run_gradcheck(std::string_view target, std::uint64_t seed, double h = 1e-5);

}  // namespace avalign
