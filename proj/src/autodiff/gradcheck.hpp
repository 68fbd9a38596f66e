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

#include <functional>

#include "autodiff/tape.hpp"

namespace avalign {

struct GradientReport {
  Tensor analytic;
  Tensor numeric;
  double max_relative_error = 0.0;
};

using ScalarFn = std::function<double(const Tensor&)>;
/// Records f(x) on the given tape, x already registered as a leaf.
using TapeFn = std::function<Var(Tape&, Var)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every element.
Tensor finite_difference_gradient(const ScalarFn& f, const Tensor& x, double h = 1e-5);

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8).
double max_relative_error(const Tensor& analytic, const Tensor& numeric);

/// Runs backward() on f and compares against finite differences of the same
/// function evaluated off-tape.
GradientReport check_gradient(const TapeFn& f, const Tensor& x, double h = 1e-5);

}  // namespace avalign
