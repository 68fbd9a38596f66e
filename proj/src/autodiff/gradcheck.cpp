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

#include "autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace avalign {

Tensor finite_difference_gradient(const ScalarFn& f, const Tensor& x, double h) {
  if (!(h > 0.0)) fail(ErrorCode::kInvalidArgument, "finite difference step must be positive");
  std::vector<double> probe(x.data());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = probe[i];
    probe[i] = orig + h;
    double up = f(Tensor(x.shape(), probe));
    probe[i] = orig - h;
    double down = f(Tensor(x.shape(), probe));
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return Tensor(x.shape(), std::move(grad));
}

double max_relative_error(const Tensor& analytic, const Tensor& numeric) {
  if (analytic.shape() != numeric.shape()) fail(ErrorCode::kDimensionMismatch, "gradient shapes differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    double a = analytic[i], n = numeric[i];
    double denom = std::max({std::abs(a), std::abs(n), 1e-8});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

GradientReport check_gradient(const TapeFn& f, const Tensor& x, double h) {
  Tape tape;
  Var leaf = tape.leaf(x);
  Var out = f(tape, leaf);
  tape.backward(out);
  GradientReport report;
  report.analytic = tape.grad(leaf);
  report.numeric = finite_difference_gradient(
      [&f](const Tensor& probe) {
        Tape t;
        return f(t, t.constant(probe)).value().item();
      },
      x, h);
  report.max_relative_error = max_relative_error(report.analytic, report.numeric);
  return report;
}

}  // namespace avalign
