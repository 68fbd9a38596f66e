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

// Patch-level optimal transport between image and audio embeddings.
//
// Both modalities are treated as discrete distributions over their patch
// embeddings. The transport cost between two patches is their cosine
// distance, and the plan is found with a proximal Sinkhorn iteration: each
// outer step re-weights the Gibbs kernel by the previous plan and then runs a
// fixed number of alternating row/column scalings.

#include <cstddef>
#include <span>
#include <vector>

#include "autodiff/tape.hpp"

namespace avalign {

/// Support points with non-negative weights summing to one.
class DiscreteDistribution {
 public:
  DiscreteDistribution(Tensor support, std::vector<double> weights);
  static DiscreteDistribution uniform(Tensor support);

  const Tensor& support() const noexcept { return support_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return weights_.size(); }

 private:
  Tensor support_;
  std::vector<double> weights_;
};

std::vector<double> uniform_weights(std::size_t n);
/// Throws kInvalidArgument unless w is non-empty, non-negative and sums to 1 within 1e-12.
void validate_weights(std::span<const double> w, const char* name);

/// Pairwise transport costs; every entry lies in [0, 2].
class CostMatrix {
 public:
  explicit CostMatrix(Tensor entries);

  const Tensor& entries() const noexcept { return entries_; }
  std::size_t rows() const noexcept { return entries_.rows(); }
  std::size_t cols() const noexcept { return entries_.cols(); }

 private:
  Tensor entries_;
};

/// C_kl = 1 - cos(z_image[k], z_audio[l]).
CostMatrix build_cost(const Tensor& z_image, const Tensor& z_audio);

struct TransportPlan {
  Tensor entries;
};

/// max(|plan 1 - u|_inf, |plan^T 1 - v|_inf).
double marginal_violation(const Tensor& plan, std::span<const double> u, std::span<const double> v);
/// Sum_kl C_kl * plan_kl.
double transport_cost(const Tensor& cost, const Tensor& plan);

struct SinkhornConfig {
  double beta = 0.5;               // kernel decay: Gibbs kernel exp(-C / beta)
  int outer_steps = 20;            // proximal steps
  int inner_steps = 5;             // scaling sweeps per proximal step
  double marginal_tolerance = 1e-6;
  int max_total_iterations = 10000;  // cap on scaling sweeps, finishing sweeps included

  // kAuto runs the recurrences on logarithms whenever plan entries could
  // underflow over the proximal steps; kNever keeps the floored linear kernel.
  enum class LogDomain { kAuto, kAlways, kNever };
  LogDomain log_domain = LogDomain::kAuto;

  void validate() const;
};

struct SinkhornResult {
  TransportPlan plan;
  double distance = 0.0;
  double marginal_violation = 0.0;
  int outer_steps_run = 0;
  int inner_iterations = 0;
  // Distance after each proximal step.
  std::vector<double> distance_trace;
  bool log_domain = false;
  bool newton_finish = false;
};

/// Proximal Sinkhorn iteration:
///   K = exp(-C / beta) (floored at 1e-300), plan = 1 1^T, sigma = 1/N
///   repeat outer_steps times:
///     Q = K ⊙ plan
///     repeat inner_steps times: delta = u ⊘ (Q sigma), sigma = v ⊘ (Q^T delta)
///       (stopping early once diag(delta) Q diag(sigma) meets the marginals)
///     plan = diag(delta) Q diag(sigma)
/// If the marginals are still off by more than the tolerance, the scaling of
/// the last Q is finished off: a few more sweeps, then damped Newton steps on
/// the dual of the same scaling problem (kNonConvergence once
/// max_total_iterations iterations have been spent). In the linear mode a row
/// whose kernel entries all underflow, or scalings that overflow, throw
/// kNumericalUnderflow.
SinkhornResult sinkhorn_plan(const CostMatrix& cost, std::span<const double> u, std::span<const double> v,
                             const SinkhornConfig& cfg);

struct ExactOtResult {
  TransportPlan plan;
  double distance = 0.0;
  std::size_t bases_examined = 0;
};

constexpr std::size_t kExactOtMaxSupport = 10;

/// Exact optimum of the transportation LP by enumerating every basic feasible
/// solution: each spanning tree of the complete bipartite graph K_{M,N} fixes
/// a unique flow, kept when it is non-negative. Limited to M + N <= 10.
ExactOtResult exact_ot(const CostMatrix& cost, std::span<const double> u, std::span<const double> v);

/// Number of entries strictly above threshold.
std::size_t count_nonzeros(const Tensor& plan, double threshold = 1e-12);

/// Wasserstein loss between two embedding sets with uniform weights. The
/// plan is solved on the current values and then held fixed, so gradients
/// flow through the cost matrix only. If plan_out is given the solver result
/// is copied there.
Var ot_loss(Var z_image, Var z_audio, const SinkhornConfig& cfg, SinkhornResult* plan_out = nullptr);

/// sum_kl (1 - cos(z_image[k], z_audio[l])) * plan_kl for a fixed plan.
double frozen_plan_loss(const Tensor& z_image, const Tensor& z_audio, const Tensor& plan);
Var frozen_plan_loss(Var z_image, Var z_audio, const Tensor& plan);

}  // namespace avalign
