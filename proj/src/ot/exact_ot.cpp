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

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "error.hpp"
#include "ot/ot.hpp"

namespace avalign {

namespace {

constexpr double kFlowSlack = 1e-12;

// Union-find over at most kExactOtMaxSupport nodes; copied by value at each
// recursion level instead of supporting rollback.
struct Forest {
  std::array<int, kExactOtMaxSupport> parent{};

  explicit Forest(std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
  }
  int find(int x) const {
    while (parent[x] != x) x = parent[x];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

class BasisEnumerator {
 public:
  BasisEnumerator(const Tensor& cost, std::span<const double> u, std::span<const double> v)
      : cost_(cost), u_(u), v_(v), m_(cost.rows()), n_(cost.cols()), need_(m_ + n_ - 1) {}

  ExactOtResult run() {
    chosen_.reserve(need_);
    search(0, Forest(m_ + n_));
    if (!best_flow_) fail(ErrorCode::kInternal, "exact_ot: no feasible basis found for valid marginals");
    ExactOtResult r;
    r.plan.entries = Tensor({m_, n_}, std::move(*best_flow_));
    r.distance = best_cost_;
    r.bases_examined = examined_;
    return r;
  }

 private:
  void search(std::size_t next_edge, Forest forest) {
    if (chosen_.size() == need_) {
      evaluate();
      return;
    }
    std::size_t edges = m_ * n_;
    if (edges - next_edge < need_ - chosen_.size()) return;
    for (std::size_t e = next_edge; e < edges; ++e) {
      if (edges - e < need_ - chosen_.size()) return;
      Forest f = forest;
      int row = static_cast<int>(e / n_);
      int col = static_cast<int>(m_ + e % n_);
      if (!f.unite(row, col)) continue;
      chosen_.push_back(e);
      search(e + 1, f);
      chosen_.pop_back();
    }
  }

  // The flow on a spanning tree is fixed by the marginals; peel leaves.
  void evaluate() {
    ++examined_;
    std::size_t nodes = m_ + n_;
    std::array<double, kExactOtMaxSupport> residual{};
    std::array<int, kExactOtMaxSupport> degree{};
    for (std::size_t i = 0; i < m_; ++i) residual[i] = u_[i];
    for (std::size_t j = 0; j < n_; ++j) residual[m_ + j] = v_[j];
    std::array<bool, kExactOtMaxSupport * kExactOtMaxSupport> alive{};
    for (std::size_t k = 0; k < chosen_.size(); ++k) {
      alive[k] = true;
      ++degree[chosen_[k] / n_];
      ++degree[m_ + chosen_[k] % n_];
    }
    std::vector<double> flow(m_ * n_, 0.0);
    for (std::size_t removed = 0; removed < chosen_.size(); ++removed) {
      // Find any leaf and its single live edge.
      std::size_t leaf = nodes;
      for (std::size_t x = 0; x < nodes; ++x) {
        if (degree[x] == 1) {
          leaf = x;
          break;
        }
      }
      if (leaf == nodes) fail(ErrorCode::kInternal, "exact_ot: spanning tree without a leaf");
      std::size_t k = 0;
      for (; k < chosen_.size(); ++k) {
        if (!alive[k]) continue;
        std::size_t row = chosen_[k] / n_, col = m_ + chosen_[k] % n_;
        if (row == leaf || col == leaf) break;
      }
      std::size_t e = chosen_[k];
      std::size_t row = e / n_, col = m_ + e % n_;
      std::size_t other = (row == leaf) ? col : row;
      double f = residual[leaf];
      if (f < -kFlowSlack) return;
      flow[e] = f < 0.0 ? 0.0 : f;
      residual[leaf] = 0.0;
      residual[other] -= f;
      alive[k] = false;
      --degree[row];
      --degree[col];
    }
    double c = 0.0;
    for (std::size_t e : chosen_) c += flow[e] * cost_[e];
    if (c < best_cost_) {
      best_cost_ = c;
      best_flow_ = std::move(flow);
    }
  }

  const Tensor& cost_;
  std::span<const double> u_, v_;
  std::size_t m_, n_, need_;
  std::vector<std::size_t> chosen_;
  std::optional<std::vector<double>> best_flow_;
  double best_cost_ = std::numeric_limits<double>::infinity();
  std::size_t examined_ = 0;
};

}  // namespace

ExactOtResult exact_ot(const CostMatrix& cost, std::span<const double> u, std::span<const double> v) {
  std::size_t m = cost.rows(), n = cost.cols();
  if (m + n > kExactOtMaxSupport) {
    fail(ErrorCode::kInstanceTooLarge, "exact_ot: M + N = " + std::to_string(m + n) + " exceeds the enumeration bound of " +
                                           std::to_string(kExactOtMaxSupport));
  }
  if (u.size() != m || v.size() != n) fail(ErrorCode::kDimensionMismatch, "exact_ot: weight sizes");
  validate_weights(u, "exact_ot source weights");
  validate_weights(v, "exact_ot target weights");
  return BasisEnumerator(cost.entries(), u, v).run();
}

}  // namespace avalign
