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

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "error.hpp"
#include "ot/ot.hpp"

namespace avalign {

namespace {

constexpr double kKernelFloor = 1e-300;
constexpr double kWeightSumTolerance = 1e-12;
// Largest C/beta for which every kernel entry exp(-C/beta) stays a normal double.
constexpr double kLinearExponentLimit = 700.0;
// Plain sweeps tried on the final kernel before switching to Newton steps.
constexpr int kFinishingSweeps = 50;

}  // namespace

std::vector<double> uniform_weights(std::size_t n) {
  if (n == 0) fail(ErrorCode::kInvalidArgument, "distribution needs at least one support point");
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

void validate_weights(std::span<const double> w, const char* name) {
  if (w.empty()) fail(ErrorCode::kInvalidArgument, std::string(name) + ": empty weight vector");
  double total = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0) fail(ErrorCode::kInvalidArgument, std::string(name) + ": negative or non-finite weight");
    total += x;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << name << ": weights sum to " << total << ", expected 1";
    fail(ErrorCode::kInvalidArgument, os.str());
  }
}

DiscreteDistribution::DiscreteDistribution(Tensor support, std::vector<double> weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  require_matrix(support_, "DiscreteDistribution");
  if (support_.rows() != weights_.size()) {
    fail(ErrorCode::kDimensionMismatch, "DiscreteDistribution: one weight per support row required");
  }
  validate_weights(weights_, "DiscreteDistribution");
}

DiscreteDistribution DiscreteDistribution::uniform(Tensor support) {
  require_matrix(support, "DiscreteDistribution");
  auto w = uniform_weights(support.rows());
  return DiscreteDistribution(std::move(support), std::move(w));
}

CostMatrix::CostMatrix(Tensor entries) : entries_(std::move(entries)) {
  require_matrix(entries_, "CostMatrix");
  for (double c : entries_.values()) {
    if (c < 0.0 || c > 2.0) fail(ErrorCode::kOutOfRange, "cost entries must lie in [0, 2]");
  }
}

CostMatrix build_cost(const Tensor& z_image, const Tensor& z_audio) {
  Tensor sim = cosine_similarity_matrix(z_image, z_audio);
  std::vector<double> c(sim.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::clamp(1.0 - sim[i], 0.0, 2.0);
  return CostMatrix(Tensor(sim.shape(), std::move(c)));
}

double marginal_violation(const Tensor& plan, std::span<const double> u, std::span<const double> v) {
  require_matrix(plan, "marginal_violation");
  std::size_t m = plan.rows(), n = plan.cols();
  if (u.size() != m || v.size() != n) fail(ErrorCode::kDimensionMismatch, "marginal_violation: weight sizes");
  double worst = 0.0;
  std::vector<double> col(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row += plan.at(i, j);
      col[j] += plan.at(i, j);
    }
    worst = std::max(worst, std::abs(row - u[i]));
  }
  for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(col[j] - v[j]));
  return worst;
}

double transport_cost(const Tensor& cost, const Tensor& plan) {
  if (cost.shape() != plan.shape()) fail(ErrorCode::kDimensionMismatch, "transport_cost: shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < cost.size(); ++i) s += cost[i] * plan[i];
  return s;
}

void SinkhornConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) fail(ErrorCode::kInvalidArgument, "sinkhorn: beta must be positive");
  if (outer_steps < 1) fail(ErrorCode::kInvalidArgument, "sinkhorn: outer_steps must be >= 1");
  if (inner_steps < 1) fail(ErrorCode::kInvalidArgument, "sinkhorn: inner_steps must be >= 1");
  if (!(marginal_tolerance > 0.0)) fail(ErrorCode::kInvalidArgument, "sinkhorn: tolerance must be positive");
  if (max_total_iterations < 1) fail(ErrorCode::kInvalidArgument, "sinkhorn: max_total_iterations must be >= 1");
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum_k exp(x_k)); -inf when every term is -inf.
double log_sum_exp(const double* x, std::size_t n, std::size_t stride) {
  double mx = kNegInf;
  for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, x[k * stride]);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += std::exp(x[k * stride] - mx);
  return mx + std::log(s);
}

// State shared by both arithmetic modes. In the log mode every buffer holds
// the logarithm of the quantity named.
struct Iterate {
  std::size_t m, n;
  std::span<const double> u, v;
  std::vector<double> kernel, plan, q, delta, sigma, scratch;
};

void linear_sweep(Iterate& it) {
  const std::size_t m = it.m, n = it.n;
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += it.q[i * n + j] * it.sigma[j];
    it.delta[i] = it.u[i] == 0.0 ? 0.0 : it.u[i] / s;
  }
  std::vector<double>& qtd = it.scratch;
  std::fill(qtd.begin(), qtd.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) qtd[j] += it.q[i * n + j] * it.delta[i];
  for (std::size_t j = 0; j < n; ++j) it.sigma[j] = it.v[j] == 0.0 ? 0.0 : it.v[j] / qtd[j];
}

void log_sweep(Iterate& it) {
  const std::size_t m = it.m, n = it.n;
  std::vector<double>& buf = it.scratch;
  for (std::size_t i = 0; i < m; ++i) {
    if (it.u[i] == 0.0) {
      it.delta[i] = kNegInf;
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) buf[j] = it.q[i * n + j] + it.sigma[j];
    it.delta[i] = std::log(it.u[i]) - log_sum_exp(buf.data(), n, 1);
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (it.v[j] == 0.0) {
      it.sigma[j] = kNegInf;
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) buf[i] = it.q[i * n + j] + it.delta[i];
    it.sigma[j] = std::log(it.v[j]) - log_sum_exp(buf.data(), m, 1);
  }
}

// Dual objective of the scaling problem for fixed Q, with a = log delta and
// b = log sigma:  phi(a, b) = <u, a> + <v, b> - sum_ij exp(a_i + log Q_ij + b_j).
// Its maximiser is the same fixed point the alternating sweeps approach;
// damped Newton steps reach it where the sweeps crawl.
constexpr double kMaxLogStep = 30.0;

class ScalingNewton {
 public:
  ScalingNewton(std::size_t m, std::size_t n, std::span<const double> u, std::span<const double> v,
                std::vector<double> log_q)
      : m_(m), n_(n), u_(u), v_(v), log_q_(std::move(log_q)) {}

  // Returns the final marginal violation.
  double solve(std::vector<double>& a, std::vector<double>& b, double tolerance, int max_steps, int& steps) {
    const std::size_t dim = m_ + n_;
    Eigen::VectorXd grad(dim), x(dim), trial(dim);
    for (std::size_t i = 0; i < m_; ++i) x[i] = a[i];
    for (std::size_t j = 0; j < n_; ++j) x[m_ + j] = b[j];
    double phi = objective(x, &grad);
    double err = grad.cwiseAbs().maxCoeff();
    Eigen::MatrixXd hess(dim, dim);
    while (err >= tolerance && steps < max_steps) {
      ++steps;
      hess.setZero();
      for (std::size_t i = 0; i < m_; ++i)
        for (std::size_t j = 0; j < n_; ++j) {
          double p = entry(x, i, j);
          hess(i, i) += p;
          hess(m_ + j, m_ + j) += p;
          hess(i, m_ + j) = p;
          hess(m_ + j, i) = p;
        }
      // The reduced Hessian is singular along (1, -1) on every connected
      // block of the plan; a small ridge picks the minimum-norm step.
      double ridge = 1e-12 * std::max(1.0, hess.diagonal().maxCoeff());
      hess.diagonal().array() += ridge;
      Eigen::VectorXd dir = hess.ldlt().solve(grad);
      if (!dir.allFinite()) break;
      // Blocks coupled only through entries that underflow look flat to the
      // solve, so bound each step in log space.
      double longest = dir.cwiseAbs().maxCoeff();
      if (longest > kMaxLogStep) dir *= kMaxLogStep / longest;
      double slope = grad.dot(dir);
      double t = 1.0;
      bool accepted = false;
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        trial = x + t * dir;
        double next = objective(trial, nullptr);
        if (std::isfinite(next) && next >= phi + 1e-4 * t * slope) {
          x = trial;
          phi = next;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      phi = objective(x, &grad);
      err = grad.cwiseAbs().maxCoeff();
    }
    for (std::size_t i = 0; i < m_; ++i) a[i] = x[i];
    for (std::size_t j = 0; j < n_; ++j) b[j] = x[m_ + j];
    return err;
  }

 private:
  double entry(const Eigen::VectorXd& x, std::size_t i, std::size_t j) const {
    if (u_[i] == 0.0 || v_[j] == 0.0) return 0.0;
    return std::exp(x[i] + log_q_[i * n_ + j] + x[m_ + j]);
  }

  double objective(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    double phi = 0.0;
    if (grad) grad->setZero();
    for (std::size_t i = 0; i < m_; ++i) {
      if (u_[i] > 0.0) phi += u_[i] * x[i];
      if (grad) (*grad)[i] = u_[i];
    }
    for (std::size_t j = 0; j < n_; ++j) {
      if (v_[j] > 0.0) phi += v_[j] * x[m_ + j];
      if (grad) (*grad)[m_ + j] = v_[j];
    }
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < n_; ++j) {
        double p = entry(x, i, j);
        phi -= p;
        if (grad) {
          (*grad)[i] -= p;
          (*grad)[m_ + j] -= p;
        }
      }
    return phi;
  }

  std::size_t m_, n_;
  std::span<const double> u_, v_;
  std::vector<double> log_q_;
};

}  // namespace

SinkhornResult sinkhorn_plan(const CostMatrix& cost, std::span<const double> u, std::span<const double> v,
                             const SinkhornConfig& cfg) {
  cfg.validate();
  const Tensor& c = cost.entries();
  const std::size_t m = c.rows(), n = c.cols();
  if (u.size() != m || v.size() != n) {
    fail(ErrorCode::kDimensionMismatch, "sinkhorn: weight vectors must match the cost matrix shape");
  }
  validate_weights(u, "sinkhorn source weights");
  validate_weights(v, "sinkhorn target weights");

  double c_max = 0.0;
  for (double x : c.values()) c_max = std::max(c_max, x);
  // After t proximal steps Q carries the kernel to the power t, so the plan
  // entries decay like exp(-t C / beta).
  const double exponent = static_cast<double>(cfg.outer_steps) * c_max / cfg.beta;
  const bool log_mode = cfg.log_domain == SinkhornConfig::LogDomain::kAlways ||
                        (cfg.log_domain == SinkhornConfig::LogDomain::kAuto && exponent > kLinearExponentLimit);

  Iterate it{m, n, u, v, {}, {}, {}, {}, {}, {}};
  it.kernel.resize(m * n);
  it.q.resize(m * n);
  it.delta.assign(m, log_mode ? 0.0 : 1.0);
  it.scratch.resize(std::max(m, n));
  if (log_mode) {
    for (std::size_t i = 0; i < m * n; ++i) it.kernel[i] = -c[i] / cfg.beta;
    it.plan.assign(m * n, 0.0);
    it.sigma.assign(n, -std::log(static_cast<double>(n)));
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      bool all_underflow = true;
      for (std::size_t j = 0; j < n; ++j) {
        double k = std::exp(-c.at(i, j) / cfg.beta);
        if (k >= std::numeric_limits<double>::min()) all_underflow = false;
        it.kernel[i * n + j] = std::max(k, kKernelFloor);
      }
      if (all_underflow) {
        std::ostringstream os;
        os << "sinkhorn: exp(-C/beta) underflows on every entry of row " << i << " (beta=" << cfg.beta << ")";
        fail(ErrorCode::kNumericalUnderflow, os.str());
      }
    }
    it.plan.assign(m * n, 1.0);
    it.sigma.assign(n, 1.0 / static_cast<double>(n));
  }

  std::vector<double> plan(m * n);
  int sweeps = 0;
  auto sweep = [&] {
    if (log_mode) log_sweep(it); else linear_sweep(it);
    ++sweeps;
  };
  // plan = diag(delta) Q diag(sigma); also refreshes the linear-scale copy.
  auto assemble = [&] {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        std::size_t k = i * n + j;
        if (log_mode) {
          it.plan[k] = it.delta[i] + it.q[k] + it.sigma[j];
          if (std::isnan(it.plan[k])) it.plan[k] = kNegInf;
          plan[k] = std::exp(it.plan[k]);
        } else {
          it.plan[k] = it.delta[i] * it.q[k] * it.sigma[j];
          plan[k] = it.plan[k];
        }
        if (!std::isfinite(plan[k])) {
          fail(ErrorCode::kNumericalUnderflow,
               "sinkhorn: scaling factors left the representable range (beta=" + std::to_string(cfg.beta) + ")");
        }
      }
  };
  auto violation = [&] { return marginal_violation(Tensor({m, n}, plan), u, v); };

  SinkhornResult result;
  for (int t = 0; t < cfg.outer_steps; ++t) {
    for (std::size_t k = 0; k < m * n; ++k) it.q[k] = log_mode ? it.kernel[k] + it.plan[k] : it.kernel[k] * it.plan[k];
    for (int l = 0; l < cfg.inner_steps; ++l) {
      sweep();
      assemble();
      if (violation() < cfg.marginal_tolerance) break;
    }
    result.distance_trace.push_back(transport_cost(c, Tensor({m, n}, plan)));
    ++result.outer_steps_run;
  }

  // Finishing phase on the last Q: plain sweeps first, then Newton steps on
  // the same scaling problem if the sweeps stall.
  double err = violation();
  int finishing = 0;
  while (err >= cfg.marginal_tolerance && finishing < kFinishingSweeps && sweeps < cfg.max_total_iterations) {
    sweep();
    assemble();
    err = violation();
    ++finishing;
  }
  if (err >= cfg.marginal_tolerance && sweeps < cfg.max_total_iterations) {
    std::vector<double> log_q(m * n), a(m), b(n);
    for (std::size_t k = 0; k < m * n; ++k) log_q[k] = log_mode ? it.q[k] : std::log(it.q[k]);
    for (std::size_t i = 0; i < m; ++i) a[i] = log_mode ? it.delta[i] : std::log(it.delta[i]);
    for (std::size_t j = 0; j < n; ++j) b[j] = log_mode ? it.sigma[j] : std::log(it.sigma[j]);
    ScalingNewton newton(m, n, u, v, log_q);
    newton.solve(a, b, cfg.marginal_tolerance, cfg.max_total_iterations, sweeps);
    for (std::size_t i = 0; i < m; ++i) it.delta[i] = log_mode ? a[i] : std::exp(a[i]);
    for (std::size_t j = 0; j < n; ++j) it.sigma[j] = log_mode ? b[j] : std::exp(b[j]);
    if (!log_mode) {
      // Recombine in log space so entries whose factors overflow separately stay finite.
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          std::size_t k = i * n + j;
          plan[k] = (u[i] == 0.0 || v[j] == 0.0) ? 0.0 : std::exp(a[i] + log_q[k] + b[j]);
        }
    } else {
      assemble();
    }
    err = violation();
    result.newton_finish = true;
  }
  if (err >= cfg.marginal_tolerance) {
    std::ostringstream os;
    os << "sinkhorn: marginal violation " << err << " still above tolerance " << cfg.marginal_tolerance
       << " after " << sweeps << " scaling iterations";
    fail(ErrorCode::kNonConvergence, os.str());
  }

  result.plan.entries = Tensor({m, n}, std::move(plan));
  result.distance = transport_cost(c, result.plan.entries);
  result.marginal_violation = err;
  result.inner_iterations = sweeps;
  result.log_domain = log_mode;
  return result;
}

std::size_t count_nonzeros(const Tensor& plan, double threshold) {
  std::size_t n = 0;
  for (double x : plan.values()) n += x > threshold ? 1 : 0;
  return n;
}

Var ot_loss(Var z_image, Var z_audio, const SinkhornConfig& cfg, SinkhornResult* plan_out) {
  Var sim = cosine_similarity_matrix(z_image, z_audio);
  Var cost = add_scalar(scale(sim, -1.0), 1.0);
  std::vector<double> clipped(cost.value().data());
  for (double& x : clipped) x = std::clamp(x, 0.0, 2.0);
  CostMatrix c(Tensor(cost.shape(), std::move(clipped)));
  auto u = uniform_weights(c.rows());
  auto v = uniform_weights(c.cols());
  SinkhornResult solved = sinkhorn_plan(c, u, v, cfg);
  Var loss = frobenius_dot(cost, solved.plan.entries);
  if (plan_out) *plan_out = std::move(solved);
  return loss;
}

double frozen_plan_loss(const Tensor& z_image, const Tensor& z_audio, const Tensor& plan) {
  Tensor sim = cosine_similarity_matrix(z_image, z_audio);
  double s = 0.0;
  for (std::size_t i = 0; i < sim.size(); ++i) s += (1.0 - sim[i]) * plan[i];
  return s;
}

Var frozen_plan_loss(Var z_image, Var z_audio, const Tensor& plan) {
  Var cost = add_scalar(scale(cosine_similarity_matrix(z_image, z_audio), -1.0), 1.0);
  return frobenius_dot(cost, plan);
}

}  // namespace avalign
