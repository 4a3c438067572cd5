// Copyright 2026 The wnnsfm Authors. All Rights Reserved.
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

// First-order solver for min_X a^T sigma(X) + |A vec(X) - b|^2.
//
// Single split X = Z with scaled dual U:
//   X <- argmin |A x - b|^2 + rho/2 |x - (z - u)|^2
//   Z <- argmin a^T sigma(Z) + rho/2 |Z - (X + U)|^2  (wnn_prox, weights 2a/rho)
//   U <- U + X - Z
// rho grows geometrically up to a cap; U is rescaled with it.

#pragma once

#include <wnnsfm/core.hpp>
#include <wnnsfm/penalty.hpp>
#include <wnnsfm/pose.hpp>
#include <wnnsfm/trace.hpp>

#include <Eigen/SparseCholesky>

#include <concepts>
#include <limits>

namespace wnnsfm {

struct AdmmConfig {
  /// Initial penalty; 0 selects min(1, 20 max(a) / sigma_1(X0)), so the
  /// first shrinkage step removes at least 5% of the leading singular value.
  double rho = 0.0;
  double rho_growth = 1.05;
  double rho_max = 1e3;
  Index max_iters = 3000;
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  Index stall_window = 10;
  double stall_tol = 1e-6;

  void validate() const {
    if (!(rho >= 0.0)) throw ParameterError("AdmmConfig: rho must be >= 0");
    if (!(rho_growth >= 1.0))
      throw ParameterError("AdmmConfig: rho_growth must be >= 1");
    if (!(rho_max > 0.0) || !(rho_max >= rho))
      throw ParameterError("AdmmConfig: rho_max must be > 0 and >= rho");
    if (max_iters < 0) throw ParameterError("AdmmConfig: max_iters < 0");
    if (!(primal_tol > 0.0) || !(dual_tol > 0.0) || !(stall_tol > 0.0))
      throw ParameterError("AdmmConfig: tolerances must be > 0");
    if (stall_window < 1)
      throw ParameterError("AdmmConfig: stall_window must be >= 1");
  }
};

struct AdmmResult {
  Matrix X;
  SolveTrace trace;
  bool converged = false;
  bool stalled = false;
  Index iterations = 0;
  double objective = 0.0;
  double data_term = 0.0;
  double reg_term = 0.0;
  Index rank = 0;
};

/// Linear data model for the ADMM core: x enters through A x; `target(x)`
/// returns the right-hand side after eliminating any auxiliary unknowns
/// that are solved in closed form for the given x.
template <class M>
concept AdmmModel = requires(const M& m, const Vector& x) {
  { m.design() } -> std::convertible_to<const SparseMatrix&>;
  { m.target(x) } -> std::convertible_to<Vector>;
  { m.shape_rows() } -> std::convertible_to<Index>;
  { m.shape_cols() } -> std::convertible_to<Index>;
};

/// ADMM model with a fixed right-hand side.
class FixedTargetModel {
 public:
  explicit FixedTargetModel(const AffineMap& op) : op_(op) {}
  const SparseMatrix& design() const { return op_.A(); }
  Vector target(const Vector&) const { return op_.b(); }
  Index shape_rows() const { return op_.rows(); }
  Index shape_cols() const { return op_.cols(); }

 private:
  const AffineMap& op_;
};

/// `rank_cap` >= 0 restricts Z to rank <= rank_cap.
template <AdmmModel Model>
AdmmResult admm_core(const Model& model, const WeightVector& a, Index p,
                     const Matrix& X0, const AdmmConfig& cfg,
                     const TraceClock& clock, const std::string& phase,
                     Index rank_cap = -1) {
  cfg.validate();
  const Index rows = model.shape_rows(), cols = model.shape_cols();
  if (X0.rows() != rows || X0.cols() != cols)
    throw DimensionError("admm: initial iterate has the wrong shape");
  const SparseMatrix& A = model.design();
  const Index n = rows * cols;
  if (p < 1) throw ParameterError("admm: p must be >= 1");
  // Every singular value is weighted; weights past a.size() reuse the last.
  const Vector full_weights = a.expanded(std::min(rows, cols));

  Vector z_sigma = singular_values(X0).values();
  double rho = cfg.rho;
  if (rho == 0.0) {
    const double top = z_sigma.size() > 0 ? z_sigma[0] : 0.0;
    const double amax = full_weights.size() > 0 ? full_weights.maxCoeff() : 0.0;
    // Small weights against a large spectrum need a smaller penalty, or the
    // shrinkage per step is negligible.
    rho = top > 0.0 && amax > 0.0 ? std::min(1.0, 20.0 * amax / top) : 1.0;
    rho = std::min(rho, cfg.rho_max);
  }

  const SparseMatrix AtA = SparseMatrix(A.transpose()) * A;
  SparseMatrix identity(n, n);
  identity.setIdentity();
  Eigen::SimplicialLLT<SparseMatrix> llt;
  auto factorize = [&](double r) {
    const SparseMatrix system = 2.0 * AtA + r * identity;
    llt.factorize(system);
    if (llt.info() != Eigen::Success)
      throw Error("admm: x-update factorization failed");
  };
  llt.analyzePattern(2.0 * AtA + rho * identity);
  factorize(rho);

  auto evaluate = [&](const Vector& z, const Vector& sigma, double& data,
                      double& reg) {
    data = (A * z - model.target(z)).squaredNorm();
    reg = full_weights.head(sigma.size()).dot(sigma);
  };

  Vector x = vec(X0);
  Vector z = x;
  Vector u = Vector::Zero(n);

  AdmmResult result;
  double data = 0.0, reg = 0.0;
  evaluate(z, z_sigma, data, reg);
  double best_objective = data + reg;
  Vector best_z = z;
  Vector best_sigma = z_sigma;
  std::vector<double> history{best_objective};
  result.trace.append({phase, 0, clock.elapsed(), data + reg, data, reg,
                       numerical_rank(z_sigma)});

  Vector target = model.target(x);
  for (Index k = 1; k <= cfg.max_iters; ++k) {
    const Vector rhs = 2.0 * (A.transpose() * target) + rho * (z - u);
    x = llt.solve(rhs);
    target = model.target(x);

    const Matrix shifted = unvec(x + u, rows, cols);
    const WeightVector step_weights(full_weights * (2.0 / rho));
    ProxResult prox = wnn_prox_with_spectrum(shifted, step_weights, rank_cap);
    const Vector z_prev = z;
    z = vec(prox.X);
    z_sigma = std::move(prox.sigma);
    u += x - z;

    const double primal = (x - z).norm();
    const double dual = rho * (z - z_prev).norm();
    evaluate(z, z_sigma, data, reg);
    const double objective = data + reg;
    result.trace.append({phase, k, clock.elapsed(), objective, data, reg,
                         numerical_rank(z_sigma)});
    result.iterations = k;
    if (objective < best_objective) {
      best_objective = objective;
      best_z = z;
      best_sigma = z_sigma;
    }
    history.push_back(objective);

    if (primal < cfg.primal_tol && dual < cfg.dual_tol) {
      result.converged = true;
      break;
    }
    if (k >= cfg.stall_window) {
      const double old = history[static_cast<std::size_t>(k - cfg.stall_window)];
      const double denom = std::max(std::abs(old),
                                    std::numeric_limits<double>::min());
      // Minor progress in either direction.
      if (std::abs(old - objective) / denom < cfg.stall_tol) {
        result.stalled = true;
        break;
      }
    }
    if (cfg.rho_growth > 1.0 && rho < cfg.rho_max) {
      const double next = std::min(rho * cfg.rho_growth, cfg.rho_max);
      u *= rho / next;
      rho = next;
      factorize(rho);
    }
  }
  if (!result.converged && result.iterations > 0 && !result.stalled)
    result.stalled = true;  // iteration limit

  const Vector& chosen = result.converged ? z : best_z;
  const Vector& chosen_sigma = result.converged ? z_sigma : best_sigma;
  result.X = unvec(chosen, rows, cols);
  evaluate(chosen, chosen_sigma, data, reg);
  result.data_term = data;
  result.reg_term = reg;
  result.objective = data + reg;
  result.rank = numerical_rank(chosen_sigma);
  // The returned iterate, so the last row always describes the output.
  result.trace.append({phase + "-final", result.iterations, clock.elapsed(),
                       result.objective, data, reg, result.rank});
  return result;
}

/// ADMM for min_X a^T sigma(X) + |A vec(X) - b|^2, started from the
/// regularization-free minimum-norm solution.
inline AdmmResult admm_solve(const AffineMap& op, const WeightVector& a,
                             Index p, const AdmmConfig& cfg = {},
                             const TraceClock& clock = TraceClock::wall()) {
  const Matrix X0 = min_norm_solution(op);
  return admm_core(FixedTargetModel(op), a, p, X0, cfg, clock, "admm");
}

inline AdmmResult admm_solve_from(const AffineMap& op, const WeightVector& a,
                                  Index p, const Matrix& X0,
                                  const AdmmConfig& cfg = {},
                                  const TraceClock& clock = TraceClock::wall()) {
  return admm_core(FixedTargetModel(op), a, p, X0, cfg, clock, "admm");
}

}  // namespace wnnsfm
