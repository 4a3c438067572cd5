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

#pragma once

#include <wnnsfm/core.hpp>
#include <wnnsfm/penalty.hpp>
#include <wnnsfm/pose.hpp>
#include <wnnsfm/trace.hpp>

#include <Eigen/Cholesky>

#include <concepts>

namespace wnnsfm {

struct LmConfig {
  double lambda0 = 1e-4;
  double alpha = 2.0;
  Index max_iters = 500;
  double rel_tol = 1e-9;
  Index max_rejects = 30;
  /// A step is accepted when the actual decrease exceeds min_gain times
  /// the decrease predicted by the linearized model; 0 accepts any strict
  /// decrease.
  double min_gain = 1e-3;

  void validate() const {
    if (!(lambda0 > 0.0)) throw ParameterError("LmConfig: lambda0 must be > 0");
    if (!(alpha > 1.0)) throw ParameterError("LmConfig: alpha must be > 1");
    if (max_iters < 0) throw ParameterError("LmConfig: max_iters < 0");
    if (!(rel_tol >= 0.0)) throw ParameterError("LmConfig: rel_tol < 0");
    if (max_rejects < 1) throw ParameterError("LmConfig: max_rejects < 1");
    if (!(min_gain >= 0.0 && min_gain < 1.0))
      throw ParameterError("LmConfig: min_gain must lie in [0, 1)");
  }
};

/// Residual vector and (optionally) its Jacobian at a stacked state z.
struct LmEvaluation {
  Vector r;
  SparseMatrix J;
  double data_term = 0.0;
  double reg_term = 0.0;
};

template <class P>
concept LmProblem = requires(const P& p, const Vector& z, bool jac) {
  { p.evaluate(z, jac) } -> std::convertible_to<LmEvaluation>;
  { p.rank(z) } -> std::convertible_to<Index>;
};

struct LmResult {
  Vector z;
  bool converged = false;
  bool stalled = false;
  Index iterations = 0;
  Index accepted = 0;
  Index rejected = 0;
  double initial_objective = 0.0;
  double objective = 0.0;
  double data_term = 0.0;
  double reg_term = 0.0;
};

/// Levenberg-Marquardt with identity damping:
///   z~ = z - (J^T J + lambda I)^{-1} J^T r,
/// accepted when |r(z~)|^2 < |r(z)|^2 by more than min_gain times the
/// predicted decrease (lambda /= alpha), otherwise lambda *= alpha. One trace row is written for the start point and for
/// every accepted step, so the trace objective is strictly decreasing.
template <LmProblem Problem>
LmResult levenberg_marquardt(const Problem& problem, Vector z,
                             const LmConfig& cfg, SolveTrace& trace,
                             const TraceClock& clock,
                             const std::string& phase = "lm") {
  cfg.validate();
  LmResult result;
  LmEvaluation eval = problem.evaluate(z, true);
  double error = eval.r.squaredNorm();
  result.initial_objective = error;
  trace.append({phase, 0, clock.elapsed(), error, eval.data_term,
                eval.reg_term, problem.rank(z)});

  double lambda = cfg.lambda0;
  const double lambda_cap = 1e12 * cfg.lambda0;
  Index consecutive_rejects = 0;
  Matrix JtJ;
  Vector g;
  bool have_system = false;
  for (Index k = 1; k <= cfg.max_iters; ++k) {
    result.iterations = k;
    if (!have_system) {
      JtJ = Matrix(SparseMatrix(eval.J.transpose()) * eval.J);
      g = eval.J.transpose() * eval.r;
      have_system = true;
    }
    Matrix system = JtJ;
    system.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success) {
      lambda *= cfg.alpha;
      if (lambda > lambda_cap) {
        result.stalled = true;
        break;
      }
      continue;
    }
    const Vector step = llt.solve(g);
    // |r|^2 - |r - J step|^2 = step^T J^T J step + 2 lambda |step|^2.
    const double predicted =
        step.dot(JtJ * step) + 2.0 * lambda * step.squaredNorm();
    const Vector z_new = z - step;
    LmEvaluation trial = problem.evaluate(z_new, false);
    const double new_error = trial.r.squaredNorm();
    if (new_error < error && error - new_error > cfg.min_gain * predicted) {
      const double decrease = error - new_error;
      z = z_new;
      lambda /= cfg.alpha;
      consecutive_rejects = 0;
      ++result.accepted;
      const double previous = error;
      error = new_error;
      eval = problem.evaluate(z, true);
      have_system = false;
      trace.append({phase, k, clock.elapsed(), error, eval.data_term,
                    eval.reg_term, problem.rank(z)});
      if (decrease <= cfg.rel_tol * previous) {
        result.converged = true;
        break;
      }
    } else {
      ++result.rejected;
      ++consecutive_rejects;
      lambda *= cfg.alpha;
      if (lambda > lambda_cap) {
        result.stalled = true;
        break;
      }
      if (consecutive_rejects >= cfg.max_rejects) {
        // No decrease available at any tried damping: a stationary point
        // to working precision.
        result.converged = true;
        break;
      }
    }
  }
  result.z = std::move(z);
  result.objective = error;
  result.data_term = eval.data_term;
  result.reg_term = eval.reg_term;
  return result;
}

/// sqrt(a_k / 2) per factor column.
inline Vector regularizer_scales(const WeightVector& a, Index p) {
  if (a.size() != p)
    throw DimensionError("regularizer: " + std::to_string(a.size()) +
                         " weights for " + std::to_string(p) + " columns");
  return (0.5 * a.values()).cwiseSqrt();
}

/// Appends the regularizer rows diag(s) (x) I on vec(B) (m x p) starting at
/// row `row0` / column `col0`, and I (x) diag(s) on vec(C^T) (p x n)
/// starting at row `row0 + m p` / column `colC0`.
inline void append_regularizer_rows(std::vector<Triplet>& trips, Index row0,
                                    Index col0, Index colC0, Index m, Index n,
                                    const Vector& s) {
  const Index p = s.size();
  for (Index k = 0; k < p; ++k)
    for (Index i = 0; i < m; ++i)
      trips.emplace_back(row0 + i + m * k, col0 + i + m * k, s[k]);
  const Index rowC0 = row0 + m * p;
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < p; ++k)
      trips.emplace_back(rowC0 + k + p * j, colC0 + k + p * j, s[k]);
}

inline Vector pack_factors(const Factorization& fact) {
  const Index mp = fact.B().size();
  Vector z(mp + fact.C().size());
  z.head(mp) = vec(fact.B());
  z.tail(fact.C().size()) = vec(fact.C().transpose());
  return z;
}

inline Factorization unpack_factors(const Vector& z, Index m, Index n,
                                    Index p) {
  if (z.size() < m * p + n * p)
    throw DimensionError("unpack_factors: state vector too short");
  Matrix B = unvec(z.head(m * p), m, p);
  Matrix Ct = unvec(z.segment(m * p, p * n), p, n);
  return Factorization(std::move(B), Ct.transpose());
}

struct JacobianResidual {
  SparseMatrix J;
  Vector r;
};

/// Residual r = (A vec(B C^T) - b; (diag(s) (x) I) vec B; (I (x) diag(s))
/// vec C^T), s = sqrt(a/2), and its Jacobian with respect to
/// z = [vec B; vec C^T]: blocks A (C (x) I), A (I (x) B), and the two
/// diagonal regularizer blocks.
inline JacobianResidual assemble_jacobian_lr(const AffineMap& op,
                                             const WeightVector& a,
                                             const Factorization& fact,
                                             bool with_jacobian = true) {
  const Index m = op.rows(), n = op.cols(), p = fact.width();
  if (fact.rows() != m || fact.cols() != n)
    throw DimensionError("assemble_jacobian_lr: factor shapes " +
                         std::to_string(fact.rows()) + "x" +
                         std::to_string(fact.cols()) +
                         " do not match the operator");
  const Vector s = regularizer_scales(a, p);
  const SparseMatrix& A = op.A();
  const Index nd = A.rows();
  const Index rows = nd + m * p + n * p;
  const Index cols = m * p + n * p;
  const Matrix& B = fact.B();
  const Matrix& C = fact.C();

  JacobianResidual out;
  out.r.resize(rows);
  out.r.head(nd) = A * vec(fact.product()) - op.b();
  out.r.segment(nd, m * p) = vec(B * s.asDiagonal());
  out.r.tail(n * p) = vec(s.asDiagonal() * C.transpose());
  if (!with_jacobian) return out;

  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(2 * p * A.nonZeros() + cols));
  for (Index idx = 0; idx < A.outerSize(); ++idx) {
    const Index row_x = idx % m, col_x = idx / m;
    for (SparseMatrix::InnerIterator it(A, idx); it; ++it) {
      for (Index k = 0; k < p; ++k) {
        trips.emplace_back(it.row(), row_x + m * k, it.value() * C(col_x, k));
        trips.emplace_back(it.row(), m * p + k + p * col_x,
                           it.value() * B(row_x, k));
      }
    }
  }
  append_regularizer_rows(trips, nd, 0, m * p, m, n, s);
  out.J.resize(rows, cols);
  out.J.setFromTriplets(trips.begin(), trips.end());
  return out;
}

/// Bilinear least-squares problem in z = [vec B; vec C^T].
class LowRankProblem {
 public:
  LowRankProblem(const AffineMap& op, WeightVector a, Index p)
      : op_(op), a_(std::move(a)), p_(p) {
    regularizer_scales(a_, p_);  // validates the length
  }

  Index m() const { return op_.rows(); }
  Index n() const { return op_.cols(); }
  Index p() const { return p_; }

  LmEvaluation evaluate(const Vector& z, bool with_jacobian) const {
    const Factorization fact = unpack_factors(z, m(), n(), p_);
    JacobianResidual jr = assemble_jacobian_lr(op_, a_, fact, with_jacobian);
    LmEvaluation e;
    const Index nd = op_.A().rows();
    e.data_term = jr.r.head(nd).squaredNorm();
    e.reg_term = jr.r.tail(jr.r.size() - nd).squaredNorm();
    e.r = std::move(jr.r);
    e.J = std::move(jr.J);
    return e;
  }

  Index rank(const Vector& z) const {
    const Factorization fact = unpack_factors(z, m(), n(), p_);
    return numerical_rank(product_singular_values(fact.B(), fact.C()));
  }

 private:
  const AffineMap& op_;
  WeightVector a_;
  Index p_;
};

}  // namespace wnnsfm
