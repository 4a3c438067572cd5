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

#include <wnnsfm/admm.hpp>
#include <wnnsfm/lm.hpp>

namespace wnnsfm {

struct FactorSolveResult {
  Factorization fact;
  SolveTrace trace;
  bool converged = false;
  bool stalled = false;
  double objective = 0.0;
  double data_term = 0.0;
  double reg_term = 0.0;
  Index rank = 0;
  Index lm_iterations = 0;
  Index lm_accepted = 0;
};

/// Second-order refinement of sum_i a_i gamma_i(B, C) + |A vec(BC^T) - b|^2
/// from fact0. `a` must have one weight per factor column.
inline FactorSolveResult lm_refine(const AffineMap& op, const WeightVector& a,
                                   const Factorization& fact0,
                                   const LmConfig& cfg = {},
                                   const TraceClock& clock = TraceClock::wall()) {
  const LowRankProblem problem(op, a, fact0.width());
  FactorSolveResult out;
  const LmResult lm =
      levenberg_marquardt(problem, pack_factors(fact0), cfg, out.trace, clock);
  out.fact = unpack_factors(lm.z, op.rows(), op.cols(), fact0.width());
  out.converged = lm.converged;
  out.stalled = lm.stalled;
  out.objective = lm.objective;
  out.data_term = lm.data_term;
  out.reg_term = lm.reg_term;
  out.rank = problem.rank(lm.z);
  out.lm_iterations = lm.iterations;
  out.lm_accepted = lm.accepted;
  return out;
}

struct CombinedResult {
  FactorSolveResult refined;
  AdmmResult admm;
  bool handoff_truncated = false;
  /// Concatenated ADMM and LM trace (phase column "admm" / "lm").
  SolveTrace trace;
};

/// ADMM until it converges or stalls, then LM from the balanced
/// factorization of the ADMM solution.
inline CombinedResult combined_solve(const AffineMap& op, const WeightVector& a,
                                     Index p, const AdmmConfig& admm_cfg = {},
                                     const LmConfig& lm_cfg = {},
                                     const TraceClock& clock = TraceClock::wall()) {
  CombinedResult out;
  out.admm = admm_solve(op, a, p, admm_cfg, clock);
  const BalancedFactorization start = balanced_factor_from_svd(out.admm.X, p);
  out.handoff_truncated = start.truncated;
  out.refined = lm_refine(op, a.resized(p), start.fact, lm_cfg, clock);
  out.trace.append(out.admm.trace);
  out.trace.append(out.refined.trace);
  return out;
}

}  // namespace wnnsfm
