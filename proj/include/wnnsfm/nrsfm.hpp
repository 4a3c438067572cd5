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

// Non-rigid structure recovery with known camera rotations.
//
// The structure of frame i is row i of the F x 3P matrix X# =
// [x_1..x_P, y_1..y_P, z_1..z_P]; rank(X#) <= K for a K-shape basis. The
// projected structure is W = R g(X#) + t 1^T with g the reshape to 3F x P
// and R = blkdiag(R_1, ..., R_F). The objective is
//   sum_k a_k (|B_k|^2 + |C_k|^2) / 2 + pOSE(R g(B C^T) + t 1^T).

#pragma once

#include <wnnsfm/admm.hpp>
#include <wnnsfm/lm.hpp>
#include <wnnsfm/observations.hpp>
#include <wnnsfm/penalty.hpp>
#include <wnnsfm/pose.hpp>

#include <Eigen/Geometry>

#include <filesystem>
#include <vector>

namespace wnnsfm {

using Rotation = Eigen::Matrix3d;

/// Index tables between vec(X#) (F x 3P) and vec(X) (3F x P).
class ReshapeMap {
 public:
  ReshapeMap(Index frames, Index points) : frames_(frames), points_(points) {
    if (frames < 1 || points < 1)
      throw ParameterError("ReshapeMap: F and P must be >= 1");
    const Index n = 3 * frames * points;
    to_structure_.resize(static_cast<std::size_t>(n));
    to_sharp_.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < frames; ++i)
      for (Index c = 0; c < 3; ++c)
        for (Index j = 0; j < points; ++j) {
          const Index sharp = i + frames * (c * points + j);
          const Index structure = (3 * i + c) + 3 * frames * j;
          to_structure_[sharp] = structure;
          to_sharp_[structure] = sharp;
        }
  }

  Index frames() const noexcept { return frames_; }
  Index points() const noexcept { return points_; }
  Index size() const noexcept { return 3 * frames_ * points_; }

  /// vec(X#) index -> vec(g(X#)) index.
  Index forward(Index sharp) const { return to_structure_[sharp]; }
  /// vec(X) index -> vec(g^-1(X)) index.
  Index backward(Index structure) const { return to_sharp_[structure]; }

 private:
  Index frames_;
  Index points_;
  std::vector<Index> to_structure_;
  std::vector<Index> to_sharp_;
};

/// g^-1: 3F x P structure to the F x 3P matrix X#.
inline Matrix reshape_to_sharp(const Matrix& X) {
  if (X.rows() % 3 != 0)
    throw DimensionError("reshape_to_sharp: row count must be a multiple of 3");
  const Index F = X.rows() / 3, P = X.cols();
  Matrix S(F, 3 * P);
  for (Index i = 0; i < F; ++i)
    for (Index c = 0; c < 3; ++c) S.block(i, c * P, 1, P) = X.row(3 * i + c);
  return S;
}

/// g: F x 3P to 3F x P.
inline Matrix reshape_from_sharp(const Matrix& S) {
  if (S.cols() % 3 != 0)
    throw DimensionError(
        "reshape_from_sharp: column count must be a multiple of 3");
  const Index F = S.rows(), P = S.cols() / 3;
  Matrix X(3 * F, P);
  for (Index i = 0; i < F; ++i)
    for (Index c = 0; c < 3; ++c) X.row(3 * i + c) = S.block(i, c * P, 1, P);
  return X;
}

/// Permutation Gamma_g with Gamma_g vec(X#) = vec(g(X#)).
inline SparseMatrix reshape_permutation(Index frames, Index points) {
  const ReshapeMap map(frames, points);
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(map.size()));
  for (Index s = 0; s < map.size(); ++s) trips.emplace_back(map.forward(s), s, 1.0);
  SparseMatrix G(map.size(), map.size());
  G.setFromTriplets(trips.begin(), trips.end());
  return G;
}

/// Structure of frame i (3 x P) taken from row i of X#.
inline Matrix frame_structure(const Matrix& sharp, Index frame) {
  const Index P = sharp.cols() / 3;
  Matrix S(3, P);
  for (Index c = 0; c < 3; ++c) S.row(c) = sharp.block(frame, c * P, 1, P);
  return S;
}

inline void validate_rotation(const Rotation& R, Index frame) {
  const double ortho =
      (R.transpose() * R - Rotation::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho <= 1e-8) || !(std::abs(R.determinant() - 1.0) <= 1e-6))
    throw ValidationError("rotation " + std::to_string(frame) +
                          " is not a proper rotation");
}

/// Rotation file: `F`, then F blocks of three rows of three reals.
inline std::vector<Rotation> read_rotations(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!detail::next_content_line(in, line, line_no))
    throw ParseError(line_no, "missing frame count");
  auto head = detail::split(line);
  if (head.size() != 1) throw ParseError(line_no, "header must be 'F'");
  const Index F = detail::parse_index(head[0], line_no);
  if (F < 0) throw ParseError(line_no, "negative frame count");
  std::vector<Rotation> out(static_cast<std::size_t>(F));
  for (Index f = 0; f < F; ++f)
    for (Index r = 0; r < 3; ++r) {
      if (!detail::next_content_line(in, line, line_no))
        throw ParseError(line_no, "unexpected end of rotation file");
      auto tok = detail::split(line);
      if (tok.size() != 3) throw ParseError(line_no, "expected 3 reals");
      for (Index c = 0; c < 3; ++c)
        out[f](r, c) = detail::parse_real(tok[c], line_no);
    }
  if (detail::next_content_line(in, line, line_no))
    throw ParseError(line_no, "trailing content after rotations");
  for (Index f = 0; f < F; ++f) validate_rotation(out[f], f);
  return out;
}

inline std::vector<Rotation> load_rotations(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  return read_rotations(in);
}

inline void write_rotations(std::ostream& out, const std::vector<Rotation>& R) {
  out << R.size() << '\n';
  for (const auto& Ri : R)
    for (Index r = 0; r < 3; ++r)
      out << format_real(Ri(r, 0)) << ' ' << format_real(Ri(r, 1)) << ' '
          << format_real(Ri(r, 2)) << '\n';
}

inline void save_rotations(const std::filesystem::path& path,
                           const std::vector<Rotation>& R) {
  auto out = detail::open_for_write(path);
  write_rotations(out, R);
}

/// Structure file: `P`, then three rows of P reals (x, y, z).
inline Matrix read_structure(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!detail::next_content_line(in, line, line_no))
    throw ParseError(line_no, "missing point count");
  auto head = detail::split(line);
  if (head.size() != 1) throw ParseError(line_no, "header must be 'P'");
  const Index P = detail::parse_index(head[0], line_no);
  if (P < 0) throw ParseError(line_no, "negative point count");
  Matrix S(3, P);
  for (Index r = 0; r < 3; ++r) {
    if (!detail::next_content_line(in, line, line_no))
      throw ParseError(line_no, "unexpected end of structure file");
    auto tok = detail::split(line);
    if (static_cast<Index>(tok.size()) != P)
      throw ParseError(line_no, "expected " + std::to_string(P) + " reals");
    for (Index j = 0; j < P; ++j) S(r, j) = detail::parse_real(tok[j], line_no);
  }
  return S;
}

inline Matrix load_structure(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  return read_structure(in);
}

inline void write_structure(std::ostream& out, const Matrix& S) {
  out << S.cols() << '\n';
  for (Index r = 0; r < 3; ++r) {
    for (Index j = 0; j < S.cols(); ++j)
      out << (j ? " " : "") << format_real(S(r, j));
    out << '\n';
  }
}

inline void save_structure(const std::filesystem::path& path, const Matrix& S) {
  if (S.rows() != 3) throw DimensionError("save_structure: expected 3 rows");
  auto out = detail::open_for_write(path);
  write_structure(out, S);
}

/// Observations with known rotations, K shape bases and pOSE weight eta.
/// Precomputes the linear maps from vec(X#) and t to the residual.
class NrsfmProblem {
 public:
  NrsfmProblem(ObservationSet obs, std::vector<Rotation> rotations, Index K,
               double eta, double scale = 1.0)
      : obs_(std::move(obs)), rotations_(std::move(rotations)), K_(K) {
    if (static_cast<Index>(rotations_.size()) != obs_.frames())
      throw DimensionError("NrsfmProblem: " +
                           std::to_string(rotations_.size()) +
                           " rotations for " + std::to_string(obs_.frames()) +
                           " frames");
    if (K_ < 1) throw ParameterError("NrsfmProblem: K must be >= 1");
    for (std::size_t f = 0; f < rotations_.size(); ++f)
      validate_rotation(rotations_[f], static_cast<Index>(f));
    op_ = build_pose_operator(obs_, eta, scale);

    const Index F = frames(), P = points();
    // (I_P (x) blkdiag(R)) Gamma_g maps vec(X#) to vec(R g(X#)).
    const ReshapeMap map(F, P);
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(9 * F * P));
    for (Index j = 0; j < P; ++j)
      for (Index i = 0; i < F; ++i)
        for (Index c = 0; c < 3; ++c)
          for (Index d = 0; d < 3; ++d) {
            const Index out = (3 * i + c) + 3 * F * j;
            const Index in = map.backward((3 * i + d) + 3 * F * j);
            trips.emplace_back(out, in, rotations_[i](c, d));
          }
    SparseMatrix lift(3 * F * P, 3 * F * P);
    lift.setFromTriplets(trips.begin(), trips.end());
    structure_design_ = op_.A() * lift;

    trips.clear();
    for (Index j = 0; j < P; ++j)
      for (Index r = 0; r < 3 * F; ++r) trips.emplace_back(r + 3 * F * j, r, 1.0);
    SparseMatrix spread(3 * F * P, 3 * F);
    spread.setFromTriplets(trips.begin(), trips.end());
    translation_design_ = op_.A() * spread;
    translation_pinv_ = BlockPseudoInverse(translation_design_);
  }

  Index frames() const noexcept { return obs_.frames(); }
  Index points() const noexcept { return obs_.points(); }
  Index K() const noexcept { return K_; }
  double eta() const noexcept { return op_.eta(); }
  const ObservationSet& observations() const noexcept { return obs_; }
  const std::vector<Rotation>& rotations() const noexcept { return rotations_; }
  const PoseOperator& pose_operator() const noexcept { return op_; }
  /// A_X (I (x) R) Gamma_g, acting on vec(X#).
  const SparseMatrix& structure_design() const noexcept {
    return structure_design_;
  }
  /// A_X (1 (x) I), acting on t.
  const SparseMatrix& translation_design() const noexcept {
    return translation_design_;
  }

  /// W = R g(X#) + t 1^T.
  Matrix projected_structure(const Matrix& sharp, const Vector& t) const {
    check(sharp, t);
    Matrix X = reshape_from_sharp(sharp);
    for (Index i = 0; i < frames(); ++i) {
      X.middleRows(3 * i, 3) = rotations_[i] * X.middleRows(3 * i, 3);
      X.middleRows(3 * i, 3).colwise() += t.segment(3 * i, 3);
    }
    return X;
  }

  double data_loss(const Matrix& sharp, const Vector& t) const {
    return op_.loss(projected_structure(sharp, t));
  }

  /// Least-squares translation for a fixed X# (minimum norm when
  /// translation components are unobservable).
  Vector best_translation(const Vector& sharp_vec) const {
    return translation_pinv_.solve(op_.b() - structure_design_ * sharp_vec);
  }

 private:
  void check(const Matrix& sharp, const Vector& t) const {
    if (sharp.rows() != frames() || sharp.cols() != 3 * points())
      throw DimensionError("NrsfmProblem: X# must be F x 3P");
    if (t.size() != 3 * frames())
      throw DimensionError("NrsfmProblem: t must have 3F entries");
  }

  ObservationSet obs_;
  std::vector<Rotation> rotations_;
  Index K_;
  PoseOperator op_;
  SparseMatrix structure_design_;
  SparseMatrix translation_design_;
  BlockPseudoInverse translation_pinv_;
};

struct NrsfmSolution {
  Factorization fact;  // B: F x K, C: 3P x K
  Vector t;            // 3F

  Matrix sharp() const { return fact.product(); }
};

/// Closed-form minimum-norm solution of min_X pOSE(R X), X of size 3F x P.
inline Matrix nrsfm_closed_form(const NrsfmProblem& problem) {
  const PoseOperator& op = problem.pose_operator();
  const Index F = problem.frames(), P = problem.points();
  std::vector<Triplet> trips;
  for (Index j = 0; j < P; ++j)
    for (Index i = 0; i < F; ++i)
      for (Index c = 0; c < 3; ++c)
        for (Index d = 0; d < 3; ++d)
          trips.emplace_back((3 * i + c) + 3 * F * j, (3 * i + d) + 3 * F * j,
                             problem.rotations()[i](c, d));
  SparseMatrix Rblk(3 * F * P, 3 * F * P);
  Rblk.setFromTriplets(trips.begin(), trips.end());
  const BlockPseudoInverse pinv(SparseMatrix(op.A() * Rblk));
  return unvec(pinv.solve(op.b()), 3 * F, P);
}

/// a_i = xi / (sigma_i(g^-1(X0)) + eps), i = 1..K.
inline WeightVector weights_from_init(const Matrix& X0, Index K, double xi,
                                      double eps) {
  if (!(xi > 0.0) || !(eps > 0.0))
    throw ParameterError("weights_from_init: xi and eps must be > 0");
  if (K < 1) throw ParameterError("weights_from_init: K must be >= 1");
  const Vector sigma = singular_values(reshape_to_sharp(X0)).values();
  Vector a(K);
  for (Index i = 0; i < K; ++i)
    a[i] = xi / ((i < sigma.size() ? sigma[i] : 0.0) + eps);
  return WeightVector(std::move(a));
}

/// Residual and Jacobian for z = [vec B; vec C^T; t]: blocks
/// A_X (I (x) R) Gamma_g (C (x) I), A_X (I (x) R) Gamma_g (I (x) B),
/// A_X (1 (x) I) and the diagonal regularizer rows.
inline JacobianResidual assemble_jacobian_nrsfm(const NrsfmProblem& problem,
                                                const WeightVector& a,
                                                const NrsfmSolution& sol,
                                                bool with_jacobian = true) {
  const Index F = problem.frames(), P = problem.points();
  const Index K = sol.fact.width();
  if (sol.fact.rows() != F || sol.fact.cols() != 3 * P || sol.t.size() != 3 * F)
    throw DimensionError("assemble_jacobian_nrsfm: B must be F x K, C 3P x K, "
                         "t of length 3F");
  const Vector s = regularizer_scales(a, K);
  const PoseOperator& op = problem.pose_operator();
  const SparseMatrix& A = op.A();
  const Index nd = A.rows();
  const Index nB = F * K, nC = 3 * P * K;
  const Matrix& B = sol.fact.B();
  const Matrix& C = sol.fact.C();

  JacobianResidual out;
  out.r.resize(nd + nB + nC);
  out.r.head(nd) =
      A * vec(problem.projected_structure(sol.fact.product(), sol.t)) - op.b();
  out.r.segment(nd, nB) = vec(B * s.asDiagonal());
  out.r.tail(nC) = vec(s.asDiagonal() * C.transpose());
  if (!with_jacobian) return out;

  const Index m = 3 * F;
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(A.nonZeros() * (K + 3 * K + 1) +
                                         nB + nC));
  for (Index idx = 0; idx < A.outerSize(); ++idx) {
    const Index row = idx % m, j = idx / m;
    const Index i = row / 3, c = row % 3;
    const Rotation& R = problem.rotations()[i];
    for (SparseMatrix::InnerIterator it(A, idx); it; ++it) {
      const double v = it.value();
      for (Index k = 0; k < K; ++k) {
        double dB = 0.0;
        for (Index d = 0; d < 3; ++d) {
          dB += R(c, d) * C(d * P + j, k);
          trips.emplace_back(it.row(), nB + k + K * (d * P + j),
                             v * R(c, d) * B(i, k));
        }
        trips.emplace_back(it.row(), i + F * k, v * dB);
      }
      trips.emplace_back(it.row(), nB + nC + row, v);
    }
  }
  append_regularizer_rows(trips, nd, 0, nB, F, 3 * P, s);
  out.J.resize(nd + nB + nC, nB + nC + 3 * F);
  out.J.setFromTriplets(trips.begin(), trips.end());
  return out;
}

inline Vector pack_nrsfm(const NrsfmSolution& sol) {
  const Vector zf = pack_factors(sol.fact);
  Vector z(zf.size() + sol.t.size());
  z << zf, sol.t;
  return z;
}

inline NrsfmSolution unpack_nrsfm(const Vector& z, Index F, Index P, Index K) {
  const Index nf = F * K + 3 * P * K;
  return {unpack_factors(z.head(nf), F, 3 * P, K), z.tail(3 * F)};
}

class NrsfmLmProblem {
 public:
  NrsfmLmProblem(const NrsfmProblem& problem, WeightVector a)
      : problem_(problem), a_(std::move(a)) {
    regularizer_scales(a_, problem_.K());
  }

  LmEvaluation evaluate(const Vector& z, bool with_jacobian) const {
    const NrsfmSolution sol =
        unpack_nrsfm(z, problem_.frames(), problem_.points(), problem_.K());
    JacobianResidual jr =
        assemble_jacobian_nrsfm(problem_, a_, sol, with_jacobian);
    LmEvaluation e;
    const Index nd = problem_.pose_operator().A().rows();
    e.data_term = jr.r.head(nd).squaredNorm();
    e.reg_term = jr.r.tail(jr.r.size() - nd).squaredNorm();
    e.r = std::move(jr.r);
    e.J = std::move(jr.J);
    return e;
  }

  Index rank(const Vector& z) const {
    const NrsfmSolution sol =
        unpack_nrsfm(z, problem_.frames(), problem_.points(), problem_.K());
    return numerical_rank(
        product_singular_values(sol.fact.B(), sol.fact.C()));
  }

 private:
  const NrsfmProblem& problem_;
  WeightVector a_;
};

/// ADMM model on vec(X#); t is eliminated in closed form for each iterate.
class NrsfmAdmmModel {
 public:
  explicit NrsfmAdmmModel(const NrsfmProblem& problem) : problem_(problem) {}
  const SparseMatrix& design() const { return problem_.structure_design(); }
  Vector target(const Vector& x) const {
    return problem_.pose_operator().b() -
           problem_.translation_design() * problem_.best_translation(x);
  }
  Index shape_rows() const { return problem_.frames(); }
  Index shape_cols() const { return 3 * problem_.points(); }

 private:
  const NrsfmProblem& problem_;
};

struct NrsfmAdmmResult {
  AdmmResult admm;  // admm.X is X#, rank <= K
  Vector t;         // closed-form translation for admm.X
};

/// ADMM on X# restricted to rank K, t solved in closed form every
/// iteration, started from the closed-form structure.
inline NrsfmAdmmResult nrsfm_admm(const NrsfmProblem& problem,
                                  const WeightVector& a,
                                  const AdmmConfig& cfg = {},
                                  const TraceClock& clock = TraceClock::wall()) {
  const Index K = problem.K();
  const Matrix X0 = reshape_to_sharp(nrsfm_closed_form(problem));
  NrsfmAdmmResult out;
  out.admm = admm_core(NrsfmAdmmModel(problem), a.resized(K), K, X0, cfg, clock,
                       "admm", K);
  out.t = problem.best_translation(vec(out.admm.X));
  return out;
}

/// Balanced rank-K factorization of X# with translation t.
inline NrsfmSolution nrsfm_balanced_start(const Matrix& sharp, const Vector& t,
                                          Index K, bool* truncated = nullptr) {
  BalancedFactorization start = balanced_factor_from_svd(sharp, K);
  if (truncated) *truncated = start.truncated;
  return {std::move(start.fact), t};
}

struct NrsfmResult {
  NrsfmSolution solution;
  SolveTrace trace;
  AdmmResult admm;  // empty when the ADMM phase was skipped
  Vector admm_t;
  bool handoff_truncated = false;
  bool converged = false;
  bool stalled = false;
  double objective = 0.0;
  double data_term = 0.0;
  double reg_term = 0.0;
  Index rank = 0;
  Index lm_iterations = 0;
};

/// LM on z = [vec B; vec C^T; t] from `start`.
inline NrsfmResult nrsfm_refine(const NrsfmProblem& problem,
                                const WeightVector& a,
                                const NrsfmSolution& start,
                                const LmConfig& cfg = {},
                                const TraceClock& clock = TraceClock::wall()) {
  const NrsfmLmProblem lm_problem(problem, a.resized(problem.K()));
  NrsfmResult out;
  const LmResult lm =
      levenberg_marquardt(lm_problem, pack_nrsfm(start), cfg, out.trace, clock);
  out.solution =
      unpack_nrsfm(lm.z, problem.frames(), problem.points(), problem.K());
  out.converged = lm.converged;
  out.stalled = lm.stalled;
  out.objective = lm.objective;
  out.data_term = lm.data_term;
  out.reg_term = lm.reg_term;
  out.rank = lm_problem.rank(lm.z);
  out.lm_iterations = lm.iterations;
  return out;
}

/// ADMM (nrsfm_admm) followed by LM from the balanced factorization of
/// its output.
inline NrsfmResult nrsfm_solve(const NrsfmProblem& problem,
                               const WeightVector& a, const LmConfig& lm_cfg = {},
                               const AdmmConfig& admm_cfg = {},
                               const TraceClock& clock = TraceClock::wall()) {
  NrsfmAdmmResult first = nrsfm_admm(problem, a, admm_cfg, clock);
  bool truncated = false;
  const NrsfmSolution start = nrsfm_balanced_start(first.admm.X, first.t,
                                                   problem.K(), &truncated);
  NrsfmResult out = nrsfm_refine(problem, a, start, lm_cfg, clock);
  SolveTrace lm_trace = std::move(out.trace);
  out.trace = first.admm.trace;
  out.trace.append(lm_trace);
  out.stalled = out.stalled || first.admm.stalled;
  out.handoff_truncated = truncated;
  out.admm = std::move(first.admm);
  out.admm_t = std::move(first.t);
  return out;
}

/// Mean per-point distance between est and gt (both 3 x P). With `align`,
/// est is first mapped by the least-squares similarity transform onto gt.
inline double reconstruction_error(const Matrix& est, const Matrix& gt,
                                   bool align) {
  if (est.rows() != 3 || gt.rows() != 3 || est.cols() != gt.cols())
    throw DimensionError("reconstruction_error: expected matching 3 x P inputs");
  const Index P = gt.cols();
  if (P == 0) return 0.0;
  Matrix aligned = est;
  if (align) {
    if (P < 3)
      throw SizeError(
          "reconstruction_error: similarity alignment needs at least 3 points");
    const Eigen::Matrix4d T = Eigen::umeyama(est, gt, true);
    aligned = (T.topLeftCorner<3, 3>() * est).colwise() +
              Eigen::Vector3d(T.topRightCorner<3, 1>());
  }
  return (aligned - gt).colwise().norm().mean();
}

}  // namespace wnnsfm
