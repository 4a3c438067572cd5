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

// Singular-value penalties and their bilinear surrogate.
//
// For X = B C^T the per-column quantity gamma_i = (|B_i|^2 + |C_i|^2) / 2
// is smooth in the factors. For non-negative, non-decreasing weights a the
// minimum of a^T gamma over all factorizations of X equals the weighted
// nuclear norm a^T sigma(X), attained at the balanced factorization
// B = U sqrt(S), C = V sqrt(S). The oracles at the bottom of this header
// check that statement on sampled cofactorizations.

#pragma once

#include <wnnsfm/core.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <limits>
#include <random>
#include <string>

namespace wnnsfm {

/// Non-negative, non-decreasing singular-value weights.
///
/// Weights are indexed like singular values (largest first). Indices past
/// the end reuse the last weight.
class WeightVector {
 public:
  WeightVector() = default;

  explicit WeightVector(Vector a) : a_(std::move(a)) {
    for (Index i = 0; i < a_.size(); ++i) {
      if (!std::isfinite(a_[i]) || a_[i] < 0.0)
        throw ParameterError("WeightVector: weight " + std::to_string(i) +
                             " must be finite and non-negative");
      if (i > 0 && a_[i] < a_[i - 1])
        throw ParameterError(
            "WeightVector: weights must be non-decreasing (index " +
            std::to_string(i) + ")");
    }
  }

  static WeightVector zeros(Index p) { return WeightVector(Vector::Zero(p)); }

  /// a_i = mu for every i.
  static WeightVector nuclear(Index p, double mu) {
    return WeightVector(Vector::Constant(p, mu));
  }

  /// a_i = 0 for the first `free` indices, mu afterwards.
  static WeightVector truncated(Index p, double mu, Index free = 4) {
    Vector a = Vector::Constant(p, mu);
    a.head(std::min(free, p)).setZero();
    return WeightVector(std::move(a));
  }

  /// a_i = 0 for the first `free` indices, (i - free) * mu afterwards
  /// (1-based i).
  static WeightVector linear_ramp(Index p, double mu, Index free = 4) {
    Vector a(p);
    for (Index i = 0; i < p; ++i)
      a[i] = i < free ? 0.0 : static_cast<double>(i + 1 - free) * mu;
    return WeightVector(std::move(a));
  }

  const Vector& values() const noexcept { return a_; }
  Index size() const noexcept { return a_.size(); }
  bool empty() const noexcept { return a_.size() == 0; }

  double operator[](Index i) const {
    if (a_.size() == 0) return 0.0;
    return i < a_.size() ? a_[i] : a_[a_.size() - 1];
  }

  /// The first n weights, extending with the last one when n > size().
  Vector expanded(Index n) const {
    Vector out(n);
    for (Index i = 0; i < n; ++i) out[i] = (*this)[i];
    return out;
  }

  WeightVector resized(Index n) const { return WeightVector(expanded(n)); }

  WeightVector scaled(double s) const {
    if (!(s >= 0.0))
      throw ParameterError("WeightVector::scaled: factor must be >= 0");
    return WeightVector(a_ * s);
  }

  bool is_zero() const { return a_.size() == 0 || a_.maxCoeff() == 0.0; }

 private:
  Vector a_;
};

/// Preset weights for the recovery and NRSfM experiments.
namespace presets {
inline constexpr double kNuclearRigid = 1.5e-3;
inline constexpr double kNuclearDeformable = 7.5e-4;
inline constexpr double kTruncated = 1.0;
inline constexpr double kLinearRamp = 2.25e-3;
inline constexpr double kNrsfmNuclear = 1e-3;
inline constexpr double kNrsfmXi = 5e-3;
inline constexpr double kNrsfmEta = 0.05;
inline constexpr Index kNrsfmK = 2;
}  // namespace presets

/// Factor pair (B, C) representing X = B C^T.
class Factorization {
 public:
  Factorization() = default;

  Factorization(Matrix B, Matrix C) : B_(std::move(B)), C_(std::move(C)) {
    if (B_.cols() != C_.cols())
      throw DimensionError("Factorization: B has " + std::to_string(B_.cols()) +
                           " columns, C has " + std::to_string(C_.cols()));
  }

  const Matrix& B() const noexcept { return B_; }
  const Matrix& C() const noexcept { return C_; }
  Index rows() const noexcept { return B_.rows(); }
  Index cols() const noexcept { return C_.rows(); }
  Index width() const noexcept { return B_.cols(); }

  Matrix product() const { return B_ * C_.transpose(); }

 private:
  Matrix B_;
  Matrix C_;
};

/// Non-increasing, non-negative singular values.
class SingularSpectrum {
 public:
  SingularSpectrum() = default;

  explicit SingularSpectrum(Vector sigma) : sigma_(std::move(sigma)) {
    for (Index i = 0; i < sigma_.size(); ++i) {
      if (!std::isfinite(sigma_[i]) || sigma_[i] < 0.0)
        throw ParameterError("SingularSpectrum: negative or non-finite value");
      if (i > 0 && sigma_[i] > sigma_[i - 1])
        throw ParameterError("SingularSpectrum: values must be non-increasing");
    }
  }

  const Vector& values() const noexcept { return sigma_; }
  Index size() const noexcept { return sigma_.size(); }
  double operator[](Index i) const { return sigma_[i]; }
  Index rank(double relative = kRankThreshold) const {
    return numerical_rank(sigma_, relative);
  }

 private:
  Vector sigma_;
};

/// gamma_i = (|B_i|^2 + |C_i|^2) / 2 per column.
inline Vector gamma(const Factorization& fact) {
  return 0.5 * (fact.B().colwise().squaredNorm() +
                fact.C().colwise().squaredNorm())
                   .transpose();
}

inline Vector gamma(const Matrix& B, const Matrix& C) {
  return gamma(Factorization(B, C));
}

inline SingularSpectrum singular_values(const Matrix& X) {
  if (!X.allFinite())
    throw InputError("singular_values: matrix has non-finite entries");
  if (X.size() == 0) return SingularSpectrum();
  Eigen::BDCSVD<Matrix> svd(X);
  return SingularSpectrum(svd.singularValues());
}

/// Singular values of B C^T computed through the p x p core R_B R_C^T of
/// the two QR factorizations. Cheaper than an SVD of the product when p is
/// small; the result is padded with zeros to min(rows, cols) entries.
inline Vector product_singular_values(const Matrix& B, const Matrix& C) {
  const Index n = std::min(B.rows(), C.rows());
  Vector out = Vector::Zero(n);
  if (B.cols() == 0 || n == 0) return out;
  Eigen::HouseholderQR<Matrix> qb(B), qc(C);
  const Index kb = std::min(B.rows(), B.cols());
  const Index kc = std::min(C.rows(), C.cols());
  const Matrix rb =
      qb.matrixQR().topRows(kb).triangularView<Eigen::Upper>().toDenseMatrix();
  const Matrix rc =
      qc.matrixQR().topRows(kc).triangularView<Eigen::Upper>().toDenseMatrix();
  Eigen::JacobiSVD<Matrix> svd(rb * rc.transpose());
  const Vector& s = svd.singularValues();
  const Index k = std::min(n, s.size());
  out.head(k) = s.head(k);
  return out;
}

/// sum_i a_i sigma_i(X).
inline double weighted_nuclear_norm(const Matrix& X, const WeightVector& a) {
  const SingularSpectrum sigma = singular_values(X);
  return a.expanded(sigma.size()).dot(sigma.values());
}

/// a^T gamma(B, C); a must have one weight per factor column.
inline double bilinear_penalty(const Factorization& fact,
                               const WeightVector& a) {
  if (a.size() != fact.width())
    throw DimensionError("bilinear_penalty: " + std::to_string(a.size()) +
                         " weights for " + std::to_string(fact.width()) +
                         " factor columns");
  return a.values().dot(gamma(fact));
}

struct BalancedFactorization {
  Factorization fact;
  /// Set when the numerical rank of X exceeded p and the top-p SVD
  /// truncation lost information.
  bool truncated = false;
};

/// B = U sqrt(S), C = V sqrt(S) from the thin SVD, padded with zero
/// columns (or truncated) to exactly p columns.
inline BalancedFactorization balanced_factor_from_svd(const Matrix& X,
                                                      Index p) {
  if (p < 0) throw ParameterError("balanced_factor_from_svd: p must be >= 0");
  if (!X.allFinite())
    throw InputError("balanced_factor_from_svd: non-finite entries");
  Matrix B = Matrix::Zero(X.rows(), p);
  Matrix C = Matrix::Zero(X.cols(), p);
  if (X.size() == 0) return {Factorization(std::move(B), std::move(C)), false};
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const Index k = std::min(p, s.size());
  const Vector root = s.head(k).cwiseSqrt();
  B.leftCols(k) = svd.matrixU().leftCols(k) * root.asDiagonal();
  C.leftCols(k) = svd.matrixV().leftCols(k) * root.asDiagonal();
  const bool truncated = numerical_rank(s) > p;
  return {Factorization(std::move(B), std::move(C)), truncated};
}

struct ProxResult {
  Matrix X;
  Vector sigma;  // singular values of X, non-increasing
};

/// argmin_X a^T sigma(X) + |X - X0|_F^2, which shrinks every singular value
/// of X0 to max(sigma_i - a_i / 2, 0). Non-decreasing weights make the
/// per-value shrinkage globally optimal. With max_rank >= 0 the weights
/// past index max_rank are taken as infinite (the rank-constrained prox).
inline ProxResult wnn_prox_with_spectrum(const Matrix& X0,
                                         const WeightVector& a,
                                         Index max_rank = -1) {
  if (!X0.allFinite()) throw InputError("wnn_prox: non-finite entries");
  if (X0.size() == 0) return {X0, Vector()};
  if (a.is_zero() && max_rank < 0) return {X0, singular_values(X0).values()};
  Eigen::BDCSVD<Matrix> svd(X0, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  Vector shrunk = (s - 0.5 * a.expanded(s.size())).cwiseMax(0.0);
  if (max_rank >= 0 && max_rank < shrunk.size())
    shrunk.tail(shrunk.size() - max_rank).setZero();
  const Index k = numerical_rank(shrunk, 0.0);  // exact zeros drop out
  Matrix X = svd.matrixU().leftCols(k) * shrunk.head(k).asDiagonal() *
             svd.matrixV().leftCols(k).transpose();
  return {std::move(X), shrunk};
}

inline Matrix wnn_prox(const Matrix& X0, const WeightVector& a) {
  return wnn_prox_with_spectrum(X0, a).X;
}

/// Pair (V, H) of r x p matrices with V H^T = I (V is a left inverse of
/// H^T). Maps a factorization (B, C) to (B V, C H) without changing B C^T.
class CofactorTransform {
 public:
  CofactorTransform() = default;

  CofactorTransform(Matrix V, Matrix H, double tolerance = 1e-10)
      : V_(std::move(V)), H_(std::move(H)) {
    if (V_.rows() != H_.rows() || V_.cols() != H_.cols())
      throw DimensionError("CofactorTransform: V and H must have equal shape");
    if (V_.rows() > V_.cols())
      throw DimensionError("CofactorTransform: V must have r <= p");
    const Matrix residual =
        V_ * H_.transpose() - Matrix::Identity(V_.rows(), V_.rows());
    if (residual.size() > 0 && residual.cwiseAbs().maxCoeff() > tolerance)
      throw ValidationError("CofactorTransform: V H^T deviates from identity");
  }

  const Matrix& V() const noexcept { return V_; }
  const Matrix& H() const noexcept { return H_; }
  Index r() const noexcept { return V_.rows(); }
  Index p() const noexcept { return V_.cols(); }

  Factorization apply(const Factorization& fact) const {
    if (fact.width() != r())
      throw DimensionError("CofactorTransform::apply: factor width " +
                           std::to_string(fact.width()) + " != r = " +
                           std::to_string(r()));
    return Factorization(fact.B() * V_, fact.C() * H_);
  }

 private:
  Matrix V_;
  Matrix H_;
};

/// M = (V^T .* V^T + H^T .* H^T) / 2, the p x r matrix with
/// gamma(B V, C H) = M sigma at a balanced factorization (B, C).
inline Matrix gamma_mixing_matrix(const CofactorTransform& t) {
  const Matrix Vt = t.V().transpose();
  const Matrix Ht = t.H().transpose();
  return 0.5 * (Vt.cwiseProduct(Vt) + Ht.cwiseProduct(Ht));
}

/// Completes a rectangular transform (r < p) to a square p x p pair whose
/// first r rows are V and H. With O the orthonormal complement of the row
/// space of V and K1 = O H^T, the extra rows are H~ = O and V~ = O - K1 V.
inline CofactorTransform extend_to_square(const CofactorTransform& t) {
  const Index r = t.r(), p = t.p();
  if (r == p) return t;
  Eigen::JacobiSVD<Matrix> svd(t.V(), Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  if (r > 0 && (s.size() < r || !(s[r - 1] > 1e-10 * s[0])))
    throw RankError("extend_to_square: V does not have full row rank");
  // Right singular vectors past r span the orthogonal complement.
  Matrix O = svd.matrixV().rightCols(p - r).transpose();
  for (Index i = 0; i < O.rows(); ++i) {
    Index arg = 0;
    O.row(i).cwiseAbs().maxCoeff(&arg);
    if (O(i, arg) < 0.0) O.row(i) *= -1.0;
  }
  const Matrix K1 = O * t.H().transpose();
  Matrix V_full(p, p), H_full(p, p);
  V_full.topRows(r) = t.V();
  V_full.bottomRows(p - r) = O - K1 * t.V();
  H_full.topRows(r) = t.H();
  H_full.bottomRows(p - r) = O;
  return CofactorTransform(std::move(V_full), std::move(H_full), 1e-9);
}

struct PermutationReport {
  double min_sampled = std::numeric_limits<double>::infinity();
  double analytic_min = 0.0;
  Index violations = 0;
  Index trials = 0;
};

/// Empirical check that a^T gamma over random invertible cofactorizations
/// never drops below the best permutation of sigma.
///
/// Samples V with standard-normal entries (resampled when cond(V) > 1e6)
/// and H = V^{-T}, evaluates a^T M sigma for the mixing matrix M, and
/// compares against min over permutations of a^T Pi sigma, found by
/// enumeration when `exhaustive` (r <= 8) and taken as a^T sigma (the
/// identity) otherwise.
inline PermutationReport verify_optimal_permutation(
    const SingularSpectrum& sigma, const WeightVector& a, Index trials,
    std::uint64_t seed, bool exhaustive = true) {
  if (trials < 1)
    throw ParameterError("verify_optimal_permutation: trials must be >= 1");
  const Index r = sigma.size();
  if (exhaustive && r > 8)
    throw SizeError(
        "verify_optimal_permutation: exhaustive search limited to r <= 8");
  const Vector w = a.expanded(r);
  const Vector& s = sigma.values();

  PermutationReport report;
  report.trials = trials;
  if (exhaustive) {
    std::vector<Index> perm(static_cast<std::size_t>(r));
    std::iota(perm.begin(), perm.end(), Index{0});
    double best = std::numeric_limits<double>::infinity();
    do {
      double value = 0.0;
      for (Index i = 0; i < r; ++i) value += w[i] * s[perm[i]];
      best = std::min(best, value);
    } while (std::next_permutation(perm.begin(), perm.end()));
    report.analytic_min = r == 0 ? 0.0 : best;
  } else {
    report.analytic_min = w.dot(s);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index trial = 0; trial < trials; ++trial) {
    Matrix V(r, r);
    Eigen::JacobiSVD<Matrix> svd;
    do {
      for (Index i = 0; i < V.size(); ++i) V.data()[i] = normal(rng);
      svd.compute(V);
    } while (r > 0 && !(svd.singularValues()[r - 1] * 1e6 >=
                        svd.singularValues()[0]));
    const Matrix H = V.inverse().transpose();
    const Matrix Vt = V.transpose();
    const Matrix Ht = H.transpose();
    const Matrix M = 0.5 * (Vt.cwiseProduct(Vt) + Ht.cwiseProduct(Ht));
    const double value = w.dot(M * s);
    report.min_sampled = std::min(report.min_sampled, value);
    if (value < report.analytic_min - 1e-9) ++report.violations;
  }
  return report;
}

}  // namespace wnnsfm
