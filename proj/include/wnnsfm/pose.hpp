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
#include <wnnsfm/observations.hpp>

#include <algorithm>

namespace wnnsfm {

/// Data term |A vec(X) - b|^2 for a rows x cols matrix variable X.
class AffineMap {
 public:
  AffineMap() = default;

  AffineMap(SparseMatrix A, Vector b, Index rows, Index cols)
      : A_(std::move(A)), b_(std::move(b)), rows_(rows), cols_(cols) {
    if (A_.cols() != rows_ * cols_)
      throw DimensionError("AffineMap: A has " + std::to_string(A_.cols()) +
                           " columns for a " + std::to_string(rows_) + "x" +
                           std::to_string(cols_) + " variable");
    if (A_.rows() != b_.size())
      throw DimensionError("AffineMap: A and b row counts differ");
  }

  /// A = I, so the data term is |X - target|_F^2.
  static AffineMap identity(const Matrix& target) {
    SparseMatrix A(target.size(), target.size());
    A.setIdentity();
    return AffineMap(std::move(A), vec(target), target.rows(), target.cols());
  }

  const SparseMatrix& A() const noexcept { return A_; }
  const Vector& b() const noexcept { return b_; }
  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }

  Vector residual(const Matrix& X) const {
    check_shape(X);
    return A_ * vec(X) - b_;
  }

  double loss(const Matrix& X) const { return residual(X).squaredNorm(); }

  void check_shape(const Matrix& X) const {
    if (X.rows() != rows_ || X.cols() != cols_)
      throw DimensionError("AffineMap: expected a " + std::to_string(rows_) +
                           "x" + std::to_string(cols_) + " matrix, got " +
                           std::to_string(X.rows()) + "x" +
                           std::to_string(X.cols()));
  }

 private:
  SparseMatrix A_;
  Vector b_;
  Index rows_ = 0;
  Index cols_ = 0;
};

/// Minimum-norm least-squares solution of A vec(X) = b, reshaped.
inline Matrix min_norm_solution(const AffineMap& op) {
  const BlockPseudoInverse pinv(op.A());
  return unvec(pinv.solve(op.b()), op.rows(), op.cols());
}

/// The pOSE objective as an explicit affine map on vec(X), X of size
/// 3F x P.
///
/// Observations are sorted by (frame, point). For observation k the rows
/// are 2k, 2k+1 (affine block, weight sqrt(eta)) and 2N+2k, 2N+2k+1 (object
/// space block, weight sqrt(1-eta)), N = |Omega|; b carries sqrt(eta) m in
/// the affine block and zeros below.
class PoseOperator : public AffineMap {
 public:
  PoseOperator() = default;

  PoseOperator(AffineMap map, Index frames, Index points, double eta,
               double scale, std::vector<Observation> sorted)
      : AffineMap(std::move(map)),
        frames_(frames),
        points_(points),
        eta_(eta),
        scale_(scale),
        observations_(std::move(sorted)) {}

  Index frames() const noexcept { return frames_; }
  Index points() const noexcept { return points_; }
  double eta() const noexcept { return eta_; }
  double scale() const noexcept { return scale_; }
  Index observation_count() const noexcept {
    return static_cast<Index>(observations_.size());
  }
  /// Observations in row order.
  const std::vector<Observation>& observations() const noexcept {
    return observations_;
  }

 private:
  Index frames_ = 0;
  Index points_ = 0;
  double eta_ = 0.0;
  double scale_ = 1.0;
  std::vector<Observation> observations_;
};

inline PoseOperator build_pose_operator(const ObservationSet& obs, double eta,
                                        double scale = 1.0) {
  if (!(eta >= 0.0 && eta <= 1.0))
    throw ParameterError("build_pose_operator: eta must lie in [0, 1]");
  std::vector<Observation> sorted = obs.entries();
  std::sort(sorted.begin(), sorted.end(),
            [](const Observation& l, const Observation& r) {
              return l.frame != r.frame ? l.frame < r.frame : l.point < r.point;
            });
  const Index n = static_cast<Index>(sorted.size());
  const Index F = obs.frames(), P = obs.points();
  const Index m = 3 * F;
  const double wa = std::sqrt(eta), wo = std::sqrt(1.0 - eta);

  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(6 * n));
  Vector b = Vector::Zero(4 * n);
  for (Index k = 0; k < n; ++k) {
    const auto& o = sorted[static_cast<std::size_t>(k)];
    const Index x = 3 * o.frame + m * o.point;  // vec index of the x row
    const Index y = x + 1, z = x + 2;
    trips.emplace_back(2 * k, x, wa);
    trips.emplace_back(2 * k + 1, y, wa);
    b[2 * k] = wa * o.u;
    b[2 * k + 1] = wa * o.v;
    trips.emplace_back(2 * n + 2 * k, x, wo);
    trips.emplace_back(2 * n + 2 * k, z, -wo * o.u);
    trips.emplace_back(2 * n + 2 * k + 1, y, wo);
    trips.emplace_back(2 * n + 2 * k + 1, z, -wo * o.v);
  }
  SparseMatrix A(4 * n, m * P);
  A.setFromTriplets(trips.begin(), trips.end());
  return PoseOperator(AffineMap(std::move(A), std::move(b), m, P), F, P, eta,
                      scale, std::move(sorted));
}

struct PoseLoss {
  double total = 0.0;   // |A vec(X) - b|^2
  double affine = 0.0;  // unweighted affine error over Omega
  double ose = 0.0;     // unweighted object space error over Omega
};

inline PoseLoss pose_loss(const PoseOperator& op, const Matrix& X) {
  PoseLoss loss;
  loss.total = op.loss(X);
  for (const auto& o : op.observations()) {
    const double x = X(3 * o.frame, o.point);
    const double y = X(3 * o.frame + 1, o.point);
    const double z = X(3 * o.frame + 2, o.point);
    loss.affine += (x - o.u) * (x - o.u) + (y - o.v) * (y - o.v);
    loss.ose += (x - z * o.u) * (x - z * o.u) + (y - z * o.v) * (y - z * o.v);
  }
  return loss;
}

/// Closed-form minimizer of the pOSE term alone, X = A^+(b).
inline Matrix regularization_free_init(const PoseOperator& op) {
  if (op.observation_count() == 0)
    throw DegenerateInputError("regularization_free_init: no observations");
  return min_norm_solution(op);
}

inline Matrix regularization_free_init(const PoseOperator& op, Index frames,
                                       Index points) {
  if (frames != op.frames() || points != op.points())
    throw DimensionError("regularization_free_init: F, P do not match operator");
  return regularization_free_init(op);
}

}  // namespace wnnsfm
