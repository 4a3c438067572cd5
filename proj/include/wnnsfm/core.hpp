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

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wnnsfm {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Error hierarchy. Every error raised by the library derives from Error so
// callers can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise unusable numeric input.
class InputError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Relative threshold used to count singular values as nonzero.
inline constexpr double kRankThreshold = 1e-6;

/// Number of entries of a non-increasing spectrum above
/// `kRankThreshold * sigma[0]`.
inline Index numerical_rank(const Vector& sigma,
                            double relative = kRankThreshold) {
  if (sigma.size() == 0 || !(sigma[0] > 0.0)) return 0;
  const double cut = relative * sigma[0];
  Index rank = 0;
  for (Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] > cut) ++rank;
  return rank;
}

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Column-major vectorization, vec(X).
inline Vector vec(const Matrix& X) {
  return Eigen::Map<const Vector>(X.data(), X.size());
}

/// Inverse of vec for a rows x cols matrix.
inline Matrix unvec(const Vector& x, Index rows, Index cols) {
  if (x.size() != rows * cols)
    throw DimensionError("unvec: length " + std::to_string(x.size()) +
                         " does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  return Eigen::Map<const Matrix>(x.data(), rows, cols);
}

/// Formats a real with 17 significant digits, the precision used by every
/// text format this library writes.
inline std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

/// Minimum-norm least-squares solver for sparse systems whose columns split
/// into small independent groups (every row touching a single group). The
/// pOSE operators and their compositions with rotations have 3-column
/// groups, so the pseudo-inverse is assembled block by block.
class BlockPseudoInverse {
 public:
  BlockPseudoInverse() = default;

  /// `relative` is the singular-value cutoff relative to the largest
  /// singular value of the whole matrix.
  explicit BlockPseudoInverse(const SparseMatrix& A, double relative = 1e-10)
      : rows_(A.rows()), cols_(A.cols()) {
    // Union-find over columns sharing a row.
    std::vector<Index> parent(static_cast<std::size_t>(cols_));
    std::iota(parent.begin(), parent.end(), Index{0});
    auto find = [&](Index c) {
      while (parent[c] != c) {
        parent[c] = parent[parent[c]];
        c = parent[c];
      }
      return c;
    };
    const SparseMatrix At = A.transpose();  // column r of At = row r of A
    std::vector<Index> row_anchor(static_cast<std::size_t>(rows_), -1);
    for (Index r = 0; r < At.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(At, r); it; ++it) {
        const Index c = it.row();
        if (row_anchor[r] < 0) {
          row_anchor[r] = c;
        } else {
          const Index a = find(row_anchor[r]), b = find(c);
          if (a != b) parent[b] = a;
        }
      }
    }
    std::vector<Index> group_of(static_cast<std::size_t>(cols_), -1);
    for (Index c = 0; c < cols_; ++c) {
      const Index root = find(c);
      if (group_of[root] < 0) {
        group_of[root] = static_cast<Index>(groups_.size());
        groups_.emplace_back();
      }
      group_of[c] = group_of[root];
      groups_[group_of[c]].cols.push_back(c);
    }
    for (Index r = 0; r < rows_; ++r)
      if (row_anchor[r] >= 0) groups_[group_of[row_anchor[r]]].rows.push_back(r);

    // Dense pseudo-inverse per group with a global cutoff.
    std::vector<Eigen::JacobiSVD<Matrix>> svds;
    svds.reserve(groups_.size());
    double sigma_max = 0.0;
    for (auto& g : groups_) {
      if (g.rows.empty()) {
        svds.emplace_back();
        continue;
      }
      Matrix block = Matrix::Zero(static_cast<Index>(g.rows.size()),
                                  static_cast<Index>(g.cols.size()));
      for (std::size_t k = 0; k < g.cols.size(); ++k) {
        // Rows of the group are sorted; locate entries by binary search.
        for (SparseMatrix::InnerIterator it(A, g.cols[k]); it; ++it) {
          auto pos = std::lower_bound(g.rows.begin(), g.rows.end(), it.row());
          block(pos - g.rows.begin(), static_cast<Index>(k)) += it.value();
        }
      }
      svds.emplace_back(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
      if (svds.back().singularValues().size() > 0)
        sigma_max = std::max(sigma_max, svds.back().singularValues()[0]);
    }
    const double cut = relative * sigma_max;
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
      auto& g = groups_[gi];
      if (g.rows.empty()) continue;
      const auto& svd = svds[gi];
      Vector inv = svd.singularValues();
      for (Index i = 0; i < inv.size(); ++i)
        inv[i] = inv[i] > cut && inv[i] > 0.0 ? 1.0 / inv[i] : 0.0;
      g.pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    }
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  Vector solve(const Vector& b) const {
    if (b.size() != rows_)
      throw DimensionError("BlockPseudoInverse: right-hand side has length " +
                           std::to_string(b.size()) + ", expected " +
                           std::to_string(rows_));
    Vector x = Vector::Zero(cols_);
    Vector local;
    for (const auto& g : groups_) {
      if (g.rows.empty()) continue;
      local.resize(static_cast<Index>(g.rows.size()));
      for (std::size_t k = 0; k < g.rows.size(); ++k)
        local[static_cast<Index>(k)] = b[g.rows[k]];
      const Vector sol = g.pinv * local;
      for (std::size_t k = 0; k < g.cols.size(); ++k)
        x[g.cols[k]] = sol[static_cast<Index>(k)];
    }
    return x;
  }

 private:
  struct Group {
    std::vector<Index> cols;
    std::vector<Index> rows;
    Matrix pinv;
  };

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Group> groups_;
};

}  // namespace wnnsfm
