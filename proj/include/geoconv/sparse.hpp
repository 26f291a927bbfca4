// Copyright 2026 The GeoConv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace geoconv {

struct Triplet {
  std::uint32_t row, col;
  double value;
};

/// Symmetric sparse matrix in compressed-row form.
///
/// Built from coordinate triplets: duplicates are summed, exact zeros dropped
/// and each row sorted by column. Construction verifies symmetry to within
/// 1e-12 (absolute, scaled by the largest magnitude when it exceeds 1).
class SparseSym {
 public:
  SparseSym() = default;
  SparseSym(std::size_t dimension, std::vector<Triplet> entries);

  std::size_t dimension() const { return dim_; }
  std::size_t nonZeros() const { return values_.size(); }
  const std::vector<std::size_t>& rowOffsets() const { return rowPtr_; }
  const std::vector<std::uint32_t>& columns() const { return cols_; }
  const std::vector<double>& values() const { return values_; }

  double at(std::size_t row, std::size_t col) const;
  std::vector<double> diagonal() const;
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;

  /// Submatrix on the given (sorted) index set; rows/cols are renumbered in
  /// that order.
  SparseSym restricted(std::span<const std::uint32_t> keep) const;

  /// this + s * other.
  SparseSym plusScaled(const SparseSym& other, double s) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::size_t> rowPtr_{0};
  std::vector<std::uint32_t> cols_;
  std::vector<double> values_;
};

struct SolveStats {
  int iterations = 0;
  double relativeResidual = 0;
};

/// Preconditioned conjugate gradient with a diagonal (Jacobi) preconditioner.
///
/// Returns x with ||Ax - b|| / ||b|| <= tol, checked on the true residual.
/// Positive semi-definite matrices work when b lies in the range of A; the
/// caller is responsible for that (see projectOutConstant). Throws SolverError
/// carrying the final residual if maxIter is exhausted.
std::vector<double> solveSpd(const SparseSym& a, std::span<const double> b, double tol = 1e-10,
                             int maxIter = 20000, SolveStats* stats = nullptr);

/// Removes the mean so that b is orthogonal to the constant vector.
void projectOutConstant(std::span<double> b);

}  // namespace geoconv
