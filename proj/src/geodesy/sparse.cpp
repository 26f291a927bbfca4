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

#include "geoconv/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geoconv/errors.hpp"

namespace geoconv {

SparseSym::SparseSym(std::size_t dimension, std::vector<Triplet> entries) : dim_(dimension) {
  for (const auto& e : entries)
    if (e.row >= dim_ || e.col >= dim_) throw ShapeError("sparse entry outside matrix dimension");
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  rowPtr_.assign(dim_ + 1, 0);
  for (std::size_t i = 0; i < entries.size();) {
    std::size_t j = i;
    double sum = 0;
    while (j < entries.size() && entries[j].row == entries[i].row && entries[j].col == entries[i].col)
      sum += entries[j++].value;
    if (sum != 0.0) {
      cols_.push_back(entries[i].col);
      values_.push_back(sum);
      ++rowPtr_[entries[i].row + 1];
    }
    i = j;
  }
  std::partial_sum(rowPtr_.begin(), rowPtr_.end(), rowPtr_.begin());

  double scale = 1.0;
  for (double v : values_) scale = std::max(scale, std::abs(v));
  for (std::size_t r = 0; r < dim_; ++r)
    for (std::size_t k = rowPtr_[r]; k < rowPtr_[r + 1]; ++k)
      if (std::abs(values_[k] - at(cols_[k], r)) > 1e-12 * scale)
        throw ShapeError("matrix is not symmetric at (" + std::to_string(r) + "," +
                         std::to_string(cols_[k]) + ")");
}

double SparseSym::at(std::size_t row, std::size_t col) const {
  auto first = cols_.begin() + static_cast<std::ptrdiff_t>(rowPtr_[row]);
  auto last = cols_.begin() + static_cast<std::ptrdiff_t>(rowPtr_[row + 1]);
  auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(col));
  return (it != last && *it == col) ? values_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
}

std::vector<double> SparseSym::diagonal() const {
  std::vector<double> d(dim_);
  for (std::size_t i = 0; i < dim_; ++i) d[i] = at(i, i);
  return d;
}

void SparseSym::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t r = 0; r < dim_; ++r) {
    double s = 0;
    for (std::size_t k = rowPtr_[r]; k < rowPtr_[r + 1]; ++k) s += values_[k] * x[cols_[k]];
    y[r] = s;
  }
}

std::vector<double> SparseSym::multiply(std::span<const double> x) const {
  std::vector<double> y(dim_);
  multiply(x, y);
  return y;
}

SparseSym SparseSym::restricted(std::span<const std::uint32_t> keep) const {
  std::vector<std::int64_t> map(dim_, -1);
  for (std::size_t i = 0; i < keep.size(); ++i) map[keep[i]] = static_cast<std::int64_t>(i);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    auto r = keep[i];
    for (std::size_t k = rowPtr_[r]; k < rowPtr_[r + 1]; ++k)
      if (map[cols_[k]] >= 0)
        t.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(map[cols_[k]]), values_[k]});
  }
  return SparseSym(keep.size(), std::move(t));
}

SparseSym SparseSym::plusScaled(const SparseSym& other, double s) const {
  if (other.dim_ != dim_) throw ShapeError("dimension mismatch in plusScaled");
  std::vector<Triplet> t;
  t.reserve(nonZeros() + other.nonZeros());
  for (std::size_t r = 0; r < dim_; ++r) {
    for (std::size_t k = rowPtr_[r]; k < rowPtr_[r + 1]; ++k)
      t.push_back({static_cast<std::uint32_t>(r), cols_[k], values_[k]});
    for (std::size_t k = other.rowPtr_[r]; k < other.rowPtr_[r + 1]; ++k)
      t.push_back({static_cast<std::uint32_t>(r), other.cols_[k], s * other.values_[k]});
  }
  return SparseSym(dim_, std::move(t));
}

namespace {

double dotp(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<double> solveSpd(const SparseSym& a, std::span<const double> b, double tol, int maxIter,
                             SolveStats* stats) {
  const auto n = a.dimension();
  if (b.size() != n) throw ShapeError("right-hand side length does not match matrix");
  std::vector<double> x(n, 0.0);
  const double bnorm = std::sqrt(dotp(b, b));
  if (bnorm == 0.0) {
    if (stats) *stats = {0, 0.0};
    return x;
  }
  std::vector<double> inv = a.diagonal();
  for (auto& d : inv) d = d > 0 ? 1.0 / d : 1.0;

  std::vector<double> r(b.begin(), b.end()), z(n), p(n), q(n);
  int it = 0;
  double rel = 1.0;
  while (it < maxIter) {
    // (Re)start from the true residual.
    a.multiply(x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    rel = std::sqrt(dotp(r, r)) / bnorm;
    if (rel <= tol) break;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] = inv[i] * r[i];
    double rz = dotp(r, z);
    while (it < maxIter) {
      ++it;
      a.multiply(p, q);
      const double pq = dotp(p, q);
      if (!(pq > 0)) break;  // breakdown; restart from the true residual
      const double alpha = rz / pq;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      if (std::sqrt(dotp(r, r)) / bnorm <= tol) break;
      for (std::size_t i = 0; i < n; ++i) z[i] = inv[i] * r[i];
      const double rzNext = dotp(r, z);
      const double beta = rzNext / rz;
      rz = rzNext;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
  }
  if (rel > tol) {
    a.multiply(x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    rel = std::sqrt(dotp(r, r)) / bnorm;
  }
  if (stats) *stats = {it, rel};
  if (rel > tol)
    throw SolverError("conjugate gradient did not converge: relative residual " + std::to_string(rel),
                      rel, it);
  return x;
}

void projectOutConstant(std::span<double> b) {
  if (b.empty()) return;
  double mean = 0;
  for (double v : b) mean += v;
  mean /= static_cast<double>(b.size());
  for (double& v : b) v -= mean;
}

}  // namespace geoconv
