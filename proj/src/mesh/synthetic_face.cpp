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

#include "geoconv/synthetic_face.hpp"

#include <algorithm>
#include <cmath>

#include "geoconv/errors.hpp"
#include "geoconv/rng.hpp"

namespace geoconv {

namespace {

double gauss(double x, double y, double cx, double cy, double sx, double sy) {
  double dx = (x - cx) / sx, dy = (y - cy) / sy;
  return std::exp(-0.5 * (dx * dx + dy * dy));
}

// Compactly supported bump (1 - r^2)^2 on the ellipse with radii (rx, ry).
double bump(double x, double y, double cx, double cy, double rx, double ry) {
  double dx = (x - cx) / rx, dy = (y - cy) / ry;
  double r2 = dx * dx + dy * dy;
  if (r2 >= 1.0) return 0.0;
  return (1.0 - r2) * (1.0 - r2);
}

double faceHeight(double x, double y) {
  double h = 0.3 * (1.0 - 0.45 * x * x - 0.25 * y * y);
  h += 0.25 * gauss(x, y, 0.0, 0.05, 0.12, 0.25);   // nose ridge
  h += 0.10 * gauss(x, y, 0.0, 0.22, 0.08, 0.08);   // nose tip
  h += 0.06 * gauss(x, y, -0.35, -0.42, 0.20, 0.06);  // brows
  h += 0.06 * gauss(x, y, 0.35, -0.42, 0.20, 0.06);
  h -= 0.05 * gauss(x, y, -0.35, -0.2, 0.10, 0.08);   // eye sockets
  h -= 0.05 * gauss(x, y, 0.35, -0.2, 0.10, 0.08);
  h += 0.04 * gauss(x, y, 0.0, 0.5, 0.25, 0.05);    // lips
  return h;
}

struct Region {
  double cx, cy, rx, ry;
};

// Declared supports of the named expression columns.
const std::vector<Region>& namedRegions(SyntheticExpression e) {
  static const std::vector<Region> brow = {{-0.35, -0.42, 0.32, 0.30}, {0.35, -0.42, 0.32, 0.30}};
  static const std::vector<Region> mouth = {{0.0, 0.58, 0.38, 0.32}};
  static const std::vector<Region> cheek = {{-0.45, 0.2, 0.24, 0.22}, {0.45, 0.2, 0.24, 0.22}};
  static const std::vector<Region> nose = {{0.0, -0.05, 0.18, 0.18}};
  switch (e) {
    case SyntheticExpression::kBrowRaise: return brow;
    case SyntheticExpression::kMouthOpen: return mouth;
    case SyntheticExpression::kCheekRaise: return cheek;
    case SyntheticExpression::kNoseWrinkle: return nose;
  }
  return brow;
}

double regionBump(SyntheticExpression e, double x, double y) {
  double s = 0;
  for (const auto& r : namedRegions(e)) s += bump(x, y, r.cx, r.cy, r.rx, r.ry);
  return s;
}

Vec3 namedDisplacement(SyntheticExpression e, double x, double y) {
  const double b = regionBump(e, x, y);
  if (b == 0.0) return {};
  switch (e) {
    case SyntheticExpression::kBrowRaise:
      return {0.0, -0.12 * b, -0.03 * b};
    case SyntheticExpression::kMouthOpen: {
      // Jaw drops below the lip line while the lip line recedes into a cavity.
      double ramp = std::clamp((y - 0.45) / 0.1, 0.0, 1.0);
      double cavity = std::exp(-0.5 * std::pow((y - 0.52) / 0.05, 2));
      return {0.0, 0.12 * b * ramp, 0.12 * b * cavity};
    }
    case SyntheticExpression::kCheekRaise:
      return {0.0, -0.03 * b, -0.08 * b};
    case SyntheticExpression::kNoseWrinkle:
      return {0.0, -0.03 * b, -0.05 * b};
  }
  return {};
}

}  // namespace

MorphableModel makeSyntheticFaceModel(std::size_t resolution, std::uint64_t seed,
                                      std::size_t nId, std::size_t nExp) {
  if (resolution < 8) throw ValidationError("synthetic face resolution must be >= 8");
  if (nExp < kNamedExpressions)
    throw ValidationError("synthetic face needs at least " + std::to_string(kNamedExpressions) +
                          " expression columns");
  const std::size_t n = resolution;
  const double step = 2.0 / static_cast<double>(n - 1);
  MorphableModel m;
  m.nId = nId;
  m.nExp = nExp;
  const std::size_t v = n * n, rows = 3 * v;
  m.meanShape.resize(rows);
  std::vector<double> xs(v), ys(v);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t k = j * n + i;
      xs[k] = -1.0 + step * static_cast<double>(i);
      ys[k] = -1.0 + step * static_cast<double>(j);
      m.meanShape[3 * k] = xs[k];
      m.meanShape[3 * k + 1] = ys[k];
      m.meanShape[3 * k + 2] = -faceHeight(xs[k], ys[k]);
    }
  for (std::size_t j = 0; j + 1 < n; ++j)
    for (std::size_t i = 0; i + 1 < n; ++i) {
      auto id = [n](std::size_t a, std::size_t b) { return static_cast<std::uint32_t>(b * n + a); };
      m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }

  Rng rng(seed);

  // Identity: low-frequency cosine fields, amplitude decaying with frequency.
  m.idBasis.assign(rows * nId, 0.0);
  const double idScale = 0.6 / std::sqrt(static_cast<double>(nId));
  for (std::size_t c = 0; c < nId; ++c) {
    double coef[3][3][3];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        double falloff = idScale / (1.0 + a + b);
        coef[a][b][0] = 0.2 * falloff * rng.normal();
        coef[a][b][1] = 0.2 * falloff * rng.normal();
        coef[a][b][2] = falloff * rng.normal();
      }
    double* col = m.idBasis.data() + c * rows;
    for (std::size_t k = 0; k < v; ++k)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          double basis = std::cos(a * M_PI * (xs[k] + 1) / 2) * std::cos(b * M_PI * (ys[k] + 1) / 2);
          for (int d = 0; d < 3; ++d) col[3 * k + d] += coef[a][b][d] * basis;
        }
  }

  // Expression: named localized fields first, then random compact bumps.
  m.expBasis.assign(rows * nExp, 0.0);
  for (std::size_t c = 0; c < nExp; ++c) {
    double* col = m.expBasis.data() + c * rows;
    if (c < kNamedExpressions) {
      auto e = static_cast<SyntheticExpression>(c);
      for (std::size_t k = 0; k < v; ++k) {
        Vec3 d = namedDisplacement(e, xs[k], ys[k]);
        col[3 * k] = d.x;
        col[3 * k + 1] = d.y;
        col[3 * k + 2] = d.z;
      }
      continue;
    }
    const double cx = rng.uniform(-0.8, 0.8), cy = rng.uniform(-0.8, 0.8);
    const double rx = rng.uniform(0.15, 0.4), ry = rng.uniform(0.15, 0.4);
    const Vec3 amp{0.02 * rng.normal(), 0.02 * rng.normal(), 0.04 * rng.normal()};
    for (std::size_t k = 0; k < v; ++k) {
      double b = bump(xs[k], ys[k], cx, cy, rx, ry);
      col[3 * k] = amp.x * b;
      col[3 * k + 1] = amp.y * b;
      col[3 * k + 2] = amp.z * b;
    }
  }
  return m;
}

std::vector<std::uint32_t> syntheticExpressionSupport(const MorphableModel& model,
                                                      SyntheticExpression column) {
  std::vector<std::uint32_t> out;
  for (std::size_t k = 0; k < model.vertexCount(); ++k)
    if (regionBump(column, model.meanShape[3 * k], model.meanShape[3 * k + 1]) > 0.0)
      out.push_back(static_cast<std::uint32_t>(k));
  return out;
}

std::uint32_t syntheticNoseTip(const MorphableModel& model) {
  std::uint32_t best = 0;
  for (std::size_t k = 1; k < model.vertexCount(); ++k)
    if (model.meanShape[3 * k + 2] < model.meanShape[3 * best + 2]) best = static_cast<std::uint32_t>(k);
  return best;
}

}  // namespace geoconv
