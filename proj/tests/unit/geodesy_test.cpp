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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "geoconv/binary_io.hpp"
#include "geoconv/errors.hpp"
#include "geoconv/geodesy.hpp"
#include "geoconv/rng.hpp"
#include "support/test_meshes.hpp"

namespace {

using namespace geoconv;
using fixtures::centralAngle;
using fixtures::pearson;
using fixtures::randomSurfaceMesh;

TriMesh equilateral() {
  return TriMesh({{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2, 0}}, {{0, 1, 2}});
}

TEST(CotanLaplacian, EquilateralOffDiagonal) {
  const auto l = cotanLaplacian(equilateral());
  const double expected = -0.5 / std::tan(M_PI / 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) {
        EXPECT_NEAR(l.at(i, j), expected, 1e-12);
      }
  EXPECT_NEAR(expected, -0.2887, 1e-4);
}

TEST(CotanLaplacian, RowsSumToZero) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto mesh = randomSurfaceMesh(seed);
    const auto l = cotanLaplacian(mesh);
    const auto r = l.multiply(std::vector<double>(mesh.vertexCount(), 1.0));
    for (double x : r) EXPECT_NEAR(x, 0.0, 1e-10);
  }
}

TEST(CotanLaplacian, GridInteriorStencil) {
  const auto mesh = makeGridMesh(5, 5, 1, 1);
  const auto l = cotanLaplacian(mesh);
  const std::uint32_t c = 2 * 5 + 2;
  EXPECT_NEAR(l.at(c, c), 4.0, 1e-12);
  for (std::uint32_t nb : {c - 1, c + 1, c - 5, c + 5}) EXPECT_NEAR(l.at(c, nb), -1.0, 1e-12);
  EXPECT_NEAR(l.at(c, c + 6), 0.0, 1e-12);
  EXPECT_NEAR(l.at(c, c - 6), 0.0, 1e-12);
}

TEST(CotanLaplacian, DegenerateTriangleThrows) {
  // Collinear triangle slipped past construction by using a tiny but legal
  // area and then scaling it to nothing.
  const TriMesh mesh({{0, 0, 0}, {1, 0, 0}, {0, 1e-5, 0}}, {{0, 1, 2}});
  EXPECT_THROW(cotanLaplacian(mesh.scaled(1e-4)), GeometryError);
}

TEST(LumpedMass, EquilateralThirds) {
  for (double m : lumpedMass(equilateral())) EXPECT_NEAR(m, std::sqrt(3.0) / 12, 1e-15);
}

TEST(LumpedMass, SumsToAreaAndScalesQuadratically) {
  const auto mesh = randomSurfaceMesh(4);
  const auto m = lumpedMass(mesh);
  double sum = 0;
  for (double x : m) {
    EXPECT_GT(x, 0);
    sum += x;
  }
  EXPECT_NEAR(sum, mesh.surfaceArea(), 1e-10);
  const auto m3 = lumpedMass(mesh.scaled(3));
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m3[i], 9 * m[i], 1e-12 * m3[i]);
}

TEST(SparseSym, CanonicalForm) {
  const SparseSym a(3, {{0, 1, 2}, {1, 0, 0.5}, {1, 0, 0.5}, {2, 2, 0}, {0, 0, 5}, {0, 1, -1}, {1, 1, 0.5}});
  EXPECT_EQ(a.nonZeros(), 4u);  // (0,0) (0,1) (1,0) (1,1); explicit zero dropped
  EXPECT_DOUBLE_EQ(a.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(a.at(2, 2), 0.0);
  EXPECT_THROW(SparseSym(2, {{0, 1, 1.0}}), ValidationError);
}

TEST(SolveSpd, Diagonal) {
  const SparseSym a(3, {{0, 0, 2}, {1, 1, 4}, {2, 2, 8}});
  const auto x = solveSpd(a, std::vector<double>{1, 1, 1});
  EXPECT_NEAR(x[0], 0.5, 1e-12);
  EXPECT_NEAR(x[1], 0.25, 1e-12);
  EXPECT_NEAR(x[2], 0.125, 1e-12);
}

TEST(SolveSpd, TwoByTwo) {
  const SparseSym a(2, {{0, 0, 4}, {0, 1, 1}, {1, 0, 1}, {1, 1, 3}});
  const auto x = solveSpd(a, std::vector<double>{1, 2});
  EXPECT_NEAR(x[0], 1.0 / 11, 1e-10);
  EXPECT_NEAR(x[1], 7.0 / 11, 1e-10);
}

TEST(SolveSpd, RandomDenseSpd) {
  Rng rng(11);
  const std::size_t n = 50;
  std::vector<double> b(n * n);
  for (auto& x : b) x = rng.normal();
  std::vector<Triplet> t;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j) {
      double s = i == j ? 1.0 : 0.0;
      for (std::size_t k = 0; k < n; ++k) s += b[i * n + k] * b[j * n + k];
      t.push_back({i, j, s});
    }
  const SparseSym a(n, std::move(t));
  std::vector<double> rhs(n);
  for (auto& x : rhs) x = rng.normal();
  SolveStats stats;
  const auto x = solveSpd(a, rhs, 1e-10, 20000, &stats);
  const auto ax = a.multiply(x);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (ax[i] - rhs[i]) * (ax[i] - rhs[i]);
    den += rhs[i] * rhs[i];
  }
  EXPECT_LE(std::sqrt(num / den), 1e-10);
  EXPECT_LE(stats.relativeResidual, 1e-10);
  EXPECT_EQ(x, solveSpd(a, rhs));
}

TEST(SolveSpd, NonConvergenceCarriesResidual) {
  const auto mesh = randomSurfaceMesh(2);
  auto l = cotanLaplacian(mesh);
  std::vector<double> b(mesh.vertexCount(), 0.0);
  b[0] = 1;
  b[1] = -1;
  try {
    solveSpd(l, b, 1e-14, 2);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_GT(e.residual(), 1e-14);
    EXPECT_EQ(e.iterations(), 2);
  }
}

TEST(SolveSpd, SemiDefiniteWithProjectedRhs) {
  const auto mesh = randomSurfaceMesh(3);
  const auto l = cotanLaplacian(mesh);
  Rng rng(5);
  std::vector<double> b(mesh.vertexCount());
  for (auto& x : b) x = rng.normal();
  projectOutConstant(b);
  const auto x = solveSpd(l, b);
  const auto lx = l.multiply(x);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(lx[i], b[i], 1e-8);
}

TEST(HeatGeodesic, SourceIsZeroAndFinite) {
  const auto mesh = randomSurfaceMesh(1);
  const auto f = heatGeodesic(mesh, 17);
  EXPECT_EQ(f.source, 17u);
  EXPECT_EQ(f.distances[17], 0.0);
  for (double d : f.distances) {
    EXPECT_TRUE(std::isfinite(d));
    EXPECT_GE(d, 0.0);
  }
}

TEST(HeatGeodesic, FlatGridFromCorner) {
  const auto mesh = makeGridMesh(41, 41, 1, 1);
  const double h = mesh.meanEdgeLength();
  const auto f = heatGeodesic(mesh, 0);
  double worst = 0;
  for (std::size_t v = 0; v < mesh.vertexCount(); ++v) {
    const double e = length(mesh.vertex(v));
    if (e < 5 * h) continue;
    worst = std::max(worst, std::abs(f.distances[v] - e) / e);
  }
  // The square lattice stencil is anisotropic; the worst case sits on the
  // grid axes at about 3.9%.
  EXPECT_LE(worst, 0.045);
}

TEST(HeatGeodesic, IcosphereGreatCircle) {
  const auto mesh = makeIcosphere(3);
  HeatGeodesicSolver solver(mesh);
  Rng rng(9);
  double sum = 0;
  std::size_t count = 0;
  for (int k = 0; k < 12; ++k) {
    const auto s = static_cast<std::uint32_t>(rng.below(mesh.vertexCount()));
    const auto f = solver.distance(s);
    for (std::size_t v = 0; v < mesh.vertexCount(); ++v) {
      const double theta = centralAngle(mesh.vertex(s), mesh.vertex(v));
      if (theta < 20 * M_PI / 180 || theta > 160 * M_PI / 180) continue;
      sum += std::abs(f.distances[v] - theta) / theta;
      ++count;
    }
  }
  EXPECT_LE(sum / static_cast<double>(count), 0.05);
}

TEST(HeatGeodesic, CorrelatesWithDijkstra) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto mesh = randomSurfaceMesh(seed);
    HeatGeodesicSolver solver(mesh);
    Rng rng(seed + 100);
    for (int k = 0; k < 4; ++k) {
      const auto s = static_cast<std::uint32_t>(rng.below(mesh.vertexCount()));
      const auto h = solver.distance(s).distances;
      const auto d = dijkstraGeodesic(mesh, s).distances;
      EXPECT_GE(pearson(h, d), 0.99);
      // The heat distance is smoothed over roughly one edge length around
      // the source, so the straight-line / edge-path bracket holds up to an
      // absolute slack of h.
      const double slack = mesh.meanEdgeLength();
      for (std::size_t v = 0; v < mesh.vertexCount(); ++v) {
        EXPECT_LE(h[v], 1.1 * d[v] + slack);
        EXPECT_GE(h[v], length(mesh.vertex(v) - mesh.vertex(s)) - slack);
      }
    }
  }
}

TEST(HeatGeodesic, ApproximateSymmetry) {
  const auto mesh = makeIcosphere(3);
  HeatGeodesicSolver solver(mesh);
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const auto a = static_cast<std::uint32_t>(rng.below(mesh.vertexCount()));
    const auto b = static_cast<std::uint32_t>(rng.below(mesh.vertexCount()));
    if (a == b) continue;
    const double ab = solver.distance(a).distances[b], ba = solver.distance(b).distances[a];
    if (std::max(ab, ba) < 5 * mesh.meanEdgeLength()) continue;
    EXPECT_LE(std::abs(ab - ba) / std::max(ab, ba), 0.05) << a << " " << b;
  }
}

TEST(HeatGeodesic, ScaleCovariance) {
  const auto mesh = randomSurfaceMesh(7);
  const auto f = heatGeodesic(mesh, 40);
  const auto g = heatGeodesic(mesh.scaled(2.5), 40);
  for (std::size_t v = 0; v < f.distances.size(); ++v)
    EXPECT_NEAR(g.distances[v], 2.5 * f.distances[v], 1e-6 * std::max(1.0, g.distances[v]));
}

TEST(HeatGeodesic, ConjugateGradientMatchesCholesky) {
  const auto mesh = randomSurfaceMesh(8);
  HeatOptions cg;
  cg.solver = LinearSolver::kConjugateGradient;
  const auto a = heatGeodesic(mesh, 100);
  const auto b = heatGeodesic(mesh, 100, cg);
  for (std::size_t v = 0; v < a.distances.size(); ++v) EXPECT_NEAR(a.distances[v], b.distances[v], 1e-6);
}

TEST(HeatGeodesic, DisconnectedComponentsAreUnreachable) {
  const auto a = makeGridMesh(4, 4, 1, 1);
  std::vector<Vec3> v = a.vertices();
  std::vector<Triangle> t = a.triangles();
  const auto off = static_cast<std::uint32_t>(v.size());
  for (const auto& p : a.vertices()) v.push_back(p + Vec3{10, 0, 0});
  for (const auto& tri : a.triangles()) t.push_back({tri[0] + off, tri[1] + off, tri[2] + off});
  v.push_back({0, 20, 0});
  v.push_back({1, 20, 0});
  const TriMesh mesh(v, t);
  HeatGeodesicSolver solver(mesh);
  const auto f = solver.distance(0);
  for (std::uint32_t i = 0; i < off; ++i) EXPECT_TRUE(std::isfinite(f.distances[i]));
  for (std::size_t i = off; i < v.size(); ++i) EXPECT_EQ(f.distances[i], kUnreachable);
  const auto g = solver.distance(off);
  for (std::uint32_t i = 0; i < off; ++i) EXPECT_NEAR(g.distances[off + i], f.distances[i], 1e-9);
  EXPECT_THROW(solver.distance(static_cast<std::uint32_t>(v.size() - 1)), GeometryError);
  EXPECT_THROW(solver.distance(static_cast<std::uint32_t>(v.size())), ValidationError);
}

TEST(HeatGeodesic, RejectsNonPositiveTime) {
  HeatOptions o;
  o.tScale = 0;
  EXPECT_THROW(HeatGeodesicSolver(makeIcosphere(1), o), ValidationError);
}

TEST(Dijkstra, CollinearPath) {
  const TriMesh mesh({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {1, 1, 0}}, {{0, 1, 3}, {1, 2, 3}});
  const auto f = dijkstraGeodesic(mesh, 0);
  EXPECT_DOUBLE_EQ(f.distances[0], 0);
  EXPECT_DOUBLE_EQ(f.distances[1], 1);
  EXPECT_DOUBLE_EQ(f.distances[2], 2);
}

TEST(Dijkstra, BoundsStraightLine) {
  const auto mesh = randomSurfaceMesh(5);
  const auto f = dijkstraGeodesic(mesh, 33);
  for (std::size_t v = 0; v < mesh.vertexCount(); ++v)
    EXPECT_GE(f.distances[v], length(mesh.vertex(v) - mesh.vertex(33)) - 1e-12);
}

TEST(Dijkstra, DiagonalsShortenGridPaths) {
  const auto mesh = makeGridMesh(6, 6, 1, 1);
  const auto f = dijkstraGeodesic(mesh, 0);
  EXPECT_NEAR(f.distances[35], 5 * std::sqrt(2.0), 1e-12);
  EXPECT_LE(f.distances[35], 10.0);
}

TEST(Dijkstra, EarlyExitKeepsTargetsExact) {
  const auto mesh = randomSurfaceMesh(9);
  const auto full = dijkstraGeodesic(mesh, 50);
  const std::vector<std::uint32_t> targets{51, 73, 30};
  const auto part = dijkstraGeodesic(mesh, 50, targets);
  for (auto t : targets) EXPECT_EQ(part.distances[t], full.distances[t]);
  EXPECT_EQ(part.distances[50], 0.0);
}

TEST(GeodesicBatch, MatchesSingleCalls) {
  const auto mesh = randomSurfaceMesh(2);
  HeatGeodesicSolver solver(mesh);
  const std::vector<std::uint32_t> one{12};
  EXPECT_EQ(geodesicBatch(solver, one).fields.at(12), solver.distance(12));
  const std::vector<std::uint32_t> two{200, 12, 200};
  const auto batch = geodesicBatch(solver, two);
  EXPECT_EQ(batch.fields.size(), 2u);
  EXPECT_EQ(batch.fields.at(12), heatGeodesic(mesh, 12));
  EXPECT_EQ(batch.fields.at(200), heatGeodesic(mesh, 200));
}

TEST(GeodesicBatch, ThreadCountIndependentOnIcosphere) {
  const auto mesh = makeIcosphere(4);
  ASSERT_EQ(mesh.vertexCount(), 2562u);
  HeatGeodesicSolver solver(mesh);
  std::vector<std::uint32_t> sources;
  for (std::uint32_t i = 0; i < 100; ++i) sources.push_back(i * 25);
  const auto serial = geodesicBatch(solver, sources, 1);
  const auto parallel = geodesicBatch(solver, sources, 4);
  ASSERT_EQ(serial.fields.size(), 100u);
  EXPECT_EQ(serial.fields, parallel.fields);
  for (std::uint32_t s : {0u, 250u, 2475u}) {
    const auto single = heatGeodesic(mesh, s);
    for (std::size_t v = 0; v < mesh.vertexCount(); ++v)
      EXPECT_NEAR(serial.fields.at(s).distances[v], single.distances[v], 1e-12);
  }
}

TEST(GeodesicBatch, KeepsPartialResults) {
  const TriMesh mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 5}}, {{0, 1, 2}});
  const std::vector<std::uint32_t> sources{0, 3, 9};
  const auto batch = geodesicBatch(mesh, sources);
  EXPECT_EQ(batch.fields.count(0), 1u);
  EXPECT_EQ(batch.failures.count(3), 1u);
  EXPECT_EQ(batch.failures.count(9), 1u);
}

TEST(StraightChord, FlatAndBent) {
  const auto flat = makeGridMesh(8, 8, 1, 1);
  EXPECT_TRUE(straightChordOnSurface(flat, 0, 63));
  EXPECT_TRUE(straightChordOnSurface(flat, 0, 7 * 8 + 3));
  EXPECT_TRUE(straightChordOnSurface(flat, 5, 40));
  std::vector<Vec3> v = flat.vertices();
  v[3 * 8 + 3].z = 0.5;
  const TriMesh bumped(v, flat.triangles());
  EXPECT_FALSE(straightChordOnSurface(bumped, 0, 63));
  EXPECT_TRUE(straightChordOnSurface(bumped, 0, 7));
}

TEST(GeodesicFieldFile, RoundTrip) {
  const auto f = heatGeodesic(randomSurfaceMesh(1), 3);
  const auto bytes = encodeGeodesicField(f);
  EXPECT_EQ(bytes.size(), 12 + 8 * f.distances.size());
  EXPECT_EQ(decodeGeodesicField(bytes), f);
  const auto path = std::filesystem::temp_directory_path() / "geoconv_gfd_test.bin";
  saveGeodesicField(f, path);
  EXPECT_EQ(loadGeodesicField(path), f);
  std::filesystem::remove(path);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decodeGeodesicField(bad), FormatError);
  bad = bytes;
  bad[3] = '2';
  EXPECT_THROW(decodeGeodesicField(bad), VersionError);
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(decodeGeodesicField(bad), FormatError);
}

}  // namespace
