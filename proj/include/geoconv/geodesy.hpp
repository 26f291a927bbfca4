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
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "geoconv/mesh.hpp"
#include "geoconv/sparse.hpp"

namespace geoconv {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Distances from one source vertex to every vertex, in model units.
/// Vertices outside the source's connected component hold kUnreachable.
struct GeodesicField {
  std::uint32_t source = 0;
  std::vector<double> distances;

  bool operator==(const GeodesicField&) const = default;
};

/// Cotangent stiffness matrix: off-diagonal (i,j) = -(cot a + cot b)/2 over the
/// triangles sharing edge ij, diagonal = minus the off-diagonal row sum. The
/// sign convention makes it positive semi-definite.
SparseSym cotanLaplacian(const TriMesh& mesh);

/// Lumped (barycentric) mass: one third of the incident triangle area.
std::vector<double> lumpedMass(const TriMesh& mesh);

enum class LinearSolver {
  kCholesky,           // sparse Cholesky, factored once per mesh component
  kConjugateGradient,  // solveSpd on every call
};

struct HeatOptions {
  double tScale = 1.0;  // heat time t = tScale * h^2, h = mean edge length
  LinearSolver solver = LinearSolver::kCholesky;
  double tolerance = 1e-12;  // PCG relative residual
  int maxIterations = 50000;
};

/// Heat-method geodesic distance with all per-mesh state precomputed.
///
/// Per source: (1) solve (M + tL) u = delta_source, (2) take X = -grad u /
/// |grad u| per triangle, (3) solve L phi = div X with the constant mode
/// projected out, shift phi so phi[source] = 0 and floor at 0. Each connected
/// component gets its own matrices; other components stay kUnreachable.
///
/// distance() is const and safe to call from several threads.
class HeatGeodesicSolver {
 public:
  explicit HeatGeodesicSolver(const TriMesh& mesh, HeatOptions options = {});
  ~HeatGeodesicSolver();
  HeatGeodesicSolver(HeatGeodesicSolver&&) noexcept;
  HeatGeodesicSolver& operator=(HeatGeodesicSolver&&) noexcept;

  GeodesicField distance(std::uint32_t source) const;

  double heatTime() const { return t_; }
  const TriMesh& mesh() const { return *mesh_; }

 private:
  struct Component;
  const TriMesh* mesh_;
  HeatOptions options_;
  double t_ = 0;
  std::vector<std::uint32_t> componentOf_;
  std::vector<std::uint32_t> localIndex_;
  std::vector<std::unique_ptr<Component>> components_;
};

GeodesicField heatGeodesic(const TriMesh& mesh, std::uint32_t source, HeatOptions options = {});

/// Shortest path over mesh edges with Euclidean edge lengths.
GeodesicField dijkstraGeodesic(const TriMesh& mesh, std::uint32_t source);

/// Dijkstra that stops once every target is settled. Only the source and the
/// targets are guaranteed exact; other entries may hold tentative values.
GeodesicField dijkstraGeodesic(const TriMesh& mesh, std::uint32_t source,
                               std::span<const std::uint32_t> targets);

struct GeodesicBatch {
  std::map<std::uint32_t, GeodesicField> fields;
  std::map<std::uint32_t, std::string> failures;  // per-source error messages
};

/// Runs the heat method for every source, sharing one solver. Sources are
/// split across `threads` workers writing disjoint slots, so the result does
/// not depend on the thread count.
GeodesicBatch geodesicBatch(const HeatGeodesicSolver& solver, std::span<const std::uint32_t> sources,
                            int threads = 1);
GeodesicBatch geodesicBatch(const TriMesh& mesh, std::span<const std::uint32_t> sources,
                            HeatOptions options = {}, int threads = 1);

/// True when the straight segment between vertices a and b lies on the mesh
/// surface (walked triangle by triangle through coplanar faces). The surface
/// distance is then exactly the chord length.
bool straightChordOnSurface(const TriMesh& mesh, std::uint32_t a, std::uint32_t b,
                            double relTol = 1e-9);

/// Debug dump "GFD1".
std::vector<std::uint8_t> encodeGeodesicField(const GeodesicField& field);
GeodesicField decodeGeodesicField(std::span<const std::uint8_t> bytes);
void saveGeodesicField(const GeodesicField& field, const std::filesystem::path& path);
GeodesicField loadGeodesicField(const std::filesystem::path& path);

}  // namespace geoconv
