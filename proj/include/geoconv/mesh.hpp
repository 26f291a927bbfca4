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

#include <array>
#include <cstdint>
#include <vector>

#include "geoconv/vec3.hpp"

namespace geoconv {

using Triangle = std::array<std::uint32_t, 3>;

/// Minimum triangle area (model units squared) accepted by TriMesh.
inline constexpr double kMinTriangleArea = 1e-12;

/// Immutable triangle mesh with derived one-ring adjacency.
///
/// Construction validates indices and rejects degenerate triangles with a
/// GeometryError, since cotangent weights divide by triangle areas.
class TriMesh {
 public:
  TriMesh() = default;
  TriMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles);

  std::size_t vertexCount() const { return vertices_.size(); }
  std::size_t triangleCount() const { return triangles_.size(); }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Vec3& vertex(std::size_t i) const { return vertices_[i]; }
  const Triangle& triangle(std::size_t i) const { return triangles_[i]; }

  /// Sorted neighbor ids of vertex i.
  const std::vector<std::uint32_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
  const std::vector<std::vector<std::uint32_t>>& adjacency() const { return adjacency_; }
  /// Triangles incident to vertex i, in increasing id order.
  const std::vector<std::uint32_t>& vertexTriangles(std::size_t i) const { return vertexTriangles_[i]; }

  double triangleArea(std::size_t t) const;
  Vec3 triangleNormal(std::size_t t) const;  // unit
  double surfaceArea() const;
  double meanEdgeLength() const;

  /// Connected-component label per vertex (components connected by triangles;
  /// isolated vertices get their own label). Labels are 0..count-1 ordered by
  /// lowest vertex id.
  std::vector<std::uint32_t> componentLabels() const;

  /// Copy with every vertex transformed.
  TriMesh scaled(double s) const;

  /// Rebuilds adjacency from the triangle list (used to check consistency).
  static std::vector<std::vector<std::uint32_t>> buildAdjacency(
      std::size_t vertexCount, const std::vector<Triangle>& triangles);

 private:
  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<std::vector<std::uint32_t>> adjacency_;
  std::vector<std::vector<std::uint32_t>> vertexTriangles_;
};

// Procedural meshes used by tests, fixtures and the CLI.

/// Regular grid of nx*ny vertices spanning [x0, x0+(nx-1)dx] x [y0, ...] at
/// z = 0. Each quad is split along the (i,j)-(i+1,j+1) diagonal.
TriMesh makeGridMesh(std::size_t nx, std::size_t ny, double dx, double dy,
                     double x0 = 0, double y0 = 0);

/// Icosahedron subdivided `levels` times and projected onto a sphere.
/// Subdivision 3 gives 642 vertices, 4 gives 2562.
TriMesh makeIcosphere(int levels, double radius = 1.0);

}  // namespace geoconv
