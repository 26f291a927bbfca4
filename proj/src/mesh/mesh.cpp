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

#include "geoconv/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "geoconv/errors.hpp"

namespace geoconv {

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  const auto n = vertices_.size();
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    for (auto v : tri)
      if (v >= n)
        throw GeometryError("triangle " + std::to_string(t) + " references vertex " +
                            std::to_string(v) + " of " + std::to_string(n));
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw GeometryError("triangle " + std::to_string(t) + " repeats a vertex");
    if (!(triangleArea(t) > kMinTriangleArea))
      throw GeometryError("triangle " + std::to_string(t) + " is degenerate");
  }
  adjacency_ = buildAdjacency(n, triangles_);
  vertexTriangles_.assign(n, {});
  for (std::size_t t = 0; t < triangles_.size(); ++t)
    for (auto v : triangles_[t]) vertexTriangles_[v].push_back(static_cast<std::uint32_t>(t));
}

std::vector<std::vector<std::uint32_t>> TriMesh::buildAdjacency(
    std::size_t vertexCount, const std::vector<Triangle>& triangles) {
  std::vector<std::vector<std::uint32_t>> adj(vertexCount);
  for (const auto& tri : triangles)
    for (int k = 0; k < 3; ++k) {
      adj[tri[k]].push_back(tri[(k + 1) % 3]);
      adj[tri[k]].push_back(tri[(k + 2) % 3]);
    }
  for (auto& ring : adj) {
    std::sort(ring.begin(), ring.end());
    ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
  }
  return adj;
}

double TriMesh::triangleArea(std::size_t t) const {
  const auto& tri = triangles_[t];
  const Vec3& a = vertices_[tri[0]];
  return 0.5 * length(cross(vertices_[tri[1]] - a, vertices_[tri[2]] - a));
}

Vec3 TriMesh::triangleNormal(std::size_t t) const {
  const auto& tri = triangles_[t];
  const Vec3& a = vertices_[tri[0]];
  return normalize(cross(vertices_[tri[1]] - a, vertices_[tri[2]] - a));
}

double TriMesh::surfaceArea() const {
  double sum = 0;
  for (std::size_t t = 0; t < triangles_.size(); ++t) sum += triangleArea(t);
  return sum;
}

double TriMesh::meanEdgeLength() const {
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < adjacency_.size(); ++i)
    for (auto j : adjacency_[i])
      if (j > i) {
        sum += length(vertices_[j] - vertices_[i]);
        ++count;
      }
  return count ? sum / static_cast<double>(count) : 0.0;
}

std::vector<std::uint32_t> TriMesh::componentLabels() const {
  const auto n = vertices_.size();
  std::vector<std::uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& tri : triangles_)
    for (int k = 1; k < 3; ++k) {
      auto a = find(tri[0]), b = find(tri[k]);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  std::vector<std::uint32_t> label(n);
  std::map<std::uint32_t, std::uint32_t> ids;
  for (std::size_t i = 0; i < n; ++i) {
    auto root = find(static_cast<std::uint32_t>(i));
    auto [it, inserted] = ids.emplace(root, static_cast<std::uint32_t>(ids.size()));
    label[i] = it->second;
  }
  return label;
}

TriMesh TriMesh::scaled(double s) const {
  auto v = vertices_;
  for (auto& p : v) p *= s;
  return TriMesh(std::move(v), triangles_);
}

TriMesh makeGridMesh(std::size_t nx, std::size_t ny, double dx, double dy, double x0,
                     double y0) {
  std::vector<Vec3> v;
  v.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i)
      v.push_back({x0 + dx * static_cast<double>(i), y0 + dy * static_cast<double>(j), 0.0});
  std::vector<Triangle> t;
  t.reserve(2 * (nx - 1) * (ny - 1));
  auto id = [nx](std::size_t i, std::size_t j) { return static_cast<std::uint32_t>(j * nx + i); };
  for (std::size_t j = 0; j + 1 < ny; ++j)
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      t.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      t.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return TriMesh(std::move(v), std::move(t));
}

TriMesh makeIcosphere(int levels, double radius) {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0},
                         {0, -1, p}, {0, 1, p}, {0, -1, -p}, {0, 1, -p},
                         {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& q : v) q = normalize(q);
  for (int l = 0; l < levels; ++l) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back(normalize((v[a] + v[b]) * 0.5));
      auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const auto& t : f) {
      auto a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (auto& q : v) q *= radius;
  return TriMesh(std::move(v), std::move(f));
}

}  // namespace geoconv
