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

#include "geoconv/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geoconv/binary_io.hpp"
#include "geoconv/errors.hpp"

namespace geoconv {

void Camera::validate() const {
  if (!(scale > 0) || !std::isfinite(scale)) throw ValidationError("camera scale must be positive");
  if (width <= 0 || height <= 0) throw ValidationError("camera image size must be positive");
  const Mat3 rrt = rotation * rotation.transposed();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (std::abs(rrt(r, c) - (r == c ? 1.0 : 0.0)) > 1e-8)
        throw ValidationError("camera rotation is not orthonormal");
}

Camera Camera::orthographicDefault(int width, int height) {
  Camera c;
  c.width = width;
  c.height = height;
  c.scale = 0.45 * std::min(width, height);
  c.translation = {width / (2 * c.scale), height / (2 * c.scale), 0};
  return c;
}

Camera Camera::perspective(double focal, int width, int height, Mat3 rotation, Vec3 translation) {
  Camera c;
  c.mode = Projection::kPerspective;
  c.scale = focal;
  c.width = width;
  c.height = height;
  c.rotation = rotation;
  c.translation = translation;
  c.cx = width / 2.0;
  c.cy = height / 2.0;
  return c;
}

std::vector<ProjectedVertex> projectVertices(const TriMesh& mesh, const Camera& camera) {
  camera.validate();
  std::vector<ProjectedVertex> out;
  out.reserve(mesh.vertexCount());
  for (const auto& v : mesh.vertices()) {
    const Vec3 p = camera.rotation * v + camera.translation;
    ProjectedVertex q;
    q.depth = p.z;
    if (camera.mode == Projection::kOrthographic) {
      q.x = camera.scale * p.x;
      q.y = camera.scale * p.y;
    } else if (p.z > 0) {
      q.x = camera.scale * p.x / p.z + camera.cx;
      q.y = camera.scale * p.y / p.z + camera.cy;
    } else {
      q.valid = false;
    }
    out.push_back(q);
  }
  return out;
}

std::size_t CorrespondenceMap::coveredCount() const {
  return static_cast<std::size_t>(
      std::count_if(pixels.begin(), pixels.end(), [](const PixelSample& p) { return p.covered(); }));
}

namespace {

// Edge slack in barycentric units so that centers on a shared edge are not
// lost to rounding in both neighbours.
constexpr double kEdgeSlack = 1e-9;

}  // namespace

CorrespondenceMap rasterize(const TriMesh& mesh, const Camera& camera) {
  const auto proj = projectVertices(mesh, camera);
  CorrespondenceMap map;
  map.width = camera.width;
  map.height = camera.height;
  map.pixels.assign(static_cast<std::size_t>(camera.width) * camera.height, PixelSample{});
  std::vector<double> zbuf(map.pixels.size(), std::numeric_limits<double>::infinity());

  for (std::size_t f = 0; f < mesh.triangleCount(); ++f) {
    const auto& tri = mesh.triangle(f);
    const auto &a = proj[tri[0]], &b = proj[tri[1]], &c = proj[tri[2]];
    if (!a.valid || !b.valid || !c.valid) continue;
    const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (!(std::abs(area) > 1e-12)) continue;
    const double minX = std::min({a.x, b.x, c.x}), maxX = std::max({a.x, b.x, c.x});
    const double minY = std::min({a.y, b.y, c.y}), maxY = std::max({a.y, b.y, c.y});
    const int x0 = std::max(0, static_cast<int>(std::floor(minX - 0.5)));
    const int x1 = std::min(camera.width - 1, static_cast<int>(std::ceil(maxX - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(minY - 0.5)));
    const int y1 = std::min(camera.height - 1, static_cast<int>(std::ceil(maxY - 0.5)));
    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        std::array<double, 3> w{
            ((b.x - px) * (c.y - py) - (b.y - py) * (c.x - px)) / area,
            ((c.x - px) * (a.y - py) - (c.y - py) * (a.x - px)) / area,
            ((a.x - px) * (b.y - py) - (a.y - py) * (b.x - px)) / area,
        };
        if (w[0] < -kEdgeSlack || w[1] < -kEdgeSlack || w[2] < -kEdgeSlack) continue;
        for (auto& v : w) v = std::max(0.0, v);
        const double sum = w[0] + w[1] + w[2];
        for (auto& v : w) v /= sum;
        const double depth = w[0] * a.depth + w[1] * b.depth + w[2] * c.depth;
        const std::size_t idx = static_cast<std::size_t>(y) * camera.width + x;
        if (!(depth < zbuf[idx])) continue;
        zbuf[idx] = depth;
        auto& s = map.pixels[idx];
        s.triangle = static_cast<std::int32_t>(f);
        s.barycentric = {static_cast<float>(w[0]), static_cast<float>(w[1]), static_cast<float>(w[2])};
        s.depth = static_cast<float>(depth);
        const double best = std::max({w[0], w[1], w[2]});
        std::uint32_t pick = std::numeric_limits<std::uint32_t>::max();
        for (int k = 0; k < 3; ++k)
          if (w[k] >= best - 1e-9) pick = std::min(pick, tri[k]);
        s.nearestVertex = pick;
      }
    }
  }
  return map;
}

Tensor<double> depthMap(const CorrespondenceMap& corr, std::optional<double> background) {
  Tensor<double> out(1, 1, static_cast<std::size_t>(corr.height), static_cast<std::size_t>(corr.width));
  double maxDepth = -std::numeric_limits<double>::infinity();
  for (const auto& p : corr.pixels)
    if (p.covered()) maxDepth = std::max(maxDepth, static_cast<double>(p.depth));
  if (!std::isfinite(maxDepth)) return out;
  const double bg = background.value_or(maxDepth + 1.0);
  std::vector<double> d(corr.pixels.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = corr.pixels[i].covered() ? corr.pixels[i].depth : bg;
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  const double range = *hi - *lo;
  if (range > 0)
    for (std::size_t i = 0; i < d.size(); ++i) out.data()[i] = (d[i] - *lo) / range;
  return out;
}

std::optional<std::uint32_t> surfacePointFor(const CorrespondenceMap& corr, int x, int y) {
  if (x < 0 || y < 0 || x >= corr.width || y >= corr.height) return std::nullopt;
  const auto& p = corr.at(x, y);
  if (!p.covered()) return std::nullopt;
  return p.nearestVertex;
}

std::vector<std::uint8_t> encodeCorrespondence(const CorrespondenceMap& corr) {
  io::ByteWriter w;
  w.magic("CRS1");
  w.put(static_cast<std::uint32_t>(corr.width));
  w.put(static_cast<std::uint32_t>(corr.height));
  for (const auto& p : corr.pixels) {
    w.put(p.triangle);
    for (float b : p.barycentric) w.put(b);
    w.put(p.nearestVertex);
    w.put(p.depth);
  }
  return w.take();
}

CorrespondenceMap decodeCorrespondence(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "correspondence map");
  r.expectMagic("CRS1");
  CorrespondenceMap corr;
  const auto w = r.get<std::uint32_t>(), h = r.get<std::uint32_t>();
  if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16))
    throw FormatError("correspondence map: bad image size");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  r.need(n * 24);
  corr.width = static_cast<int>(w);
  corr.height = static_cast<int>(h);
  corr.pixels.resize(n);
  for (auto& p : corr.pixels) {
    p.triangle = r.get<std::int32_t>();
    for (auto& b : p.barycentric) b = r.get<float>();
    p.nearestVertex = r.get<std::uint32_t>();
    p.depth = r.get<float>();
    if (p.triangle < kNoTriangle) throw FormatError("correspondence map: bad triangle id");
  }
  if (r.remaining() != 0) throw FormatError("correspondence map: trailing bytes");
  return corr;
}

void saveCorrespondence(const CorrespondenceMap& corr, const std::filesystem::path& path) {
  io::writeFile(path, encodeCorrespondence(corr));
}

CorrespondenceMap loadCorrespondence(const std::filesystem::path& path) {
  return decodeCorrespondence(io::readFile(path));
}

}  // namespace geoconv
