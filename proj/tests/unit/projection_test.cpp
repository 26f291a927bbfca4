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
#include <deque>
#include <filesystem>

#include "geoconv/errors.hpp"
#include "geoconv/morphable_model.hpp"
#include "geoconv/projection.hpp"
#include "geoconv/rng.hpp"
#include "geoconv/synthetic_face.hpp"

namespace {

using namespace geoconv;

TriMesh referenceFace() {
  const auto model = makeSyntheticFaceModel(32, 0);
  return buildShape(model, ShapeCoeffs::zeros(model));
}

Camera unitOrtho(int w, int h) {
  Camera c;
  c.width = w;
  c.height = h;
  return c;
}

// Flood fill over 4-neighbours starting from every seed with the given value.
std::size_t floodCount(const std::vector<bool>& mask, int w, int h, bool value, bool seedBorder) {
  std::vector<bool> seen(mask.size(), false);
  std::deque<int> queue;
  auto push = [&](int i) {
    if (mask[i] == value && !seen[i]) {
      seen[i] = true;
      queue.push_back(i);
    }
  };
  if (seedBorder) {
    for (int x = 0; x < w; ++x) {
      push(x);
      push((h - 1) * w + x);
    }
    for (int y = 0; y < h; ++y) {
      push(y * w);
      push(y * w + w - 1);
    }
  } else {
    for (int i = 0; i < w * h && queue.empty(); ++i) push(i);
  }
  std::size_t n = 0;
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    ++n;
    const int x = i % w, y = i / w;
    if (x > 0) push(i - 1);
    if (x + 1 < w) push(i + 1);
    if (y > 0) push(i - w);
    if (y + 1 < h) push(i + w);
  }
  return n;
}

TEST(Camera, Validation) {
  auto c = unitOrtho(4, 4);
  EXPECT_NO_THROW(c.validate());
  c.scale = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = unitOrtho(0, 4);
  EXPECT_THROW(c.validate(), ValidationError);
  c = unitOrtho(4, 4);
  c.rotation(0, 0) = 1.1;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(ProjectVertices, OrthographicIdentity) {
  const TriMesh mesh({{3, 4, 5}, {4, 4, 5}, {3, 5, 5}}, {{0, 1, 2}});
  const auto p = projectVertices(mesh, unitOrtho(8, 8));
  EXPECT_DOUBLE_EQ(p[0].x, 3);
  EXPECT_DOUBLE_EQ(p[0].y, 4);
  EXPECT_DOUBLE_EQ(p[0].depth, 5);
}

TEST(ProjectVertices, PerspectivePinhole) {
  const TriMesh mesh({{1, 0, 10}, {0, 0, 10}, {0, 1, -1}}, {{0, 1, 2}});
  const auto p = projectVertices(mesh, Camera::perspective(100, 64, 48));
  EXPECT_DOUBLE_EQ(p[0].x - 32, 10);
  EXPECT_DOUBLE_EQ(p[0].y, 24);
  EXPECT_TRUE(p[0].valid);
  EXPECT_FALSE(p[2].valid);
}

TEST(ProjectVertices, RotationCovariance) {
  const auto mesh = referenceFace();
  const Mat3 q = axisAngle({0.3, -1, 0.5}, 0.7);
  std::vector<Vec3> rotated;
  for (const auto& v : mesh.vertices()) rotated.push_back(q * v);
  const TriMesh moved(rotated, mesh.triangles());
  const auto cam = Camera::orthographicDefault(32, 32);
  auto cam2 = cam;
  cam2.rotation = cam.rotation * q.transposed();
  const auto a = projectVertices(mesh, cam), b = projectVertices(moved, cam2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].x, b[i].x, 1e-9);
    EXPECT_NEAR(a[i].y, b[i].y, 1e-9);
  }
}

TEST(Rasterize, SingleTriangle) {
  const TriMesh mesh({{-10, -10, 1}, {30, -10, 1}, {-10, 30, 1}}, {{0, 1, 2}});
  const auto map = rasterize(mesh, unitOrtho(8, 8));
  const auto& p = map.at(2, 3);
  ASSERT_TRUE(p.covered());
  EXPECT_EQ(p.triangle, 0);
  EXPECT_NEAR(p.barycentric[0] + p.barycentric[1] + p.barycentric[2], 1.0, 1e-6);
  EXPECT_EQ(map.coveredCount(), 64u);
}

TEST(Rasterize, NearerTriangleWins) {
  const TriMesh mesh({{0, 0, 5}, {8, 0, 5}, {0, 8, 5}, {0, 0, 2}, {8, 0, 2}, {0, 8, 2}},
                     {{0, 1, 2}, {3, 4, 5}});
  const auto map = rasterize(mesh, unitOrtho(8, 8));
  EXPECT_EQ(map.at(1, 1).triangle, 1);
  EXPECT_FLOAT_EQ(map.at(1, 1).depth, 2.0f);
}

TEST(Rasterize, EqualDepthLowestIdWins) {
  const TriMesh mesh({{0, 0, 5}, {8, 0, 5}, {0, 8, 5}, {0, 0, 5}, {8, 0, 5}, {0, 8, 5}},
                     {{3, 4, 5}, {0, 1, 2}});
  const auto map = rasterize(mesh, unitOrtho(8, 8));
  EXPECT_EQ(map.at(1, 1).triangle, 0);
}

TEST(Rasterize, EdgeCentersAreInside) {
  // The shared diagonal passes exactly through pixel centers.
  const TriMesh mesh({{0.5, 0.5, 0}, {3.5, 0.5, 0}, {3.5, 3.5, 0}, {0.5, 3.5, 0}}, {{0, 1, 2}, {0, 2, 3}});
  const auto map = rasterize(mesh, unitOrtho(4, 4));
  EXPECT_EQ(map.coveredCount(), 16u);
  EXPECT_EQ(map.at(1, 1).triangle, 0);
}

TEST(Rasterize, ReferenceFaceCoverageAndGolden) {
  const auto map = rasterize(referenceFace(), Camera::orthographicDefault(32, 32));
  std::vector<bool> mask(map.pixels.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = map.pixels[i].covered();
  const auto covered = map.coveredCount();
  EXPECT_GT(covered, 0.4 * 1024);
  EXPECT_EQ(floodCount(mask, 32, 32, true, false), covered);              // connected
  EXPECT_EQ(floodCount(mask, 32, 32, false, true), 1024 - covered);       // no holes
  EXPECT_EQ(surfacePointFor(map, 16, 16), std::optional<std::uint32_t>(528));
  EXPECT_EQ(rasterize(referenceFace(), Camera::orthographicDefault(32, 32)), map);
}

TEST(Rasterize, InvariantsOnTiltedFace) {
  const auto mesh = referenceFace();
  auto cam = Camera::orthographicDefault(48, 40);
  cam.rotation = axisAngle({0, 1, 0}, 0.5) * axisAngle({1, 0, 0}, 0.3);
  const auto map = rasterize(mesh, cam);
  const auto proj = projectVertices(mesh, cam);
  ASSERT_GT(map.coveredCount(), 100u);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) {
      const auto& s = map.at(x, y);
      if (!s.covered()) continue;
      const auto& tri = mesh.triangle(s.triangle);
      const auto& b = s.barycentric;
      EXPECT_NEAR(b[0] + b[1] + b[2], 1.0, 1e-6);
      for (float v : b) EXPECT_GE(v, 0.0f);
      // Reprojection of the barycentric surface point.
      Vec3 p{0, 0, 0};
      for (int k = 0; k < 3; ++k) p += mesh.vertex(tri[k]) * b[k];
      const Vec3 q = cam.rotation * p + cam.translation;
      EXPECT_LE(std::hypot(cam.scale * q.x - (x + 0.5), cam.scale * q.y - (y + 0.5)), 0.75);
      // Nearest vertex has the largest barycentric.
      int best = 0;
      for (int k = 1; k < 3; ++k)
        if (b[k] > b[best]) best = k;
      EXPECT_NEAR(b[best], b[std::find(tri.begin(), tri.end(), s.nearestVertex) - tri.begin()], 1e-6);
      // No other covering triangle is strictly nearer.
      for (std::size_t f = 0; f < mesh.triangleCount(); ++f) {
        const auto& t = mesh.triangle(f);
        const auto &a0 = proj[t[0]], &a1 = proj[t[1]], &a2 = proj[t[2]];
        const double area = (a1.x - a0.x) * (a2.y - a0.y) - (a1.y - a0.y) * (a2.x - a0.x);
        if (std::abs(area) < 1e-12) continue;
        const double px = x + 0.5, py = y + 0.5;
        const double w0 = ((a1.x - px) * (a2.y - py) - (a1.y - py) * (a2.x - px)) / area;
        const double w1 = ((a2.x - px) * (a0.y - py) - (a2.y - py) * (a0.x - px)) / area;
        const double w2 = 1 - w0 - w1;
        if (w0 < 1e-6 || w1 < 1e-6 || w2 < 1e-6) continue;
        EXPECT_GE(w0 * a0.depth + w1 * a1.depth + w2 * a2.depth, s.depth - 1e-5);
      }
    }
}

TEST(SurfacePoint, VertexAndCentroid) {
  const TriMesh mesh({{0.5, 0.5, 0}, {6.5, 0.5, 0}, {0.5, 6.5, 0}}, {{2, 0, 1}});
  const auto map = rasterize(mesh, unitOrtho(8, 8));
  EXPECT_EQ(surfacePointFor(map, 0, 0), std::optional<std::uint32_t>(0));
  EXPECT_EQ(surfacePointFor(map, 6, 0), std::optional<std::uint32_t>(1));
  EXPECT_EQ(surfacePointFor(map, 2, 2), std::optional<std::uint32_t>(0));  // centroid (2.5, 2.5): tie
  EXPECT_EQ(surfacePointFor(map, 7, 7), std::nullopt);
  EXPECT_EQ(surfacePointFor(map, -1, 0), std::nullopt);
}

TEST(DepthMap, FlatPlaneIsZeroOnCoverage) {
  const TriMesh mesh({{0, 0, 3}, {4, 0, 3}, {0, 4, 3}}, {{0, 1, 2}});
  const auto d = depthMap(rasterize(mesh, unitOrtho(6, 6)));
  EXPECT_EQ(d(0, 0, 0, 0), 0.0);
  EXPECT_EQ(d(0, 0, 5, 5), 1.0);
  const TriMesh full({{-1, -1, 3}, {9, -1, 3}, {-1, 9, 3}}, {{0, 1, 2}});
  const auto flat = depthMap(rasterize(full, unitOrtho(4, 4)));
  for (double v : flat.values()) EXPECT_EQ(v, 0.0);
}

TEST(DepthMap, TwoPlanes) {
  const TriMesh mesh({{0, 0, 1}, {2, 0, 1}, {0, 4, 1}, {2, 0, 7}, {4, 0, 7}, {4, 4, 7}, {2, 4, 7}},
                     {{0, 1, 2}, {3, 4, 5}, {3, 5, 6}});
  const auto d = depthMap(rasterize(mesh, unitOrtho(4, 4)), 1.0);
  EXPECT_EQ(d(0, 0, 0, 0), 0.0);
  EXPECT_EQ(d(0, 0, 1, 3), 1.0);
}

TEST(DepthMap, NoseTipIsNearest) {
  const auto model = makeSyntheticFaceModel(32, 0);
  const auto map = rasterize(buildShape(model, ShapeCoeffs::zeros(model)), Camera::orthographicDefault(32, 32));
  const auto d = depthMap(map);
  std::size_t arg = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.data()[i] < d.data()[arg]) arg = i;
  EXPECT_EQ(map.pixels[arg].nearestVertex, syntheticNoseTip(model));
}

TEST(DepthMap, EmptyCoverage) {
  CorrespondenceMap empty{3, 2, std::vector<PixelSample>(6)};
  const auto d = depthMap(empty);
  for (double v : d.values()) EXPECT_EQ(v, 0.0);
}

TEST(CorrespondenceFile, RoundTripAndErrors) {
  auto cam = Camera::orthographicDefault(20, 16);
  const auto map = rasterize(referenceFace(), cam);
  const auto bytes = encodeCorrespondence(map);
  EXPECT_EQ(bytes.size(), 12u + 24u * 320u);
  EXPECT_EQ(decodeCorrespondence(bytes), map);
  const auto path = std::filesystem::temp_directory_path() / "geoconv_crs_test.bin";
  saveCorrespondence(map, path);
  EXPECT_EQ(loadCorrespondence(path), map);
  std::filesystem::remove(path);
  auto bad = bytes;
  bad[1] = 'Q';
  EXPECT_THROW(decodeCorrespondence(bad), FormatError);
  bad = bytes;
  bad[3] = '9';
  EXPECT_THROW(decodeCorrespondence(bad), VersionError);
  bad = bytes;
  bad.resize(bytes.size() - 5);
  EXPECT_THROW(decodeCorrespondence(bad), FormatError);
}

}  // namespace
