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
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "geoconv/mesh.hpp"
#include "geoconv/tensor.hpp"
#include "geoconv/vec3.hpp"

namespace geoconv {

enum class Projection { kOrthographic, kPerspective };

/// Maps model space to pixels. Camera space is R*v + t with x right, y down
/// and z pointing away from the viewer, so smaller depth is nearer.
///
/// Orthographic: pixel = scale * (R*v + t).xy.
/// Perspective: pixel = scale * (X/Z, Y/Z) + principal point, scale being the
/// focal length in pixels.
struct Camera {
  Projection mode = Projection::kOrthographic;
  double scale = 1.0;
  Mat3 rotation = Mat3::identity();
  Vec3 translation{0, 0, 0};
  int width = 1;
  int height = 1;
  double cx = 0, cy = 0;  // principal point, perspective only

  /// Throws ValidationError on a non-orthonormal rotation, non-positive scale
  /// or image size.
  void validate() const;

  /// Orthographic camera framing model coordinates [-1, 1]^2 in the image:
  /// scale = 0.45 * min(W, H), translation = (W / 2s, H / 2s, 0).
  static Camera orthographicDefault(int width, int height);

  /// Pinhole camera with the principal point at the image center.
  static Camera perspective(double focal, int width, int height, Mat3 rotation = Mat3::identity(),
                            Vec3 translation = {0, 0, 0});

  bool operator==(const Camera&) const = default;
};

struct ProjectedVertex {
  double x = 0, y = 0;  // pixels, origin at the top-left image corner
  double depth = 0;     // camera-space z in model units
  bool valid = true;    // false when a perspective point is at or behind the camera plane
};

std::vector<ProjectedVertex> projectVertices(const TriMesh& mesh, const Camera& camera);

inline constexpr std::int32_t kNoTriangle = -1;

struct PixelSample {
  std::int32_t triangle = kNoTriangle;
  std::array<float, 3> barycentric{0, 0, 0};
  std::uint32_t nearestVertex = 0;
  float depth = 0;

  bool covered() const { return triangle != kNoTriangle; }
  bool operator==(const PixelSample&) const = default;
};

/// Pixel-to-surface correspondence, row-major.
struct CorrespondenceMap {
  int width = 0, height = 0;
  std::vector<PixelSample> pixels;

  const PixelSample& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  PixelSample& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t coveredCount() const;

  bool operator==(const CorrespondenceMap&) const = default;
};

/// Z-buffered rasterization sampled at pixel centers (col + 0.5, row + 0.5).
/// A pixel center on a triangle edge counts as inside. At exactly equal depth
/// the lowest triangle id wins. The nearest vertex is the one with the largest
/// barycentric, ties going to the lowest vertex id.
CorrespondenceMap rasterize(const TriMesh& mesh, const Camera& camera);

/// Depth as a 1x1xHxW tensor. Uncovered pixels get `background` (default: the
/// largest covered depth + 1), then the map is min-max normalized to [0, 1].
/// A constant map normalizes to 0; an empty coverage gives all zeros.
Tensor<double> depthMap(const CorrespondenceMap& corr, std::optional<double> background = std::nullopt);

/// Nearest surface vertex for a pixel, or nullopt when the pixel is uncovered
/// or outside the image.
std::optional<std::uint32_t> surfacePointFor(const CorrespondenceMap& corr, int x, int y);

/// "CRS1" dump.
std::vector<std::uint8_t> encodeCorrespondence(const CorrespondenceMap& corr);
CorrespondenceMap decodeCorrespondence(std::span<const std::uint8_t> bytes);
void saveCorrespondence(const CorrespondenceMap& corr, const std::filesystem::path& path);
CorrespondenceMap loadCorrespondence(const std::filesystem::path& path);

}  // namespace geoconv
