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
#include <span>
#include <vector>

#include "geoconv/mesh.hpp"

namespace geoconv {

/// Identity and expression dimensions of the morphable model (BFM identity,
/// FaceWarehouse expression).
inline constexpr std::size_t kIdentityDims = 100;
inline constexpr std::size_t kExpressionDims = 79;

/// Linear face model: shape = mean + idBasis * wId + expBasis * wExp.
///
/// Bases are stored column-major with 3V rows; row 3i+k is coordinate k of
/// vertex i.
struct MorphableModel {
  std::vector<double> meanShape;  // 3V
  std::vector<double> idBasis;    // 3V x nId, column-major
  std::vector<double> expBasis;   // 3V x nExp, column-major
  std::size_t nId = kIdentityDims;
  std::size_t nExp = kExpressionDims;
  std::vector<Triangle> triangles;

  std::size_t vertexCount() const { return meanShape.size() / 3; }

  /// Throws ShapeError on any dimension disagreement.
  void validate() const;

  bool operator==(const MorphableModel&) const = default;
};

struct ShapeCoeffs {
  std::vector<double> wId;
  std::vector<double> wExp;

  static ShapeCoeffs zeros(const MorphableModel& m) {
    return {std::vector<double>(m.nId, 0.0), std::vector<double>(m.nExp, 0.0)};
  }
  bool operator==(const ShapeCoeffs&) const = default;
};

/// Assembles the mesh for the given coefficients.
TriMesh buildShape(const MorphableModel& model, const ShapeCoeffs& coeffs);

/// Per-coordinate displacement (3V) produced by the coefficients alone, i.e.
/// buildShape minus the mean.
std::vector<double> basisResponse(const MorphableModel& model, const ShapeCoeffs& coeffs);

/// Binary basis format "GMM1".
std::vector<std::uint8_t> encodeMorphableModel(const MorphableModel& model);
MorphableModel decodeMorphableModel(std::span<const std::uint8_t> bytes);
void saveMorphableModel(const MorphableModel& model, const std::filesystem::path& path);
MorphableModel loadMorphableModel(const std::filesystem::path& path);

}  // namespace geoconv
