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
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "geoconv/geodesy.hpp"
#include "geoconv/mesh.hpp"
#include "geoconv/projection.hpp"

namespace geoconv {

/// Layer kinds understood by the receptive-field algebra. Activations do not
/// move receptive-field centers; everything else is rejected.
enum class ArchLayerKind { kConv, kGeoConv, kMaxPool2, kRelu };

struct ArchLayer {
  ArchLayerKind kind = ArchLayerKind::kConv;
  int kernel = 3;  // convolutions only
  int pad = 1;     // convolutions only
  int stride = 1;  // convolutions only; must be 1

  static ArchLayer conv(int k) { return {ArchLayerKind::kConv, k, (k - 1) / 2, 1}; }
  static ArchLayer geoConv(int k) { return {ArchLayerKind::kGeoConv, k, (k - 1) / 2, 1}; }
  static ArchLayer pool() { return {ArchLayerKind::kMaxPool2, 2, 0, 2}; }
  static ArchLayer relu() { return {ArchLayerKind::kRelu, 1, 0, 1}; }
};

/// Input-plane geometry of one convolution layer. Output location (r, c)
/// of the layer sits at input-pixel index coordinates
/// (offset + stride * r, offset + stride * c); pixel p has its center at p.
struct LayerGeometry {
  int layerIndex = 0;  // position in the architecture list
  int stride = 1;
  double offset = 0;
  int kernel = 3;
  int height = 0, width = 0;

  bool operator==(const LayerGeometry&) const = default;
};

/// Receptive-field recursion over the architecture for an input of
/// inputHeight x inputWidth pixels; one entry per convolution (plain or
/// GeoConv). Throws UnsupportedArchitectureError for strided or unpadded
/// convolutions, even kernels or an odd-sized pool input.
std::vector<LayerGeometry> layerGeometryChain(std::span<const ArchLayer> arch, int inputHeight,
                                              int inputWidth);

/// The geo branch used throughout: four (3x3 conv, relu, pool) blocks and a
/// final 3x3 conv and relu, every convolution a GeoConv.
std::vector<ArchLayer> referenceGeoBranch();

struct WeightOptions {
  double clampRatio = 8.0;
  bool hierarchyCompensation = true;  // false: D_eu forced to 1 ("w/o HC")
  /// Use the exact chord length when the segment between two vertices lies on
  /// the surface.
  bool exactChords = true;
  /// Clamp heat distances into [straight-line distance, edge-path distance].
  bool boundToOracles = true;
  HeatOptions heat;
  int threads = 1;
};

/// Pairwise surface distance between vertices, backed by precomputed fields.
class GeodesicLookup {
 public:
  using TargetMap = std::map<std::uint32_t, std::vector<std::uint32_t>>;

  /// `targets` optionally lists, per source, the vertices that will be
  /// queried; the edge-path bound is then only computed that far.
  GeodesicLookup(const TriMesh& mesh, std::span<const std::uint32_t> sources, const WeightOptions& options,
                 const TargetMap* targets = nullptr);

  /// Throws PrecomputeIncompleteError when no field exists for `from`.
  double distance(std::uint32_t from, std::uint32_t to) const;
  std::size_t sourceCount() const { return heat_.size(); }

 private:
  const TriMesh* mesh_;
  WeightOptions options_;
  std::unordered_map<std::uint32_t, std::vector<double>> heat_;
  std::unordered_map<std::uint32_t, std::vector<double>> edgePath_;
};

/// Ratios D_geo / D_eu for one layer, laid out [row][col][ky][kx]. Center
/// entries are 0 and unused.
struct RatioField {
  LayerGeometry geometry;
  std::vector<double> ratios;

  double at(int r, int c, int ky, int kx) const {
    const auto k = static_cast<std::size_t>(geometry.kernel);
    return ratios[((static_cast<std::size_t>(r) * geometry.width + c) * k + ky) * k + kx];
  }
};

/// Model units to input pixels: the orthographic scale, or focal length over
/// mean covered depth for a perspective camera.
double pixelsPerModelUnit(const Camera& camera, const CorrespondenceMap& corr);

/// Input pixel holding the layer center at index coordinate v: floor(v + 0.5).
int centerPixel(double v);

RatioField ratioField(const CorrespondenceMap& corr, const GeodesicLookup& lookup, double pixelsPerUnit,
                      const LayerGeometry& geometry, const WeightOptions& options);

/// Geodesic weights of one K x K slice, written in place: neighbors get
/// (K^2 - 1) * softmax(-ratio) over the K^2 - 1 neighbors, the center gets 1.
void geoWeightsFromRatios(std::span<const double> ratios, int kernel, std::span<float> weights);

/// Frozen GeoConv weights g for one layer, laid out [row][col][ky][kx].
struct LayerWeights {
  LayerGeometry geometry;
  std::vector<float> g;

  float at(int r, int c, int ky, int kx) const {
    const auto k = static_cast<std::size_t>(geometry.kernel);
    return g[((static_cast<std::size_t>(r) * geometry.width + c) * k + ky) * k + kx];
  }
  bool operator==(const LayerWeights&) const = default;
};

struct GeoWeightStack {
  std::string imageId;
  double clampRatio = 8.0;
  bool hierarchyCompensation = true;
  std::vector<LayerWeights> layers;  // one per GeoConv layer, in architecture order

  bool operator==(const GeoWeightStack&) const = default;
};

struct CompileStats {
  std::size_t sources = 0;
  double geodesicSeconds = 0;
  double assemblySeconds = 0;
};

/// Builds weights for every GeoConv layer of `arch` at the camera's image
/// size. The geodesic fields for all nearest vertices of all needed centers
/// are computed in one batch. Any failed source aborts the compile.
GeoWeightStack compileWeights(const CorrespondenceMap& corr, const TriMesh& mesh, const Camera& camera,
                              std::span<const ArchLayer> arch, const WeightOptions& options = {},
                              const std::string& imageId = "", CompileStats* stats = nullptr);

/// "GWS1" file.
std::vector<std::uint8_t> encodeWeightStack(const GeoWeightStack& stack);
GeoWeightStack decodeWeightStack(std::span<const std::uint8_t> bytes);
void saveWeightStack(const GeoWeightStack& stack, const std::filesystem::path& path);
GeoWeightStack loadWeightStack(const std::filesystem::path& path);

}  // namespace geoconv
