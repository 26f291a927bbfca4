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
#include <span>
#include <vector>

#include "geoconv/geoweight.hpp"
#include "geoconv/morphable_model.hpp"
#include "geoconv/projection.hpp"
#include "json.hpp"

namespace geoconv {

struct DatasetConfig {
  std::size_t samples = 750;
  std::size_t identities = 30;  // identity k is a test identity when k % 3 == 2
  std::size_t imageSize = 64;
  std::size_t nAu = 2;
  /// Named expression coefficients are drawn from U(-range, range); AU i is
  /// active when |wExp[i]| > threshold.
  double expressionRange = 2.0;
  double threshold = 1.0;
  double identityScale = 0.7;  // standard deviation of identity coefficients
  double poseJitterDegrees = 6.0;
  double pixelNoise = 0.02;
  std::uint64_t seed = 7;
  WeightOptions weights;
  std::vector<ArchLayer> architecture = referenceGeoBranch();

  void validate() const;
  nlohmann::json toJson() const;
};

struct DatasetSample {
  std::uint32_t identity = 0;
  bool train = true;
  ShapeCoeffs coeffs;
  std::array<double, 3> pose{};  // yaw, pitch, roll in radians
  std::vector<float> image;      // 3 x S x S, values in [0, 1]
  std::vector<std::uint8_t> labels;
  GeoWeightStack stack;

  bool operator==(const DatasetSample&) const = default;
};

struct SyntheticAuDataset {
  std::size_t imageSize = 0;
  std::size_t nAu = 0;
  std::vector<double> thresholds;
  nlohmann::json metadata;  // generator configuration
  std::vector<DatasetSample> samples;

  std::vector<std::size_t> indices(bool train) const;
  /// Row-major len(idx) x nAu label table.
  std::vector<std::uint8_t> labelTable(std::span<const std::size_t> idx) const;

  bool operator==(const SyntheticAuDataset&) const = default;
};

nlohmann::json architectureToJson(std::span<const ArchLayer> arch);
std::vector<ArchLayer> architectureFromJson(const nlohmann::json& j);

/// Camera of a sample: the default orthographic framing rotated by the pose.
Camera sampleCamera(std::size_t imageSize, const std::array<double, 3>& pose);

/// Lambertian rendering of the mesh through the correspondence map. Albedo is
/// RGB; uncovered pixels take `background`.
std::vector<float> renderShaded(const TriMesh& mesh, const Camera& camera, const CorrespondenceMap& corr,
                                const std::array<double, 3>& albedo, double background);

/// Samples coefficients and poses, renders each face, compiles its weight
/// stack for `cfg.architecture` and labels it by coefficient thresholds. The
/// AUs are the first nAu expression columns, which must be localized ones.
SyntheticAuDataset makeSyntheticDataset(const MorphableModel& model, const DatasetConfig& cfg);

/// Recompiles every sample's weight stack with other options (for instance
/// without hierarchy compensation) from the stored coefficients and poses.
void recompileWeightStacks(SyntheticAuDataset& data, const MorphableModel& model, const WeightOptions& options,
                           std::span<const ArchLayer> architecture);

/// "GDS1" file: metadata JSON and every sample with its GWS1 stack.
std::vector<std::uint8_t> encodeDataset(const SyntheticAuDataset& data);
SyntheticAuDataset decodeDataset(std::span<const std::uint8_t> bytes);
void saveDataset(const SyntheticAuDataset& data, const std::filesystem::path& path);
SyntheticAuDataset loadDataset(const std::filesystem::path& path);

}  // namespace geoconv
