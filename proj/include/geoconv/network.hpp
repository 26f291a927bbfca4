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
#include <string>
#include <vector>

#include "geoconv/conv.hpp"
#include "geoconv/geoweight.hpp"
#include "json.hpp"

namespace geoconv {

enum class LayerKind { kConv, kGeoConv, kRelu, kMaxPool2, kFlatten, kFullyConnected, kSigmoid, kConcatBranches };

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t outputs = 0;  // channels of a convolution, features of a fully-connected layer
  int kernel = 3;           // convolutions only

  static LayerSpec conv(std::size_t channels, int k = 3) { return {LayerKind::kConv, channels, k}; }
  static LayerSpec geoConv(std::size_t channels, int k = 3) { return {LayerKind::kGeoConv, channels, k}; }
  static LayerSpec relu() { return {LayerKind::kRelu, 0, 0}; }
  static LayerSpec pool() { return {LayerKind::kMaxPool2, 0, 0}; }
  static LayerSpec flatten() { return {LayerKind::kFlatten, 0, 0}; }
  static LayerSpec fullyConnected(std::size_t features) { return {LayerKind::kFullyConnected, features, 0}; }
  static LayerSpec sigmoid() { return {LayerKind::kSigmoid, 0, 0}; }
  static LayerSpec concat() { return {LayerKind::kConcatBranches, 0, 0}; }

  bool isConv() const { return kind == LayerKind::kConv || kind == LayerKind::kGeoConv; }
  bool operator==(const LayerSpec&) const = default;
};

/// Two-branch network: the geo branch and the backbone both read the image,
/// their outputs are concatenated along channels and fed to the head.
///
/// Geo-branch convolutions may be written as conv or geoConv; geoMask alone
/// decides which of them apply geodesic weights. GeoConv layers anywhere
/// else are rejected.
struct NetSpec {
  std::size_t inputChannels = 3;
  std::size_t inputSize = 64;
  std::size_t nAu = 2;
  std::vector<LayerSpec> geoBranch;
  std::vector<LayerSpec> backbone;
  std::vector<LayerSpec> head;  // starts with concat
  std::vector<bool> geoMask;    // one entry per geo-branch convolution

  /// Toy two-branch network: geo branch of five 3x3 convolutions
  /// (8, 16, 16, 32, 32) each followed by relu, with a pool after the first
  /// four; backbone of four pooled blocks of two 3x3 convolutions; head
  /// concat, flatten, fc(hidden), relu, fc(nAu), sigmoid.
  static NetSpec toy(std::size_t nAu, std::vector<bool> mask, std::size_t inputSize = 64,
                     std::size_t hidden = 64);

  /// Parses "11111", "G_(10100)" and the like.
  static std::vector<bool> parseMask(const std::string& text);
  /// "G_(11111)".
  std::string maskName() const;

  std::size_t geoConvCount() const;
  bool usesGeoWeights() const;

  /// Receptive-field architecture of the geo branch with every convolution
  /// marked GeoConv, so compiled stacks cover every mask.
  std::vector<ArchLayer> geoArchitecture() const;

  /// Throws ValidationError or ShapeError (fusion mismatch, bad head).
  void validate() const;

  nlohmann::json toJson() const;
  static NetSpec fromJson(const nlohmann::json& j);

  bool operator==(const NetSpec&) const = default;
};

/// View of one trainable tensor and its gradient.
struct ParameterRef {
  std::string name;
  std::vector<double>* value;
  std::vector<double>* grad;
  std::vector<std::size_t> shape;
  bool backbone;  // trained with the backbone learning rate
};

class Network {
 public:
  /// He fan-in initialization: weights N(0, 2 / fanIn), biases 0.
  Network(NetSpec spec, std::uint64_t seed);

  const NetSpec& spec() const { return spec_; }

  /// Probabilities N x nAu x 1 x 1. `stacks` holds one weight stack shared by
  /// the batch or one per sample; it may be empty when no mask bit is set.
  /// Stack layer j feeds geo-branch convolution j.
  Tensor4 forward(const Tensor4& images, std::span<const GeoWeightStack* const> stacks);

  /// Accumulates parameter gradients from dLoss/dProbabilities of the last
  /// forward call.
  void backward(const Tensor4& gradOutput);

  void zeroGrad();
  std::vector<ParameterRef> parameters();
  std::size_t parameterCount() const;

  /// Output of every geo-branch convolution in the last forward call.
  std::vector<Tensor4::Shape> geoFeatureShapes() const;

 private:
  struct Node {
    LayerSpec spec;
    bool geo = false;  // applies geodesic weights
    int geoSlot = -1;  // index of this convolution within the geo branch
    ConvKernel kernel;
    ConvKernel grad;
    Tensor4 input;
    Tensor4 output;
    std::vector<std::uint32_t> argmax;
  };

  Tensor4 runForward(std::vector<Node>& nodes, Tensor4 x);
  Tensor4 runBackward(std::vector<Node>& nodes, Tensor4 g);
  void build(std::vector<Node>& nodes, const std::vector<LayerSpec>& layers, Tensor4::Shape& shape,
             bool geoBranch, std::uint64_t seed, std::uint64_t& counter);

  NetSpec spec_;
  std::vector<Node> geo_, backbone_, head_;
  std::size_t geoChannels_ = 0;
  std::vector<std::vector<const LayerWeights*>> slices_;  // per geo slot, for the current batch
};

/// "GCK1" checkpoint: spec JSON and every parameter tensor (f64).
std::vector<std::uint8_t> encodeCheckpoint(Network& net);
Network decodeCheckpoint(std::span<const std::uint8_t> bytes);
void saveCheckpoint(Network& net, const std::filesystem::path& path);
Network loadCheckpoint(const std::filesystem::path& path);

}  // namespace geoconv
