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

#include <span>
#include <vector>

#include "geoconv/geoweight.hpp"
#include "geoconv/tensor.hpp"

namespace geoconv {

using Tensor4 = Tensor<double>;

/// Same-padded, stride-1 convolution parameters.
struct ConvKernel {
  Tensor4 weight;  // outC x inC x K x K
  std::vector<double> bias;

  ConvKernel() = default;
  ConvKernel(std::size_t outC, std::size_t inC, std::size_t k)
      : weight(outC, inC, k, k), bias(outC, 0.0) {}

  std::size_t outChannels() const { return weight.batch(); }
  std::size_t inChannels() const { return weight.channels(); }
  std::size_t size() const { return weight.height(); }

  /// Throws ShapeError for an even or non-square kernel or a bias of the
  /// wrong length.
  void validate() const;
};

struct ConvGradients {
  Tensor4 input;
  Tensor4 weight;
  std::vector<double> bias;
};

/// Per-sample geodesic weights for a batch: either one entry shared by every
/// sample or one entry per sample.
using GeoSlices = std::span<const LayerWeights* const>;

/// Cross-correlation with zero padding (K - 1) / 2 plus bias.
Tensor4 conv2dForward(const Tensor4& input, const ConvKernel& kernel);

/// GeoConv: every tap of output location p is scaled by g(p, tap) before the
/// sum. g is shared across channels. With g == 1 the result equals
/// conv2dForward bit for bit.
Tensor4 geoConvForward(const Tensor4& input, const ConvKernel& kernel, GeoSlices g);

ConvGradients conv2dBackward(const Tensor4& gradOut, const Tensor4& input, const ConvKernel& kernel);

/// Gradients for input, kernel and bias; g is a constant.
ConvGradients geoConvBackward(const Tensor4& gradOut, const Tensor4& input, const ConvKernel& kernel,
                              GeoSlices g);

}  // namespace geoconv
