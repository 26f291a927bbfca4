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

namespace geoconv {

struct GradCheckResult {
  double maxRelativeError = 0;
  std::size_t checked = 0;  // number of compared partial derivatives
};

/// |a - b| / max(|a|, |b|, floor).
double relativeError(double a, double b, double floor);

/// Central differences of <geoConvForward(x), probe> against geoConvBackward
/// on a 2 x 3 x 8 x 8 input with four 3 x 3 filters and random per-sample
/// weight slices: every weight and bias and every seventh input entry.
/// Floor 1e-8.
GradCheckResult geoConvGradCheck(std::uint64_t seed);

/// Central differences of the balanced AU loss against backpropagation for a
/// two-branch network with one convolution per branch (GeoConv in the geo
/// branch) on 8 x 8 inputs: every parameter. Floor 1e-6.
GradCheckResult networkGradCheck(std::uint64_t seed);

}  // namespace geoconv
