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
#include <vector>

#include "geoconv/morphable_model.hpp"

namespace geoconv {

/// Named localized expression columns of the synthetic face model.
enum class SyntheticExpression : std::size_t {
  kBrowRaise = 0,
  kMouthOpen = 1,
  kCheekRaise = 2,
  kNoseWrinkle = 3,
};
inline constexpr std::size_t kNamedExpressions = 4;

/// Deterministic stand-in for a real morphable model.
///
/// The mean shape is a resolution x resolution height field over
/// [-1, 1]^2 in a camera-aligned frame: x to the right, y downwards and z
/// pointing away from the viewer, so the nose tip has the smallest z. The
/// identity basis holds smooth low-frequency random displacement fields; the
/// expression basis starts with the named localized deformations above,
/// followed by random compactly supported bumps.
MorphableModel makeSyntheticFaceModel(std::size_t resolution, std::uint64_t seed,
                                      std::size_t nId = kIdentityDims,
                                      std::size_t nExp = kExpressionDims);

/// Vertex ids inside the declared support of expression column `column`.
/// Outside this set the column is exactly zero.
/// Only the named columns declare a support region.
std::vector<std::uint32_t> syntheticExpressionSupport(const MorphableModel& model,
                                                      SyntheticExpression column);

/// Vertex with minimum z in the mean shape (the nose tip).
std::uint32_t syntheticNoseTip(const MorphableModel& model);

}  // namespace geoconv
