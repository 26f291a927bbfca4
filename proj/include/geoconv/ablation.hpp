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
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "geoconv/dataset.hpp"
#include "geoconv/trainer.hpp"

namespace geoconv {

/// One row of an ablation study.
struct AblationVariant {
  std::string name;
  std::vector<bool> mask;
  bool hierarchyCompensation = true;  // false: weights recompiled with D_eu forced to 1
  bool balanced = true;               // false: uniform w_i and p_i = 1

  /// "G_(10101)" (or bare bits), "w/o HC" or "w/o BW". The two "w/o" forms
  /// keep GeoConv in every geo-branch layer.
  static AblationVariant parse(const std::string& text, std::size_t geoLayers);
};

struct AblationRow {
  std::string name;
  std::vector<double> perAuF1;      // mean over seeds
  double avgF1 = 0;                 // mean over seeds
  std::vector<double> seedAvgF1;    // one per seed
  std::vector<double> finalLoss;    // last training loss per seed
};

struct AblationSetup {
  NetSpec base;  // mask is replaced per variant
  TrainOptions training;
  std::vector<std::uint64_t> seeds = {1};
};

/// Trains and evaluates every variant for every seed. Network seed and
/// training seed are both the listed seed. `model` is needed only when a
/// variant recompiles weight stacks.
std::vector<AblationRow> runAblation(const SyntheticAuDataset& data, const MorphableModel* model,
                                     std::span<const AblationVariant> variants, const AblationSetup& setup,
                                     std::ostream* progress = nullptr);

/// Tab-separated table with a header row: variant, one column per AU, avg.
/// A final "chance" row holds the all-positive predictor.
void writeF1Table(std::ostream& out, std::span<const AblationRow> rows, std::size_t nAu, const F1Result& chance);

}  // namespace geoconv
