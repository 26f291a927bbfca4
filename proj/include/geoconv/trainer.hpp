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
#include <vector>

#include "geoconv/dataset.hpp"
#include "geoconv/network.hpp"
#include "geoconv/train.hpp"
#include "json.hpp"

namespace geoconv {

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0;  // rest-group learning rate used in this epoch
  double loss = 0;
  std::vector<double> perAuF1;
  double avgF1 = 0;

  nlohmann::json toJson() const;
};

struct TrainOptions {
  OptimConfig optim;
  AugmentFlags augment;
  AuLossConfig loss;  // nAu == 0: balance weights from the training split
  bool balanced = true;
  std::uint64_t seed = 1;
};

/// Network inputs are images mapped from [0, 1] to [-1, 1].
///
/// Mini-batch training over `indices` (default: the training split). Batches
/// are drawn from a per-epoch shuffle; every sample's augmentation draws come
/// from its own (seed, epoch, sample) stream. Each epoch is logged as one
/// JSON line to `log` when given. Throws TrainingFailure when the loss stops
/// being finite.
std::vector<EpochRecord> trainEpochs(Network& net, const SyntheticAuDataset& data, const TrainOptions& options,
                                     std::ostream* log = nullptr, std::span<const std::size_t> indices = {});

struct EvalResult {
  std::vector<double> predictions;  // samples x nAu
  std::vector<std::uint8_t> labels;
  F1Result f1;
  F1Result chance;
};

/// Predictions and F1 on `indices` (default: the test split), no augmentation.
EvalResult evaluate(Network& net, const SyntheticAuDataset& data, std::span<const std::size_t> indices = {},
                    std::size_t batchSize = 32);

/// Builds a batch of images (3 x S x S each) from dataset samples.
Tensor4 imageBatch(const SyntheticAuDataset& data, std::span<const std::size_t> indices);

}  // namespace geoconv
