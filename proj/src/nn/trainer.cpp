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

#include "geoconv/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "geoconv/errors.hpp"
#include "geoconv/rng.hpp"

namespace geoconv {

namespace {

constexpr std::uint64_t kShuffleStream = 3;
constexpr std::uint64_t kAugmentStream = 4;

std::vector<const GeoWeightStack*> stacksFor(const Network& net, const SyntheticAuDataset& data,
                                             std::span<const std::size_t> idx) {
  std::vector<const GeoWeightStack*> out;
  if (!net.spec().usesGeoWeights()) return out;
  for (auto i : idx) {
    if (data.samples[i].stack.layers.empty())
      throw ValidationError("sample " + std::to_string(i) + " has no weight stack");
    out.push_back(&data.samples[i].stack);
  }
  return out;
}

Tensor4 labelBatch(const SyntheticAuDataset& data, std::span<const std::size_t> idx) {
  Tensor4 y(idx.size(), data.nAu, 1, 1);
  for (std::size_t b = 0; b < idx.size(); ++b)
    for (std::size_t i = 0; i < data.nAu; ++i) y(b, i, 0, 0) = data.samples[idx[b]].labels[i];
  return y;
}

void checkCompatible(const Network& net, const SyntheticAuDataset& data) {
  const auto& spec = net.spec();
  if (spec.inputSize != data.imageSize || spec.inputChannels != 3 || spec.nAu != data.nAu)
    throw ShapeError("network expects " + std::to_string(spec.inputSize) + "px images and " +
                     std::to_string(spec.nAu) + " AUs, dataset has " + std::to_string(data.imageSize) + "px and " +
                     std::to_string(data.nAu));
}

// Maps [0, 1] pixels to [-1, 1] after augmentation.
void centerInPlace(Tensor4& x) {
  for (auto& v : x.values()) v = 2.0 * v - 1.0;
}

}  // namespace

nlohmann::json EpochRecord::toJson() const {
  return {{"epoch", epoch}, {"lr", lr}, {"loss", loss}, {"perAuF1", perAuF1}, {"avgF1", avgF1}};
}

Tensor4 imageBatch(const SyntheticAuDataset& data, std::span<const std::size_t> indices) {
  const std::size_t S = data.imageSize;
  Tensor4 x(indices.size(), 3, S, S);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& img = data.samples[indices[b]].image;
    std::copy(img.begin(), img.end(), x.sample(b));
  }
  return x;
}

std::vector<EpochRecord> trainEpochs(Network& net, const SyntheticAuDataset& data, const TrainOptions& options,
                                     std::ostream* log, std::span<const std::size_t> indices) {
  options.optim.validate();
  checkCompatible(net, data);
  std::vector<std::size_t> pool(indices.begin(), indices.end());
  if (pool.empty()) pool = data.indices(true);
  if (pool.empty()) throw ValidationError("training set is empty");

  AuLossConfig loss = options.loss;
  if (loss.nAu == 0) loss = computeBalanceWeights(data.labelTable(pool), data.nAu).config();
  loss.balancedEnabled = options.balanced;
  loss.validate();
  if (loss.nAu != data.nAu) throw ShapeError("loss configuration does not match the dataset AU count");

  NesterovSgd opt(options.optim);
  const int horizon = options.optim.horizon > 0 ? options.optim.horizon : options.optim.epochs;
  const std::size_t pixels = data.imageSize * data.imageSize;
  std::vector<EpochRecord> records;

  for (int e = 0; e < options.optim.epochs; ++e) {
    const double scale = cosineLr(1.0, e, horizon);
    std::vector<std::size_t> order = pool;
    Rng shuffle = Rng::stream(options.seed, kShuffleStream, static_cast<std::uint64_t>(e));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double lossSum = 0;
    std::vector<double> preds;
    std::vector<std::uint8_t> labels;
    for (std::size_t start = 0; start < order.size(); start += options.optim.batchSize) {
      const std::size_t end = std::min(order.size(), start + options.optim.batchSize);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      Tensor4 x = imageBatch(data, idx);
      for (std::size_t b = 0; b < idx.size(); ++b) {
        Rng rng = Rng::stream(options.seed, kAugmentStream + 2 * static_cast<std::uint64_t>(e), idx[b]);
        std::span<double> img(x.sample(b), x.sampleSize());
        if (options.augment.colorJitter) augmentColorJitter(img, pixels, rng);
        if (options.augment.pcaNoise) augmentPcaNoise(img, pixels, rng);
      }
      centerInPlace(x);
      const Tensor4 y = labelBatch(data, idx);
      const auto stacks = stacksFor(net, data, idx);
      net.zeroGrad();
      const Tensor4 p = net.forward(x, stacks);
      const double l = auLoss(p, y, loss);
      if (!std::isfinite(l)) throw TrainingFailure("training loss is not finite", e + 1);
      net.backward(auLossGradient(p, y, loss));
      const auto params = net.parameters();
      opt.step(params, scale);
      lossSum += l * static_cast<double>(idx.size());
      preds.insert(preds.end(), p.values().begin(), p.values().end());
      for (auto i : idx) labels.insert(labels.end(), data.samples[i].labels.begin(), data.samples[i].labels.end());
    }
    EpochRecord rec;
    rec.epoch = e + 1;
    rec.lr = options.optim.lrRest * scale;
    rec.loss = lossSum / static_cast<double>(pool.size());
    const auto f1 = f1Frame(preds, labels, data.nAu);
    rec.perAuF1 = f1.perAu;
    rec.avgF1 = f1.average;
    for (const auto& prm : net.parameters())
      for (double v : *prm.value)
        if (!std::isfinite(v)) throw TrainingFailure("parameter " + prm.name + " is not finite", e + 1);
    if (log) *log << rec.toJson().dump() << '\n' << std::flush;
    records.push_back(std::move(rec));
  }
  return records;
}

EvalResult evaluate(Network& net, const SyntheticAuDataset& data, std::span<const std::size_t> indices,
                    std::size_t batchSize) {
  checkCompatible(net, data);
  std::vector<std::size_t> pool(indices.begin(), indices.end());
  if (pool.empty()) pool = data.indices(false);
  if (pool.empty()) throw ValidationError("evaluation set is empty");
  if (batchSize == 0) throw ValidationError("batch size must be positive");
  EvalResult r;
  for (std::size_t start = 0; start < pool.size(); start += batchSize) {
    const std::size_t end = std::min(pool.size(), start + batchSize);
    std::span<const std::size_t> idx(pool.data() + start, end - start);
    const auto stacks = stacksFor(net, data, idx);
    Tensor4 x = imageBatch(data, idx);
    centerInPlace(x);
    const Tensor4 p = net.forward(x, stacks);
    r.predictions.insert(r.predictions.end(), p.values().begin(), p.values().end());
  }
  r.labels = data.labelTable(pool);
  r.f1 = f1Frame(r.predictions, r.labels, data.nAu);
  r.chance = chanceF1(r.labels, data.nAu);
  return r;
}

}  // namespace geoconv
