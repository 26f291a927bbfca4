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
#include <span>
#include <vector>

#include "geoconv/network.hpp"
#include "geoconv/rng.hpp"

namespace geoconv {

/// Per-AU weights of the balanced multi-label cross-entropy.
struct AuLossConfig {
  std::size_t nAu = 0;
  std::vector<double> classWeights;     // w_i > 0, sum 1
  std::vector<double> positiveWeights;  // p_i >= 0
  bool balancedEnabled = true;          // off: w_i = 1 / nAu and p_i = 1

  static AuLossConfig uniform(std::size_t nAu);

  /// Throws ValidationError on a broken invariant.
  void validate() const;
  double w(std::size_t i) const;
  double p(std::size_t i) const;
};

struct BalanceWeights {
  std::size_t samples = 0;
  std::vector<std::size_t> positives;  // n_i^pos
  std::vector<double> w;
  std::vector<double> p;

  AuLossConfig config() const;
};

/// Counts positives per AU in a row-major samples x nAu 0/1 table.
/// w_i = (n / n_i) / sum_j (n / n_j), p_i = (n - n_i) / n_i.
/// Throws DegenerateClassError for an AU that is all positive or all negative.
BalanceWeights computeBalanceWeights(std::span<const std::uint8_t> labels, std::size_t nAu);

inline constexpr double kProbabilityClamp = 1e-7;

/// -sum_i w_i [p_i y_i log y^_i + (1 - y_i) log(1 - y^_i)], averaged over the
/// batch; predictions are clamped to [1e-7, 1 - 1e-7] first. `pred` and
/// `labels` are N x nAu (any trailing unit dims).
double auLoss(const Tensor4& pred, const Tensor4& labels, const AuLossConfig& cfg);

/// d auLoss / d pred, evaluated at the clamped prediction.
Tensor4 auLossGradient(const Tensor4& pred, const Tensor4& labels, const AuLossConfig& cfg);

struct F1Result {
  std::vector<double> perAu;  // percent
  double average = 0;
};

/// Frame-based F1 per AU, 0 when precision + recall is 0.
F1Result f1Frame(std::span<const double> preds, std::span<const std::uint8_t> labels, std::size_t nAu,
                 double threshold = 0.5);

/// F1 of the predictor that always answers positive.
F1Result chanceF1(std::span<const std::uint8_t> labels, std::size_t nAu);

struct OptimConfig {
  double momentum = 0.9;
  double weightDecay = 0.0005;
  bool nesterov = true;
  double lrBackbone = 0.01;
  double lrRest = 0.01;
  int epochs = 10;
  int horizon = 0;  // cosine horizon in epochs; 0 means `epochs`
  std::size_t batchSize = 16;

  void validate() const;
};

/// lr0 * (1 + cos(pi * t / T)) / 2.
double cosineLr(double lr0, double t, double horizon);

/// SGD with momentum and coupled L2: g += wd * theta, v = mu v + g, and
/// theta -= lr (g + mu v) with Nesterov, theta -= lr v without.
class NesterovSgd {
 public:
  explicit NesterovSgd(OptimConfig config) : config_(config) {}

  /// `scale` multiplies both base learning rates (the schedule factor).
  void step(std::span<const ParameterRef> params, double scale);
  const OptimConfig& config() const { return config_; }

 private:
  OptimConfig config_;
  std::vector<std::vector<double>> velocity_;
};

struct AugmentFlags {
  bool colorJitter = true;
  bool pcaNoise = true;
};

/// Images are 3 x H x W planes with values in [0, 1].
/// Scales hue, saturation and value by the given factors in HSV space and
/// clips back to [0, 1]; hue wraps around.
void applyColorJitter(std::span<double> image, std::size_t pixels, double hue, double saturation, double value);

/// Factors drawn independently from U(0.6, 1.4).
void augmentColorJitter(std::span<double> image, std::size_t pixels, Rng& rng);

/// Adds sum_k alpha_k lambda_k e_k to every pixel, with (lambda_k, e_k) the
/// eigenpairs of the image's 3 x 3 channel covariance, then clips to [0, 1].
void applyPcaNoise(std::span<double> image, std::size_t pixels, const std::array<double, 3>& alpha);

/// alpha_k ~ N(0, 0.1).
void augmentPcaNoise(std::span<double> image, std::size_t pixels, Rng& rng);

}  // namespace geoconv
