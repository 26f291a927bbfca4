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

#include "geoconv/train.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "geoconv/errors.hpp"

namespace geoconv {

AuLossConfig AuLossConfig::uniform(std::size_t nAu) {
  AuLossConfig c;
  c.nAu = nAu;
  c.classWeights.assign(nAu, 1.0 / static_cast<double>(nAu));
  c.positiveWeights.assign(nAu, 1.0);
  return c;
}

void AuLossConfig::validate() const {
  if (nAu == 0) throw ValidationError("loss needs at least one AU");
  if (classWeights.size() != nAu || positiveWeights.size() != nAu)
    throw ShapeError("loss weights must have nAu entries");
  double sum = 0;
  for (double w : classWeights) {
    if (!(w > 0)) throw ValidationError("class weights must be positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("class weights must sum to 1");
  for (double p : positiveWeights)
    if (!(p >= 0)) throw ValidationError("positive weights must be non-negative");
}

double AuLossConfig::w(std::size_t i) const {
  return balancedEnabled ? classWeights[i] : 1.0 / static_cast<double>(nAu);
}

double AuLossConfig::p(std::size_t i) const { return balancedEnabled ? positiveWeights[i] : 1.0; }

AuLossConfig BalanceWeights::config() const {
  AuLossConfig c;
  c.nAu = w.size();
  c.classWeights = w;
  c.positiveWeights = p;
  return c;
}

BalanceWeights computeBalanceWeights(std::span<const std::uint8_t> labels, std::size_t nAu) {
  if (nAu == 0 || labels.size() % nAu != 0) throw ShapeError("label table is not samples x nAu");
  BalanceWeights b;
  b.samples = labels.size() / nAu;
  b.positives.assign(nAu, 0);
  for (std::size_t s = 0; s < b.samples; ++s)
    for (std::size_t i = 0; i < nAu; ++i) b.positives[i] += labels[s * nAu + i] != 0;
  const double n = static_cast<double>(b.samples);
  double sum = 0;
  for (std::size_t i = 0; i < nAu; ++i) {
    if (b.positives[i] == 0 || b.positives[i] == b.samples)
      throw DegenerateClassError("AU " + std::to_string(i) + " has " + std::to_string(b.positives[i]) +
                                 " positives out of " + std::to_string(b.samples) + " samples");
    sum += n / static_cast<double>(b.positives[i]);
  }
  for (std::size_t i = 0; i < nAu; ++i) {
    const double pos = static_cast<double>(b.positives[i]);
    b.w.push_back((n / pos) / sum);
    b.p.push_back(static_cast<double>(b.samples - b.positives[i]) / pos);
  }
  return b;
}

namespace {

void checkLossShapes(const Tensor4& pred, const Tensor4& labels, const AuLossConfig& cfg) {
  if (pred.shape() != labels.shape())
    throw ShapeError("predictions " + Tensor4::describe(pred.shape()) + " and labels " +
                     Tensor4::describe(labels.shape()) + " differ");
  if (pred.sampleSize() != cfg.nAu || cfg.classWeights.size() != cfg.nAu || cfg.positiveWeights.size() != cfg.nAu)
    throw ShapeError("loss expects " + std::to_string(cfg.nAu) + " outputs per sample, got " +
                     std::to_string(pred.sampleSize()));
}

double clampProb(double y) { return std::clamp(y, kProbabilityClamp, 1.0 - kProbabilityClamp); }

}  // namespace

double auLoss(const Tensor4& pred, const Tensor4& labels, const AuLossConfig& cfg) {
  checkLossShapes(pred, labels, cfg);
  const std::size_t N = pred.batch(), A = cfg.nAu;
  double total = 0;
  for (std::size_t n = 0; n < N; ++n) {
    double l = 0;
    for (std::size_t i = 0; i < A; ++i) {
      const double y = labels.values()[n * A + i], yh = clampProb(pred.values()[n * A + i]);
      l -= cfg.w(i) * (cfg.p(i) * y * std::log(yh) + (1.0 - y) * std::log(1.0 - yh));
    }
    total += l;
  }
  return total / static_cast<double>(N);
}

Tensor4 auLossGradient(const Tensor4& pred, const Tensor4& labels, const AuLossConfig& cfg) {
  checkLossShapes(pred, labels, cfg);
  const std::size_t N = pred.batch(), A = cfg.nAu;
  Tensor4 g(pred.shape());
  const double inv = 1.0 / static_cast<double>(N);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < A; ++i) {
      const std::size_t k = n * A + i;
      const double y = labels.values()[k], yh = clampProb(pred.values()[k]);
      g.values()[k] = -inv * cfg.w(i) * (cfg.p(i) * y / yh - (1.0 - y) / (1.0 - yh));
    }
  return g;
}

F1Result f1Frame(std::span<const double> preds, std::span<const std::uint8_t> labels, std::size_t nAu,
                 double threshold) {
  if (nAu == 0 || preds.size() != labels.size() || preds.size() % nAu != 0)
    throw ShapeError("predictions and labels must both be samples x nAu");
  F1Result r;
  for (std::size_t i = 0; i < nAu; ++i) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t k = i; k < preds.size(); k += nAu) {
      const bool p = preds[k] >= threshold, y = labels[k] != 0;
      tp += p && y;
      fp += p && !y;
      fn += !p && y;
    }
    const double precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) * 100.0 : 0.0;
    r.perAu.push_back(f1);
    r.average += f1;
  }
  r.average /= static_cast<double>(nAu);
  return r;
}

F1Result chanceF1(std::span<const std::uint8_t> labels, std::size_t nAu) {
  std::vector<double> ones(labels.size(), 1.0);
  return f1Frame(ones, labels, nAu);
}

void OptimConfig::validate() const {
  if (!(lrBackbone > 0) || !(lrRest > 0)) throw ValidationError("learning rates must be positive");
  if (momentum < 0 || momentum >= 1) throw ValidationError("momentum must be in [0, 1)");
  if (weightDecay < 0) throw ValidationError("weight decay must be non-negative");
  if (epochs < 0 || horizon < 0) throw ValidationError("epochs and horizon must be non-negative");
  if (batchSize == 0) throw ValidationError("batch size must be positive");
}

double cosineLr(double lr0, double t, double horizon) {
  if (horizon <= 0) return lr0;
  return lr0 * (1.0 + std::cos(M_PI * t / horizon)) / 2.0;
}

void NesterovSgd::step(std::span<const ParameterRef> params, double scale) {
  if (velocity_.size() != params.size()) {
    velocity_.assign(params.size(), {});
    for (std::size_t k = 0; k < params.size(); ++k) velocity_[k].assign(params[k].value->size(), 0.0);
  }
  const double mu = config_.momentum, wd = config_.weightDecay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& theta = *params[k].value;
    const auto& grad = *params[k].grad;
    auto& v = velocity_[k];
    if (v.size() != theta.size()) throw ShapeError("parameter " + params[k].name + " changed size");
    const double lr = scale * (params[k].backbone ? config_.lrBackbone : config_.lrRest);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i] + wd * theta[i];
      v[i] = mu * v[i] + g;
      theta[i] -= config_.nesterov ? lr * (g + mu * v[i]) : lr * v[i];
    }
  }
}

namespace {

void rgbToHsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0;
  if (d <= 0) {
    h = 0;
    return;
  }
  if (mx == r) {
    h = (g - b) / d;
  } else if (mx == g) {
    h = 2.0 + (b - r) / d;
  } else {
    h = 4.0 + (r - g) / d;
  }
  h /= 6.0;
  if (h < 0) h += 1.0;
}

void hsvToRgb(double h, double s, double v, double& r, double& g, double& b) {
  const double h6 = h * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

void checkImage(std::span<double> image, std::size_t pixels) {
  if (image.size() != 3 * pixels) throw ShapeError("augmentation expects a 3-channel image");
}

}  // namespace

void applyColorJitter(std::span<double> image, std::size_t pixels, double hue, double saturation, double value) {
  checkImage(image, pixels);
  double* R = image.data();
  double* G = R + pixels;
  double* B = G + pixels;
  for (std::size_t i = 0; i < pixels; ++i) {
    double h, s, v;
    rgbToHsv(R[i], G[i], B[i], h, s, v);
    h = h * hue;
    h -= std::floor(h);
    s = std::clamp(s * saturation, 0.0, 1.0);
    v = std::clamp(v * value, 0.0, 1.0);
    hsvToRgb(h, s, v, R[i], G[i], B[i]);
    R[i] = std::clamp(R[i], 0.0, 1.0);
    G[i] = std::clamp(G[i], 0.0, 1.0);
    B[i] = std::clamp(B[i], 0.0, 1.0);
  }
}

void augmentColorJitter(std::span<double> image, std::size_t pixels, Rng& rng) {
  const double h = rng.uniform(0.6, 1.4), s = rng.uniform(0.6, 1.4), v = rng.uniform(0.6, 1.4);
  applyColorJitter(image, pixels, h, s, v);
}

void applyPcaNoise(std::span<double> image, std::size_t pixels, const std::array<double, 3>& alpha) {
  checkImage(image, pixels);
  if (alpha[0] == 0 && alpha[1] == 0 && alpha[2] == 0) return;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < pixels; ++i) mean[c] += image[c * pixels + i];
  mean /= static_cast<double>(pixels);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < pixels; ++i) {
    Eigen::Vector3d x(image[i] - mean[0], image[pixels + i] - mean[1], image[2 * pixels + i] - mean[2]);
    cov += x * x.transpose();
  }
  cov /= static_cast<double>(pixels);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Eigen::Vector3d shift = Eigen::Vector3d::Zero();
  for (int k = 0; k < 3; ++k)
    shift += alpha[static_cast<std::size_t>(k)] * std::max(0.0, eig.eigenvalues()[k]) * eig.eigenvectors().col(k);
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < pixels; ++i) {
      double& x = image[c * pixels + i];
      x = std::clamp(x + shift[c], 0.0, 1.0);
    }
}

void augmentPcaNoise(std::span<double> image, std::size_t pixels, Rng& rng) {
  std::array<double, 3> alpha{};
  for (auto& a : alpha) a = rng.normal(0.0, 0.1);
  applyPcaNoise(image, pixels, alpha);
}

}  // namespace geoconv
