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

#include <gtest/gtest.h>

#include <cmath>

#include "geoconv/conv.hpp"
#include "geoconv/errors.hpp"
#include "geoconv/rng.hpp"

namespace {

using namespace geoconv;

Tensor4 randomTensor(Tensor4::Shape shape, Rng& rng) {
  Tensor4 t(shape);
  for (auto& v : t.values()) v = rng.uniform(-1, 1);
  return t;
}

ConvKernel randomKernel(std::size_t oc, std::size_t ic, std::size_t k, Rng& rng) {
  ConvKernel kernel(oc, ic, k);
  for (auto& v : kernel.weight.values()) v = rng.uniform(-1, 1);
  for (auto& v : kernel.bias) v = rng.uniform(-1, 1);
  return kernel;
}

// Random valid slice: center 1, neighbors a softmax-normalized pattern.
LayerWeights randomSlice(int h, int w, int k, Rng& rng) {
  LayerWeights l;
  l.geometry.height = h;
  l.geometry.width = w;
  l.geometry.kernel = k;
  l.g.resize(static_cast<std::size_t>(h) * w * k * k);
  std::vector<double> ratios(k * k);
  for (std::size_t i = 0; i < l.g.size(); i += k * k) {
    for (auto& r : ratios) r = rng.uniform(0, 3);
    geoWeightsFromRatios(ratios, k, std::span(l.g).subspan(i, k * k));
  }
  return l;
}

LayerWeights unitSlice(int h, int w, int k) {
  LayerWeights l;
  l.geometry.height = h;
  l.geometry.width = w;
  l.geometry.kernel = k;
  l.g.assign(static_cast<std::size_t>(h) * w * k * k, 1.0f);
  return l;
}

double dotProduct(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double relError(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  const auto x = randomTensor({2, 1, 5, 6}, rng);
  ConvKernel k(1, 1, 1);
  k.weight(0, 0, 0, 0) = 1.0;
  EXPECT_EQ(conv2dForward(x, k), x);
}

TEST(Conv2d, OnesKernelCountsValidTaps) {
  Tensor4 x(1, 1, 5, 5, 1.0);
  ConvKernel k(1, 1, 3);
  k.weight.fill(1.0);
  const auto y = conv2dForward(x, k);
  EXPECT_EQ(y(0, 0, 2, 2), 9.0);
  EXPECT_EQ(y(0, 0, 0, 0), 4.0);
  EXPECT_EQ(y(0, 0, 4, 4), 4.0);
  EXPECT_EQ(y(0, 0, 0, 2), 6.0);
}

TEST(Conv2d, Linearity) {
  Rng rng(2);
  const auto x = randomTensor({1, 3, 6, 6}, rng);
  auto k = randomKernel(2, 3, 3, rng);
  std::fill(k.bias.begin(), k.bias.end(), 0.0);
  auto x2 = x;
  for (auto& v : x2.values()) v *= 2.5;
  const auto a = conv2dForward(x, k), b = conv2dForward(x2, k);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b.data()[i], 2.5 * a.data()[i], 1e-12);
}

TEST(Conv2d, ShapeErrors) {
  Rng rng(3);
  const auto x = randomTensor({1, 3, 4, 4}, rng);
  EXPECT_THROW(conv2dForward(x, ConvKernel(2, 2, 3)), ShapeError);
  EXPECT_THROW(conv2dForward(x, ConvKernel(2, 3, 2)), ShapeError);
  auto k = ConvKernel(2, 3, 3);
  k.bias.pop_back();
  EXPECT_THROW(conv2dForward(x, k), ShapeError);
}

TEST(GeoConv, UnitWeightsMatchConvBitwise) {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = randomTensor({2, 3, 7, 9}, rng);
    const auto k = randomKernel(4, 3, trial % 2 ? 5 : 3, rng);
    const auto unit = unitSlice(7, 9, static_cast<int>(k.size()));
    const LayerWeights* g[] = {&unit};
    EXPECT_EQ(geoConvForward(x, k, g), conv2dForward(x, k));
    const auto gy = randomTensor({2, 4, 7, 9}, rng);
    const auto a = geoConvBackward(gy, x, k, g), b = conv2dBackward(gy, x, k);
    EXPECT_EQ(a.input, b.input);
    EXPECT_EQ(a.weight, b.weight);
    EXPECT_EQ(a.bias, b.bias);
  }
}

TEST(GeoConv, BumpySliceUnderConstantInput) {
  // The interior location of a 3x3 map sees all nine taps.
  Tensor4 x3(1, 1, 3, 3, 1.0);
  ConvKernel k(1, 1, 3);
  k.weight.fill(1.0);
  LayerWeights slice = unitSlice(3, 3, 3);
  std::vector<double> ratios(9, 1.0);
  ratios[0] = 2.0;
  geoWeightsFromRatios(ratios, 3, std::span(slice.g).subspan(4 * 9, 9));
  const LayerWeights* g[] = {&slice};
  const auto y = geoConvForward(x3, k, g);
  const double expected = 1 + 7 * 8 * std::exp(-1.0) / (7 * std::exp(-1.0) + std::exp(-2.0)) +
                          8 * std::exp(-2.0) / (7 * std::exp(-1.0) + std::exp(-2.0));
  EXPECT_NEAR(y(0, 0, 1, 1), expected, 1e-6);
  EXPECT_NEAR(y(0, 0, 1, 1), 9.0, 1e-5);
}

TEST(GeoConv, DoublingOneTapDoublesItsContribution) {
  Rng rng(5);
  const auto x = randomTensor({1, 2, 5, 5}, rng);
  const auto k = randomKernel(3, 2, 3, rng);
  auto slice = randomSlice(5, 5, 3, rng);
  // Contribution of input tap (ci=1, y=1, x=3) to output (2, 2) is linear in x.
  auto contribution = [&](const LayerWeights& s) {
    const LayerWeights* gg[] = {&s};
    auto xp = x;
    xp(0, 1, 1, 3) += 1.0;
    return geoConvForward(xp, k, gg)(0, 1, 2, 2) - geoConvForward(x, k, gg)(0, 1, 2, 2);
  };
  const double before = contribution(slice);
  auto doubled = slice;
  doubled.g[(2 * 5 + 2) * 9 + 0 * 3 + 2] *= 2.0f;  // ky=0, kx=2 reaches (1, 3)
  EXPECT_NEAR(contribution(doubled), 2 * before, 1e-12);
}

TEST(GeoConv, ConstantInputIdentityPerSlice) {
  Rng rng(6);
  auto slice = randomSlice(6, 6, 3, rng);
  Tensor4 x(1, 1, 6, 6, 2.5);
  ConvKernel k(1, 1, 3);
  k.weight.fill(1.0);
  const LayerWeights* g[] = {&slice};
  const auto y = geoConvForward(x, k, g);
  for (int r = 1; r < 5; ++r)
    for (int c = 1; c < 5; ++c) EXPECT_NEAR(y(0, 0, r, c), 2.5 * 9, 1e-5);
}

TEST(GeoConv, PerSampleSlices) {
  Rng rng(7);
  const auto x = randomTensor({2, 2, 4, 4}, rng);
  const auto k = randomKernel(2, 2, 3, rng);
  const auto s0 = randomSlice(4, 4, 3, rng), s1 = randomSlice(4, 4, 3, rng);
  const LayerWeights* both[] = {&s0, &s1};
  const auto y = geoConvForward(x, k, both);
  Tensor4 x1(1, 2, 4, 4);
  std::copy(x.sample(1), x.sample(1) + x.sampleSize(), x1.data());
  const LayerWeights* only1[] = {&s1};
  const auto y1 = geoConvForward(x1, k, only1);
  for (std::size_t i = 0; i < y1.size(); ++i) EXPECT_EQ(y.sample(1)[i], y1.data()[i]);
}

TEST(GeoConv, StackErrors) {
  Rng rng(8);
  const auto x = randomTensor({2, 1, 4, 4}, rng);
  const auto k = randomKernel(1, 1, 3, rng);
  EXPECT_THROW(geoConvForward(x, k, {}), ValidationError);
  const auto wrong = unitSlice(5, 4, 3);
  const LayerWeights* g[] = {&wrong};
  EXPECT_THROW(geoConvForward(x, k, g), ShapeError);
  const auto ok = unitSlice(4, 4, 3);
  const LayerWeights* three[] = {&ok, &ok, &ok};
  EXPECT_THROW(geoConvForward(x, k, three), ShapeError);
  const LayerWeights* missing[] = {&ok, nullptr};
  EXPECT_THROW(geoConvForward(x, k, missing), ValidationError);
}

TEST(GeoConvBackward, ZeroGradOut) {
  Rng rng(9);
  const auto x = randomTensor({1, 2, 4, 4}, rng);
  const auto k = randomKernel(3, 2, 3, rng);
  const auto s = randomSlice(4, 4, 3, rng);
  const LayerWeights* g[] = {&s};
  const auto grads = geoConvBackward(Tensor4(1, 3, 4, 4), x, k, g);
  for (double v : grads.input.values()) EXPECT_EQ(v, 0.0);
  for (double v : grads.weight.values()) EXPECT_EQ(v, 0.0);
  for (double v : grads.bias) EXPECT_EQ(v, 0.0);
}

TEST(GeoConvBackward, FiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(100 + seed);
    auto x = randomTensor({2, 3, 8, 8}, rng);
    auto k = randomKernel(4, 3, 3, rng);
    const auto s0 = randomSlice(8, 8, 3, rng), s1 = randomSlice(8, 8, 3, rng);
    const LayerWeights* g[] = {&s0, &s1};
    const auto probe = randomTensor({2, 4, 8, 8}, rng);
    auto loss = [&] { return dotProduct(geoConvForward(x, k, g).values(), probe.values()); };
    const auto grads = geoConvBackward(probe, x, k, g);
    const double h = 1e-5;
    double worst = 0;
    auto check = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = loss();
      param = keep - h;
      const double down = loss();
      param = keep;
      worst = std::max(worst, relError((up - down) / (2 * h), analytic));
    };
    for (std::size_t i = 0; i < x.size(); i += 7) check(x.data()[i], grads.input.data()[i]);
    for (std::size_t i = 0; i < k.weight.size(); ++i) check(k.weight.data()[i], grads.weight.data()[i]);
    for (std::size_t i = 0; i < k.bias.size(); ++i) check(k.bias[i], grads.bias[i]);
    EXPECT_LE(worst, 1e-4) << "seed " << seed;
  }
}

TEST(GeoConvBackward, AdjointConsistency) {
  Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = randomTensor({2, 3, 6, 5}, rng);
    auto k = randomKernel(4, 3, 3, rng);
    std::fill(k.bias.begin(), k.bias.end(), 0.0);
    const auto s = randomSlice(6, 5, 3, rng);
    const LayerWeights* g[] = {&s};
    const auto gy = randomTensor({2, 4, 6, 5}, rng);
    const auto dx = randomTensor(x.shape(), rng);
    const auto grads = geoConvBackward(gy, x, k, g);
    // forward is linear in x (bias 0): <gy, F(dx)> = <F^T gy, dx>
    const double lhs = dotProduct(gy.values(), geoConvForward(dx, k, g).values());
    const double rhs = dotProduct(grads.input.values(), dx.values());
    EXPECT_LE(relError(lhs, rhs), 1e-9);
    // and linear in the kernel: <gy, F_dk(x)> = <grad_k, dk>
    ConvKernel dk = k;
    for (auto& v : dk.weight.values()) v = rng.uniform(-1, 1);
    const double lhsK = dotProduct(gy.values(), geoConvForward(x, dk, g).values());
    const double rhsK = dotProduct(grads.weight.values(), dk.weight.values());
    EXPECT_LE(relError(lhsK, rhsK), 1e-9);
  }
}

TEST(GeoConv, Deterministic) {
  Rng rng(11);
  const auto x = randomTensor({2, 3, 9, 9}, rng);
  const auto k = randomKernel(5, 3, 3, rng);
  const auto s = randomSlice(9, 9, 3, rng);
  const LayerWeights* g[] = {&s};
  EXPECT_EQ(geoConvForward(x, k, g), geoConvForward(x, k, g));
}

}  // namespace
