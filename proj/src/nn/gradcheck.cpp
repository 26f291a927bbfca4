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

#include "geoconv/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "geoconv/conv.hpp"
#include "geoconv/network.hpp"
#include "geoconv/rng.hpp"
#include "geoconv/train.hpp"

namespace geoconv {

namespace {

LayerWeights randomSlice(int h, int w, Rng& rng) {
  LayerWeights l;
  l.geometry.height = h;
  l.geometry.width = w;
  l.geometry.kernel = 3;
  l.g.resize(static_cast<std::size_t>(h * w * 9));
  for (auto& g : l.g) g = static_cast<float>(rng.uniform(0.3, 1.7));
  return l;
}

void fillNormal(Tensor4& t, Rng& rng) {
  for (auto& v : t.values()) v = rng.normal();
}

}  // namespace

double relativeError(double a, double b, double floor) {
  return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

GradCheckResult geoConvGradCheck(std::uint64_t seed) {
  Rng rng(seed);
  Tensor4 x(2, 3, 8, 8);
  fillNormal(x, rng);
  ConvKernel k(4, 3, 3);
  fillNormal(k.weight, rng);
  for (auto& b : k.bias) b = rng.normal();
  const auto s0 = randomSlice(8, 8, rng), s1 = randomSlice(8, 8, rng);
  const LayerWeights* g[] = {&s0, &s1};
  Tensor4 probe(2, 4, 8, 8);
  fillNormal(probe, rng);
  auto loss = [&] {
    const auto y = geoConvForward(x, k, g);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * probe.values()[i];
    return s;
  };
  const auto grads = geoConvBackward(probe, x, k, g);
  const double h = 1e-5;
  GradCheckResult r;
  auto check = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = loss();
    param = keep - h;
    const double down = loss();
    param = keep;
    r.maxRelativeError = std::max(r.maxRelativeError, relativeError((up - down) / (2 * h), analytic, 1e-8));
    ++r.checked;
  };
  for (std::size_t i = 0; i < x.size(); i += 7) check(x.data()[i], grads.input.data()[i]);
  for (std::size_t i = 0; i < k.weight.size(); ++i) check(k.weight.data()[i], grads.weight.data()[i]);
  for (std::size_t i = 0; i < k.bias.size(); ++i) check(k.bias[i], grads.bias[i]);
  return r;
}

GradCheckResult networkGradCheck(std::uint64_t seed) {
  NetSpec spec;
  spec.inputChannels = 2;
  spec.inputSize = 8;
  spec.nAu = 2;
  spec.geoBranch = {LayerSpec::geoConv(3), LayerSpec::relu(), LayerSpec::pool()};
  spec.backbone = {LayerSpec::conv(2), LayerSpec::relu(), LayerSpec::pool()};
  spec.head = {LayerSpec::concat(), LayerSpec::flatten(), LayerSpec::fullyConnected(4), LayerSpec::relu(),
               LayerSpec::fullyConnected(2), LayerSpec::sigmoid()};
  spec.geoMask = {true};
  Network net(spec, seed);
  Rng rng(seed * 31 + 7);
  Tensor4 x(3, 2, 8, 8);
  fillNormal(x, rng);
  std::vector<GeoWeightStack> stacks(3);
  std::vector<const GeoWeightStack*> ptrs;
  for (auto& s : stacks) {
    s.layers.push_back(randomSlice(8, 8, rng));
    ptrs.push_back(&s);
  }
  Tensor4 y(3, 2, 1, 1);
  for (auto& v : y.values()) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  AuLossConfig cfg;
  cfg.nAu = 2;
  cfg.classWeights = {0.4, 0.6};
  cfg.positiveWeights = {1.5, 0.7};
  auto lossAt = [&] { return auLoss(net.forward(x, ptrs), y, cfg); };
  net.zeroGrad();
  const auto out = net.forward(x, ptrs);
  net.backward(auLossGradient(out, y, cfg));
  GradCheckResult r;
  const double h = 1e-6;
  for (auto& p : net.parameters()) {
    auto& v = *p.value;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + h;
      const double up = lossAt();
      v[i] = keep - h;
      const double down = lossAt();
      v[i] = keep;
      r.maxRelativeError = std::max(r.maxRelativeError, relativeError((up - down) / (2 * h), (*p.grad)[i], 1e-6));
      ++r.checked;
    }
  }
  return r;
}

}  // namespace geoconv
