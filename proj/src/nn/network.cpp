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

#include "geoconv/network.hpp"

#include <algorithm>
#include <cmath>

#include "geoconv/binary_io.hpp"
#include "geoconv/errors.hpp"
#include "geoconv/rng.hpp"

namespace geoconv {

namespace {

constexpr std::pair<LayerKind, const char*> kKindNames[] = {
    {LayerKind::kConv, "conv"},
    {LayerKind::kGeoConv, "geoconv"},
    {LayerKind::kRelu, "relu"},
    {LayerKind::kMaxPool2, "maxpool2"},
    {LayerKind::kFlatten, "flatten"},
    {LayerKind::kFullyConnected, "fullyConnected"},
    {LayerKind::kSigmoid, "sigmoid"},
    {LayerKind::kConcatBranches, "concatBranches"},
};

const char* kindName(LayerKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "?";
}

LayerKind kindFromName(const std::string& s) {
  for (const auto& [kind, name] : kKindNames)
    if (s == name) return kind;
  throw ValidationError("unknown layer kind '" + s + "'");
}

bool branchLayer(LayerKind k) {
  return k == LayerKind::kConv || k == LayerKind::kGeoConv || k == LayerKind::kRelu || k == LayerKind::kMaxPool2;
}

// Shape of one sample (C, H, W) after `layers`.
using SampleShape = std::array<std::size_t, 3>;

SampleShape traceLayer(const LayerSpec& l, SampleShape s, const std::string& where) {
  switch (l.kind) {
    case LayerKind::kConv:
    case LayerKind::kGeoConv:
      if (l.outputs == 0) throw ValidationError(where + ": convolution with zero channels");
      if (l.kernel < 1 || l.kernel % 2 == 0) throw ShapeError(where + ": convolution kernel must be odd");
      return {l.outputs, s[1], s[2]};
    case LayerKind::kMaxPool2:
      if (s[1] % 2 || s[2] % 2)
        throw ShapeError(where + ": pooling needs even spatial dims, got " + std::to_string(s[1]) + "x" +
                         std::to_string(s[2]));
      return {s[0], s[1] / 2, s[2] / 2};
    case LayerKind::kFlatten:
      return {s[0] * s[1] * s[2], 1, 1};
    case LayerKind::kFullyConnected:
      if (l.outputs == 0) throw ValidationError(where + ": fully-connected layer with zero features");
      if (s[1] != 1 || s[2] != 1) throw ShapeError(where + ": fully-connected layer needs a flattened input");
      return {l.outputs, 1, 1};
    case LayerKind::kRelu:
    case LayerKind::kSigmoid:
    case LayerKind::kConcatBranches:
      return s;
  }
  return s;
}

void sigmoidInPlace(std::vector<double>& v) {
  for (auto& x : v) x = 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

NetSpec NetSpec::toy(std::size_t nAu, std::vector<bool> mask, std::size_t inputSize, std::size_t hidden) {
  NetSpec s;
  s.inputSize = inputSize;
  s.nAu = nAu;
  const std::size_t geoWidths[] = {8, 16, 16, 32, 32};
  for (int i = 0; i < 5; ++i) {
    s.geoBranch.push_back(LayerSpec::geoConv(geoWidths[i]));
    s.geoBranch.push_back(LayerSpec::relu());
    if (i < 4) s.geoBranch.push_back(LayerSpec::pool());
  }
  const std::size_t backboneWidths[] = {4, 8, 16, 16};
  for (std::size_t w : backboneWidths) {
    for (int k = 0; k < 2; ++k) {
      s.backbone.push_back(LayerSpec::conv(w));
      s.backbone.push_back(LayerSpec::relu());
    }
    s.backbone.push_back(LayerSpec::pool());
  }
  s.head = {LayerSpec::concat(), LayerSpec::flatten(), LayerSpec::fullyConnected(hidden), LayerSpec::relu(),
            LayerSpec::fullyConnected(nAu), LayerSpec::sigmoid()};
  s.geoMask = std::move(mask);
  return s;
}

std::vector<bool> NetSpec::parseMask(const std::string& text) {
  std::string bits = text;
  if (bits.rfind("G_(", 0) == 0 && bits.size() > 4 && bits.back() == ')') bits = bits.substr(3, bits.size() - 4);
  if (bits.empty()) throw ValidationError("empty GeoConv mask");
  std::vector<bool> mask;
  for (char c : bits) {
    if (c != '0' && c != '1') throw ValidationError("GeoConv mask '" + text + "' must contain only 0 and 1");
    mask.push_back(c == '1');
  }
  return mask;
}

std::string NetSpec::maskName() const {
  std::string s = "G_(";
  for (bool b : geoMask) s += b ? '1' : '0';
  return s + ")";
}

std::size_t NetSpec::geoConvCount() const {
  return static_cast<std::size_t>(std::count_if(geoBranch.begin(), geoBranch.end(),
                                                [](const LayerSpec& l) { return l.isConv(); }));
}

bool NetSpec::usesGeoWeights() const { return std::find(geoMask.begin(), geoMask.end(), true) != geoMask.end(); }

std::vector<ArchLayer> NetSpec::geoArchitecture() const {
  std::vector<ArchLayer> arch;
  for (const auto& l : geoBranch) {
    switch (l.kind) {
      case LayerKind::kConv:
      case LayerKind::kGeoConv: arch.push_back(ArchLayer::geoConv(l.kernel)); break;
      case LayerKind::kRelu: arch.push_back(ArchLayer::relu()); break;
      case LayerKind::kMaxPool2: arch.push_back(ArchLayer::pool()); break;
      default: throw ValidationError(std::string("layer '") + kindName(l.kind) + "' not allowed in a branch");
    }
  }
  return arch;
}

void NetSpec::validate() const {
  if (inputChannels == 0 || inputSize == 0) throw ValidationError("network input must be non-empty");
  if (nAu == 0) throw ValidationError("network needs at least one AU output");
  if (geoBranch.empty() || backbone.empty()) throw ValidationError("both branches must be non-empty");
  if (geoMask.size() != geoConvCount())
    throw ValidationError("GeoConv mask has " + std::to_string(geoMask.size()) + " entries for " +
                          std::to_string(geoConvCount()) + " geo-branch convolutions");
  for (const auto& l : geoBranch)
    if (!branchLayer(l.kind))
      throw ValidationError(std::string("layer '") + kindName(l.kind) + "' not allowed in the geo branch");
  for (const auto& l : backbone) {
    if (l.kind == LayerKind::kGeoConv) throw ValidationError("geoconv layers are only allowed in the geo branch");
    if (!branchLayer(l.kind))
      throw ValidationError(std::string("layer '") + kindName(l.kind) + "' not allowed in the backbone");
  }
  if (head.empty() || head.front().kind != LayerKind::kConcatBranches)
    throw ValidationError("head must start with concatBranches");
  for (std::size_t i = 1; i < head.size(); ++i) {
    if (head[i].kind == LayerKind::kGeoConv) throw ValidationError("geoconv layers are only allowed in the geo branch");
    if (head[i].kind == LayerKind::kConcatBranches) throw ValidationError("concatBranches may appear only once");
  }
  if (head.size() < 3 || head.back().kind != LayerKind::kSigmoid ||
      head[head.size() - 2].kind != LayerKind::kFullyConnected || head[head.size() - 2].outputs != nAu)
    throw ValidationError("head must end with fullyConnected(nAu) and sigmoid");

  SampleShape g{inputChannels, inputSize, inputSize}, b = g;
  for (const auto& l : geoBranch) g = traceLayer(l, g, "geo branch");
  for (const auto& l : backbone) b = traceLayer(l, b, "backbone");
  if (g[1] != b[1] || g[2] != b[2])
    throw ShapeError("branch outputs differ at fusion: " + std::to_string(g[1]) + "x" + std::to_string(g[2]) +
                     " vs " + std::to_string(b[1]) + "x" + std::to_string(b[2]));
  SampleShape h{g[0] + b[0], g[1], g[2]};
  for (const auto& l : head) h = traceLayer(l, h, "head");
}

nlohmann::json NetSpec::toJson() const {
  auto layers = [](const std::vector<LayerSpec>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& l : v) {
      nlohmann::json e = {{"kind", kindName(l.kind)}};
      if (l.isConv()) {
        e["outputs"] = l.outputs;
        e["kernel"] = l.kernel;
      } else if (l.kind == LayerKind::kFullyConnected) {
        e["outputs"] = l.outputs;
      }
      a.push_back(e);
    }
    return a;
  };
  std::string mask;
  for (bool bit : geoMask) mask += bit ? '1' : '0';
  return {{"inputChannels", inputChannels}, {"inputSize", inputSize}, {"nAu", nAu},
          {"geoBranch", layers(geoBranch)}, {"backbone", layers(backbone)}, {"head", layers(head)},
          {"geoMask", mask}};
}

NetSpec NetSpec::fromJson(const nlohmann::json& j) {
  auto layers = [](const nlohmann::json& a) {
    std::vector<LayerSpec> v;
    for (const auto& e : a) {
      for (const auto& [key, _] : e.items())
        if (key != "kind" && key != "outputs" && key != "kernel")
          throw ValidationError("unknown layer key '" + key + "'");
      LayerSpec l;
      l.kind = kindFromName(e.at("kind").get<std::string>());
      l.outputs = e.value("outputs", std::size_t{0});
      l.kernel = e.value("kernel", l.isConv() ? 3 : 0);
      v.push_back(l);
    }
    return v;
  };
  try {
    for (const auto& [key, _] : j.items())
      if (key != "inputChannels" && key != "inputSize" && key != "nAu" && key != "geoBranch" &&
          key != "backbone" && key != "head" && key != "geoMask")
        throw ValidationError("unknown network key '" + key + "'");
    NetSpec s;
    s.inputChannels = j.at("inputChannels").get<std::size_t>();
    s.inputSize = j.at("inputSize").get<std::size_t>();
    s.nAu = j.at("nAu").get<std::size_t>();
    s.geoBranch = layers(j.at("geoBranch"));
    s.backbone = layers(j.at("backbone"));
    s.head = layers(j.at("head"));
    const auto mask = j.at("geoMask").get<std::string>();
    if (!mask.empty()) s.geoMask = parseMask(mask);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad network spec: ") + e.what());
  }
}

Network::Network(NetSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  std::uint64_t counter = 0;
  Tensor4::Shape g{1, spec_.inputChannels, spec_.inputSize, spec_.inputSize}, b = g;
  build(geo_, spec_.geoBranch, g, true, seed, counter);
  build(backbone_, spec_.backbone, b, false, seed, counter);
  geoChannels_ = g[1];
  Tensor4::Shape h{1, g[1] + b[1], g[2], g[3]};
  build(head_, spec_.head, h, false, seed, counter);
  slices_.resize(spec_.geoConvCount());
}

void Network::build(std::vector<Node>& nodes, const std::vector<LayerSpec>& layers, Tensor4::Shape& shape,
                    bool geoBranch, std::uint64_t seed, std::uint64_t& counter) {
  int slot = 0;
  for (const auto& l : layers) {
    Node n;
    n.spec = l;
    if (l.isConv() || l.kind == LayerKind::kFullyConnected) {
      const std::size_t inC = shape[1];
      const std::size_t k = l.isConv() ? static_cast<std::size_t>(l.kernel) : 1;
      n.kernel = ConvKernel(l.outputs, inC, k);
      n.grad = ConvKernel(l.outputs, inC, k);
      // One stream per parameterized layer keeps initialization independent
      // of unrelated layers.
      Rng rng = Rng::stream(seed, counter++);
      const double sd = std::sqrt(2.0 / static_cast<double>(inC * k * k));
      for (auto& w : n.kernel.weight.values()) w = sd * rng.normal();
      if (l.isConv() && geoBranch) {
        n.geoSlot = slot++;
        n.geo = spec_.geoMask[static_cast<std::size_t>(n.geoSlot)];
      }
    }
    SampleShape s = traceLayer(l, {shape[1], shape[2], shape[3]}, "network");
    shape = {1, s[0], s[1], s[2]};
    nodes.push_back(std::move(n));
  }
}

Tensor4 Network::runForward(std::vector<Node>& nodes, Tensor4 x) {
  for (auto& n : nodes) {
    n.input = x;
    switch (n.spec.kind) {
      case LayerKind::kConv:
      case LayerKind::kGeoConv:
        if (n.geo) {
          const auto& s = slices_[static_cast<std::size_t>(n.geoSlot)];
          x = geoConvForward(x, n.kernel, GeoSlices(s.data(), s.size()));
        } else {
          x = conv2dForward(x, n.kernel);
        }
        break;
      case LayerKind::kRelu:
        for (auto& v : x.values()) v = v > 0 ? v : 0;
        break;
      case LayerKind::kMaxPool2: {
        const std::size_t N = x.batch(), C = x.channels(), H = x.height() / 2, W = x.width() / 2;
        Tensor4 y(N, C, H, W);
        n.argmax.assign(y.size(), 0);
        std::size_t o = 0;
        for (std::size_t b = 0; b < N; ++b)
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t r = 0; r < H; ++r)
              for (std::size_t q = 0; q < W; ++q, ++o) {
                std::size_t best = x.offset(b, c, 2 * r, 2 * q);
                for (std::size_t dy = 0; dy < 2; ++dy)
                  for (std::size_t dx = 0; dx < 2; ++dx) {
                    std::size_t i = x.offset(b, c, 2 * r + dy, 2 * q + dx);
                    if (x.values()[i] > x.values()[best]) best = i;
                  }
                y.values()[o] = x.values()[best];
                n.argmax[o] = static_cast<std::uint32_t>(best);
              }
        x = std::move(y);
        break;
      }
      case LayerKind::kFlatten:
        x = x.reshaped({x.batch(), x.sampleSize(), 1, 1});
        break;
      case LayerKind::kFullyConnected: {
        const std::size_t N = x.batch(), in = x.channels(), out = n.spec.outputs;
        Tensor4 y(N, out, 1, 1);
        const double* w = n.kernel.weight.data();
        for (std::size_t b = 0; b < N; ++b) {
          const double* xi = x.sample(b);
          for (std::size_t o = 0; o < out; ++o) {
            double acc = n.kernel.bias[o];
            const double* wr = w + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xi[i];
            y(b, o, 0, 0) = acc;
          }
        }
        x = std::move(y);
        break;
      }
      case LayerKind::kSigmoid:
        sigmoidInPlace(x.values());
        break;
      case LayerKind::kConcatBranches:
        break;
    }
    n.output = x;
  }
  return x;
}

Tensor4 Network::forward(const Tensor4& images, std::span<const GeoWeightStack* const> stacks) {
  if (images.channels() != spec_.inputChannels || images.height() != spec_.inputSize ||
      images.width() != spec_.inputSize)
    throw ShapeError("network expects N x " + std::to_string(spec_.inputChannels) + " x " +
                     std::to_string(spec_.inputSize) + " x " + std::to_string(spec_.inputSize) + " input, got " +
                     Tensor4::describe(images.shape()));
  const std::size_t N = images.batch();
  for (std::size_t slot = 0; slot < slices_.size(); ++slot) {
    slices_[slot].clear();
    if (!spec_.geoMask[slot]) continue;
    if (stacks.size() != 1 && stacks.size() != N)
      throw ValidationError("GeoConv layers need one weight stack per sample or one shared stack, got " +
                            std::to_string(stacks.size()) + " for " + std::to_string(N) + " samples");
    for (const auto* s : stacks) {
      if (!s) throw ValidationError("missing weight stack");
      if (s->layers.size() != slices_.size())
        throw ShapeError("weight stack has " + std::to_string(s->layers.size()) + " layers, geo branch has " +
                         std::to_string(slices_.size()) + " convolutions");
      slices_[slot].push_back(&s->layers[slot]);
    }
  }
  Tensor4 g = runForward(geo_, images);
  Tensor4 b = runForward(backbone_, images);
  Tensor4 cat(N, g.channels() + b.channels(), g.height(), g.width());
  for (std::size_t n = 0; n < N; ++n) {
    std::copy(g.sample(n), g.sample(n) + g.sampleSize(), cat.sample(n));
    std::copy(b.sample(n), b.sample(n) + b.sampleSize(), cat.sample(n) + g.sampleSize());
  }
  return runForward(head_, std::move(cat));
}

Tensor4 Network::runBackward(std::vector<Node>& nodes, Tensor4 g) {
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    Node& n = *it;
    switch (n.spec.kind) {
      case LayerKind::kConv:
      case LayerKind::kGeoConv: {
        ConvGradients cg;
        if (n.geo) {
          const auto& s = slices_[static_cast<std::size_t>(n.geoSlot)];
          cg = geoConvBackward(g, n.input, n.kernel, GeoSlices(s.data(), s.size()));
        } else {
          cg = conv2dBackward(g, n.input, n.kernel);
        }
        auto& gw = n.grad.weight.values();
        for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += cg.weight.values()[i];
        for (std::size_t i = 0; i < n.grad.bias.size(); ++i) n.grad.bias[i] += cg.bias[i];
        g = std::move(cg.input);
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t i = 0; i < g.size(); ++i)
          if (!(n.input.values()[i] > 0)) g.values()[i] = 0;
        break;
      case LayerKind::kMaxPool2: {
        Tensor4 gi(n.input.shape());
        for (std::size_t o = 0; o < g.size(); ++o) gi.values()[n.argmax[o]] += g.values()[o];
        g = std::move(gi);
        break;
      }
      case LayerKind::kFlatten:
        g = g.reshaped(n.input.shape());
        break;
      case LayerKind::kFullyConnected: {
        const std::size_t N = g.batch(), in = n.input.channels(), out = n.spec.outputs;
        Tensor4 gi(N, in, 1, 1);
        const double* w = n.kernel.weight.data();
        double* gw = n.grad.weight.data();
        for (std::size_t b = 0; b < N; ++b) {
          const double* xi = n.input.sample(b);
          double* gx = gi.sample(b);
          for (std::size_t o = 0; o < out; ++o) {
            const double go = g(b, o, 0, 0);
            n.grad.bias[o] += go;
            double* gwr = gw + o * in;
            const double* wr = w + o * in;
            for (std::size_t i = 0; i < in; ++i) {
              gwr[i] += go * xi[i];
              gx[i] += go * wr[i];
            }
          }
        }
        g = std::move(gi);
        break;
      }
      case LayerKind::kSigmoid:
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.output.values()[i];
          g.values()[i] *= y * (1.0 - y);
        }
        break;
      case LayerKind::kConcatBranches:
        break;
    }
  }
  return g;
}

void Network::backward(const Tensor4& gradOutput) {
  if (head_.back().output.empty()) throw ValidationError("backward called before forward");
  if (gradOutput.shape() != head_.back().output.shape())
    throw ShapeError("output gradient shape " + Tensor4::describe(gradOutput.shape()) + " does not match " +
                     Tensor4::describe(head_.back().output.shape()));
  Tensor4 g = runBackward(head_, gradOutput);
  const std::size_t N = g.batch(), H = g.height(), W = g.width();
  const std::size_t cg = geoChannels_, cb = g.channels() - geoChannels_;
  Tensor4 gg(N, cg, H, W), gb(N, cb, H, W);
  for (std::size_t n = 0; n < N; ++n) {
    std::copy(g.sample(n), g.sample(n) + gg.sampleSize(), gg.sample(n));
    std::copy(g.sample(n) + gg.sampleSize(), g.sample(n) + g.sampleSize(), gb.sample(n));
  }
  runBackward(geo_, std::move(gg));
  runBackward(backbone_, std::move(gb));
}

void Network::zeroGrad() {
  for (auto* nodes : {&geo_, &backbone_, &head_})
    for (auto& n : *nodes) {
      if (n.grad.weight.empty()) continue;
      n.grad.weight.fill(0.0);
      std::fill(n.grad.bias.begin(), n.grad.bias.end(), 0.0);
    }
}

std::vector<ParameterRef> Network::parameters() {
  std::vector<ParameterRef> out;
  auto add = [&](std::vector<Node>& nodes, const std::string& prefix, bool backbone) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      Node& n = nodes[i];
      if (n.kernel.weight.empty()) continue;
      const auto& s = n.kernel.weight.shape();
      const std::string base = prefix + "." + std::to_string(i);
      out.push_back({base + ".weight", &n.kernel.weight.values(), &n.grad.weight.values(),
                     {s[0], s[1], s[2], s[3]}, backbone});
      out.push_back({base + ".bias", &n.kernel.bias, &n.grad.bias, {s[0]}, backbone});
    }
  };
  add(geo_, "geo", false);
  add(backbone_, "backbone", true);
  add(head_, "head", false);
  return out;
}

std::size_t Network::parameterCount() const {
  std::size_t c = 0;
  for (const auto* nodes : {&geo_, &backbone_, &head_})
    for (const auto& n : *nodes) c += n.kernel.weight.size() + n.kernel.bias.size();
  return c;
}

std::vector<Tensor4::Shape> Network::geoFeatureShapes() const {
  std::vector<Tensor4::Shape> out;
  for (const auto& n : geo_)
    if (n.spec.isConv() && !n.output.empty()) out.push_back(n.output.shape());
  return out;
}

std::vector<std::uint8_t> encodeCheckpoint(Network& net) {
  io::ByteWriter w;
  w.magic("GCK1");
  const std::string spec = nlohmann::json{{"spec", net.spec().toJson()}}.dump();
  w.put(static_cast<std::uint32_t>(spec.size()));
  w.text(spec);
  auto params = net.parameters();
  w.put(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.put(static_cast<std::uint32_t>(p.shape.size()));
    for (auto d : p.shape) w.put(static_cast<std::uint32_t>(d));
    w.putAll(std::span<const double>(*p.value));
  }
  return w.take();
}

Network decodeCheckpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  r.expectMagic("GCK1");
  const auto len = r.get<std::uint32_t>();
  auto text = r.take(len);
  NetSpec spec;
  try {
    auto j = nlohmann::json::parse(text.begin(), text.end());
    spec = NetSpec::fromJson(j.at("spec"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad spec JSON: ") + e.what());
  }
  Network net(std::move(spec), 0);
  auto params = net.parameters();
  if (r.get<std::uint32_t>() != params.size()) throw FormatError("checkpoint: parameter count mismatch");
  for (auto& p : params) {
    const auto rank = r.get<std::uint32_t>();
    if (rank != p.shape.size()) throw FormatError("checkpoint: rank mismatch for " + p.name);
    for (auto d : p.shape)
      if (r.get<std::uint32_t>() != d) throw FormatError("checkpoint: shape mismatch for " + p.name);
    r.getAll(std::span<double>(*p.value));
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return net;
}

void saveCheckpoint(Network& net, const std::filesystem::path& path) { io::writeFile(path, encodeCheckpoint(net)); }

Network loadCheckpoint(const std::filesystem::path& path) { return decodeCheckpoint(io::readFile(path)); }

}  // namespace geoconv
