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

#include "geoconv/geoweight.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

#include "geoconv/binary_io.hpp"
#include "geoconv/errors.hpp"
#include "json.hpp"

namespace geoconv {

std::vector<LayerGeometry> layerGeometryChain(std::span<const ArchLayer> arch, int inputHeight,
                                              int inputWidth) {
  if (inputHeight <= 0 || inputWidth <= 0) throw ValidationError("input size must be positive");
  std::vector<LayerGeometry> out;
  int s = 1, h = inputHeight, w = inputWidth;
  double c = 0;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    const auto& l = arch[i];
    switch (l.kind) {
      case ArchLayerKind::kConv:
      case ArchLayerKind::kGeoConv: {
        if (l.stride != 1) throw UnsupportedArchitectureError("layer " + std::to_string(i) + ": strided convolution");
        if (l.kernel < 1 || l.kernel % 2 == 0)
          throw UnsupportedArchitectureError("layer " + std::to_string(i) + ": kernel size must be odd");
        if (l.pad < 0 || l.pad > l.kernel - 1)
          throw UnsupportedArchitectureError("layer " + std::to_string(i) + ": unsupported padding");
        c += ((l.kernel - 1) / 2 - l.pad) * static_cast<double>(s);
        h += 2 * l.pad - l.kernel + 1;
        w += 2 * l.pad - l.kernel + 1;
        if (h <= 0 || w <= 0) throw UnsupportedArchitectureError("layer " + std::to_string(i) + ": empty output");
        out.push_back({static_cast<int>(i), s, c, l.kernel, h, w});
        break;
      }
      case ArchLayerKind::kMaxPool2:
        if (h % 2 || w % 2)
          throw UnsupportedArchitectureError("layer " + std::to_string(i) + ": pooling an odd-sized map");
        c += s / 2.0;
        s *= 2;
        h /= 2;
        w /= 2;
        break;
      case ArchLayerKind::kRelu:
        break;
      default:
        throw UnsupportedArchitectureError("layer " + std::to_string(i) + ": unsupported layer type");
    }
  }
  return out;
}

std::vector<ArchLayer> referenceGeoBranch() {
  std::vector<ArchLayer> a;
  for (int k = 0; k < 5; ++k) {
    a.push_back(ArchLayer::geoConv(3));
    a.push_back(ArchLayer::relu());
    if (k < 4) a.push_back(ArchLayer::pool());
  }
  return a;
}

GeodesicLookup::GeodesicLookup(const TriMesh& mesh, std::span<const std::uint32_t> sources,
                               const WeightOptions& options, const TargetMap* targets)
    : mesh_(&mesh), options_(options) {
  if (sources.empty()) return;
  HeatGeodesicSolver solver(mesh, options.heat);
  auto batch = geodesicBatch(solver, sources, options.threads);
  if (!batch.failures.empty()) {
    const auto& [v, msg] = *batch.failures.begin();
    throw GeometryError("geodesic field for vertex " + std::to_string(v) + " failed: " + msg);
  }
  for (auto& [v, f] : batch.fields) {
    if (options.boundToOracles) {
      const auto it = targets ? targets->find(v) : TargetMap::const_iterator{};
      if (!targets)
        edgePath_.emplace(v, dijkstraGeodesic(mesh, v).distances);
      else if (it != targets->end())
        edgePath_.emplace(v, dijkstraGeodesic(mesh, v, it->second).distances);
      else
        edgePath_.emplace(v, std::vector<double>(mesh.vertexCount(), kUnreachable));
    }
    heat_.emplace(v, std::move(f.distances));
  }
}

double GeodesicLookup::distance(std::uint32_t from, std::uint32_t to) const {
  const auto it = heat_.find(from);
  if (it == heat_.end())
    throw PrecomputeIncompleteError("no geodesic field for source vertex " + std::to_string(from));
  if (from == to) return 0.0;
  double d = it->second.at(to);
  if (!std::isfinite(d)) return d;
  const double chord = length(mesh_->vertex(to) - mesh_->vertex(from));
  if (options_.exactChords && straightChordOnSurface(*mesh_, from, to)) return chord;
  if (options_.boundToOracles) d = std::clamp(d, chord, std::max(chord, edgePath_.at(from)[to]));
  return d;
}

double pixelsPerModelUnit(const Camera& camera, const CorrespondenceMap& corr) {
  if (camera.mode == Projection::kOrthographic) return camera.scale;
  double sum = 0;
  std::size_t n = 0;
  for (const auto& p : corr.pixels)
    if (p.covered()) {
      sum += p.depth;
      ++n;
    }
  if (n == 0 || !(sum > 0)) return camera.scale;
  return camera.scale / (sum / static_cast<double>(n));
}

int centerPixel(double v) { return static_cast<int>(std::floor(v + 0.5)); }

namespace {

std::optional<std::uint32_t> vertexAt(const CorrespondenceMap& corr, const LayerGeometry& g, int r, int c) {
  return surfacePointFor(corr, centerPixel(g.offset + g.stride * static_cast<double>(c)),
                         centerPixel(g.offset + g.stride * static_cast<double>(r)));
}

}  // namespace

RatioField ratioField(const CorrespondenceMap& corr, const GeodesicLookup& lookup, double pixelsPerUnit,
                      const LayerGeometry& g, const WeightOptions& options) {
  const int k = g.kernel, half = k / 2;
  RatioField out{g, std::vector<double>(static_cast<std::size_t>(g.height) * g.width * k * k, 1.0)};
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) {
      double* slice = out.ratios.data() + (static_cast<std::size_t>(r) * g.width + c) * k * k;
      slice[half * k + half] = 0.0;
      const auto v0 = vertexAt(corr, g, r, c);
      if (!v0) continue;
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const int rr = r + dy, cc = c + dx;
          if (rr < 0 || cc < 0 || rr >= g.height || cc >= g.width) continue;  // padded tap
          const auto vi = vertexAt(corr, g, rr, cc);
          if (!vi) continue;
          const double eu = options.hierarchyCompensation ? g.stride * std::hypot(dy, dx) : 1.0;
          const double geo = lookup.distance(*v0, *vi) * pixelsPerUnit;
          const double ratio = std::isfinite(geo) ? geo / eu : options.clampRatio;
          slice[(dy + half) * k + dx + half] = std::clamp(ratio, 0.0, options.clampRatio);
        }
    }
  return out;
}

void geoWeightsFromRatios(std::span<const double> ratios, int kernel, std::span<float> weights) {
  const int n = kernel * kernel, center = n / 2;
  double lo = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    if (i != center) lo = std::min(lo, ratios[i]);
  double sum = 0;
  std::vector<double> e(n, 0.0);
  for (int i = 0; i < n; ++i)
    if (i != center) sum += e[i] = std::exp(lo - ratios[i]);
  for (int i = 0; i < n; ++i)
    weights[i] = i == center ? 1.0f : static_cast<float>((n - 1) * e[i] / sum);
}

GeoWeightStack compileWeights(const CorrespondenceMap& corr, const TriMesh& mesh, const Camera& camera,
                              std::span<const ArchLayer> arch, const WeightOptions& options,
                              const std::string& imageId, CompileStats* stats) {
  using Clock = std::chrono::steady_clock;
  camera.validate();
  if (corr.width != camera.width || corr.height != camera.height)
    throw ValidationError("correspondence map size does not match the camera");
  if (!(options.clampRatio > 0)) throw ValidationError("clamp ratio must be positive");

  std::vector<LayerGeometry> geo;
  for (const auto& g : layerGeometryChain(arch, camera.height, camera.width))
    if (arch[static_cast<std::size_t>(g.layerIndex)].kind == ArchLayerKind::kGeoConv) geo.push_back(g);

  std::set<std::uint32_t> needed;
  GeodesicLookup::TargetMap targets;
  for (const auto& g : geo) {
    const int half = g.kernel / 2;
    for (int r = 0; r < g.height; ++r)
      for (int c = 0; c < g.width; ++c) {
        const auto v0 = vertexAt(corr, g, r, c);
        if (!v0) continue;
        needed.insert(*v0);
        auto& list = targets[*v0];
        for (int dy = -half; dy <= half; ++dy)
          for (int dx = -half; dx <= half; ++dx) {
            const int rr = r + dy, cc = c + dx;
            if (rr < 0 || cc < 0 || rr >= g.height || cc >= g.width) continue;
            if (const auto vi = vertexAt(corr, g, rr, cc)) list.push_back(*vi);
          }
      }
  }
  const std::vector<std::uint32_t> sources(needed.begin(), needed.end());

  const auto t0 = Clock::now();
  const GeodesicLookup lookup(mesh, sources, options, &targets);
  const auto t1 = Clock::now();

  GeoWeightStack stack;
  stack.imageId = imageId;
  stack.clampRatio = options.clampRatio;
  stack.hierarchyCompensation = options.hierarchyCompensation;
  const double ppu = pixelsPerModelUnit(camera, corr);
  for (const auto& g : geo) {
    const auto ratios = ratioField(corr, lookup, ppu, g, options);
    const std::size_t kk = static_cast<std::size_t>(g.kernel) * g.kernel;
    LayerWeights lw{g, std::vector<float>(ratios.ratios.size())};
    for (std::size_t i = 0; i < ratios.ratios.size(); i += kk)
      geoWeightsFromRatios(std::span(ratios.ratios).subspan(i, kk), g.kernel, std::span(lw.g).subspan(i, kk));
    stack.layers.push_back(std::move(lw));
  }
  const auto t2 = Clock::now();
  if (stats) {
    stats->sources = sources.size();
    stats->geodesicSeconds = std::chrono::duration<double>(t1 - t0).count();
    stats->assemblySeconds = std::chrono::duration<double>(t2 - t1).count();
  }
  return stack;
}

std::vector<std::uint8_t> encodeWeightStack(const GeoWeightStack& stack) {
  io::ByteWriter w;
  w.magic("GWS1");
  w.put(static_cast<std::uint32_t>(stack.layers.size()));
  nlohmann::json geometry = nlohmann::json::array();
  for (const auto& l : stack.layers) {
    const auto& g = l.geometry;
    w.put(static_cast<std::uint32_t>(g.height));
    w.put(static_cast<std::uint32_t>(g.width));
    w.put(static_cast<std::uint32_t>(g.kernel));
    w.putAll<float>(l.g);
    geometry.push_back({{"layerIndex", g.layerIndex}, {"stride", g.stride}, {"offset", g.offset}});
  }
  const nlohmann::json meta = {{"imageId", stack.imageId},
                               {"clampRatio", stack.clampRatio},
                               {"hierarchyCompensation", stack.hierarchyCompensation},
                               {"geometry", geometry}};
  w.text(meta.dump());
  return w.take();
}

GeoWeightStack decodeWeightStack(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "weight stack");
  r.expectMagic("GWS1");
  GeoWeightStack stack;
  const auto count = r.get<std::uint32_t>();
  if (count > 1024) throw FormatError("weight stack: implausible layer count");
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerWeights l;
    const auto h = r.get<std::uint32_t>(), w = r.get<std::uint32_t>(), k = r.get<std::uint32_t>();
    if (h == 0 || w == 0 || k == 0 || k % 2 == 0 || h > (1u << 16) || w > (1u << 16) || k > 63)
      throw FormatError("weight stack: bad layer dimensions");
    const std::size_t n = static_cast<std::size_t>(h) * w * k * k;
    r.need(4 * n);
    l.geometry.height = static_cast<int>(h);
    l.geometry.width = static_cast<int>(w);
    l.geometry.kernel = static_cast<int>(k);
    l.g.resize(n);
    r.getAll<float>(l.g);
    stack.layers.push_back(std::move(l));
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.rest());
    stack.imageId = meta.at("imageId").get<std::string>();
    stack.clampRatio = meta.at("clampRatio").get<double>();
    stack.hierarchyCompensation = meta.at("hierarchyCompensation").get<bool>();
    const auto& geometry = meta.at("geometry");
    if (!geometry.is_array() || geometry.size() != count) throw FormatError("weight stack: geometry count mismatch");
    for (std::uint32_t i = 0; i < count; ++i) {
      auto& g = stack.layers[i].geometry;
      g.layerIndex = geometry[i].at("layerIndex").get<int>();
      g.stride = geometry[i].at("stride").get<int>();
      g.offset = geometry[i].at("offset").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("weight stack: bad metadata block: ") + e.what());
  }
  return stack;
}

void saveWeightStack(const GeoWeightStack& stack, const std::filesystem::path& path) {
  io::writeFile(path, encodeWeightStack(stack));
}

GeoWeightStack loadWeightStack(const std::filesystem::path& path) {
  return decodeWeightStack(io::readFile(path));
}

}  // namespace geoconv
