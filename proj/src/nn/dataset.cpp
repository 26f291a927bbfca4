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

#include "geoconv/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "geoconv/binary_io.hpp"
#include "geoconv/errors.hpp"
#include "geoconv/rng.hpp"
#include "geoconv/synthetic_face.hpp"

namespace geoconv {

namespace {

constexpr double kDegrees = M_PI / 180.0;

// Stream tags for Rng::stream.
constexpr std::uint64_t kIdentityStream = 1;
constexpr std::uint64_t kSampleStream = 2;

std::string sampleId(std::size_t s) { return "sample-" + std::to_string(s); }

}  // namespace

void DatasetConfig::validate() const {
  if (samples == 0) throw ValidationError("dataset needs at least one sample");
  if (identities < 3) throw ValidationError("dataset needs at least three identities for the split");
  if (imageSize < 8) throw ValidationError("image size must be at least 8");
  if (nAu == 0 || nAu > kNamedExpressions)
    throw ValidationError("nAu must be in [1, " + std::to_string(kNamedExpressions) + "]");
  if (!(expressionRange > 0)) throw ValidationError("expression range must be positive");
  if (!(threshold > 0) || !(threshold < expressionRange))
    throw ValidationError("AU threshold must be in (0, expressionRange)");
  if (poseJitterDegrees < 0 || poseJitterDegrees > 45) throw ValidationError("pose jitter must be in [0, 45]");
  if (identityScale < 0) throw ValidationError("identity scale must be non-negative");
  if (pixelNoise < 0) throw ValidationError("pixel noise must be non-negative");
}

nlohmann::json DatasetConfig::toJson() const {
  return {{"samples", samples},
          {"identities", identities},
          {"imageSize", imageSize},
          {"nAu", nAu},
          {"expressionRange", expressionRange},
          {"threshold", threshold},
          {"identityScale", identityScale},
          {"poseJitterDegrees", poseJitterDegrees},
          {"pixelNoise", pixelNoise},
          {"seed", seed},
          {"clampRatio", weights.clampRatio},
          {"hierarchyCompensation", weights.hierarchyCompensation},
          {"tScale", weights.heat.tScale},
          {"architecture", architectureToJson(architecture)}};
}

nlohmann::json architectureToJson(std::span<const ArchLayer> arch) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& l : arch) {
    switch (l.kind) {
      case ArchLayerKind::kConv: a.push_back("conv" + std::to_string(l.kernel)); break;
      case ArchLayerKind::kGeoConv: a.push_back("geoconv" + std::to_string(l.kernel)); break;
      case ArchLayerKind::kMaxPool2: a.push_back("maxpool2"); break;
      case ArchLayerKind::kRelu: a.push_back("relu"); break;
    }
  }
  return a;
}

std::vector<ArchLayer> architectureFromJson(const nlohmann::json& j) {
  std::vector<ArchLayer> arch;
  if (!j.is_array()) throw ValidationError("architecture must be a list of layer names");
  for (const auto& e : j) {
    if (!e.is_string()) throw ValidationError("architecture entries must be strings");
    const auto s = e.get<std::string>();
    auto kernelOf = [&](std::size_t prefix) {
      try {
        return std::stoi(s.substr(prefix));
      } catch (const std::exception&) {
        throw ValidationError("bad architecture layer '" + s + "'");
      }
    };
    if (s == "relu") {
      arch.push_back(ArchLayer::relu());
    } else if (s == "maxpool2") {
      arch.push_back(ArchLayer::pool());
    } else if (s.rfind("geoconv", 0) == 0) {
      arch.push_back(ArchLayer::geoConv(kernelOf(7)));
    } else if (s.rfind("conv", 0) == 0) {
      arch.push_back(ArchLayer::conv(kernelOf(4)));
    } else {
      throw ValidationError("unknown architecture layer '" + s + "'");
    }
  }
  return arch;
}

std::vector<std::size_t> SyntheticAuDataset::indices(bool train) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].train == train) out.push_back(i);
  return out;
}

std::vector<std::uint8_t> SyntheticAuDataset::labelTable(std::span<const std::size_t> idx) const {
  std::vector<std::uint8_t> out;
  out.reserve(idx.size() * nAu);
  for (auto i : idx) out.insert(out.end(), samples[i].labels.begin(), samples[i].labels.end());
  return out;
}

Camera sampleCamera(std::size_t imageSize, const std::array<double, 3>& pose) {
  const int s = static_cast<int>(imageSize);
  Camera cam = Camera::orthographicDefault(s, s);
  cam.rotation = axisAngle({0, 0, 1}, pose[2]) * axisAngle({1, 0, 0}, pose[1]) * axisAngle({0, 1, 0}, pose[0]);
  return cam;
}

std::vector<float> renderShaded(const TriMesh& mesh, const Camera& camera, const CorrespondenceMap& corr,
                                const std::array<double, 3>& albedo, double background) {
  std::vector<Vec3> normals(mesh.vertexCount());
  for (std::size_t t = 0; t < mesh.triangleCount(); ++t) {
    const Vec3 n = mesh.triangleNormal(t) * mesh.triangleArea(t);
    for (auto v : mesh.triangle(t)) normals[v] = normals[v] + n;
  }
  // Direction towards the light in camera space: above left, in front.
  const Vec3 light = normalize(Vec3{-0.4, -0.5, -1.0});
  const std::size_t pixels = static_cast<std::size_t>(corr.width) * static_cast<std::size_t>(corr.height);
  std::vector<float> image(3 * pixels);
  for (std::size_t p = 0; p < pixels; ++p) {
    const auto& px = corr.pixels[p];
    if (!px.covered()) {
      for (int c = 0; c < 3; ++c) image[c * pixels + p] = static_cast<float>(background);
      continue;
    }
    const auto& tri = mesh.triangle(static_cast<std::size_t>(px.triangle));
    Vec3 n{};
    for (int k = 0; k < 3; ++k) n = n + normals[tri[k]] * static_cast<double>(px.barycentric[k]);
    n = normalize(camera.rotation * n);
    if (n.z > 0) n = n * -1.0;
    const double shade = 0.3 + 0.7 * std::max(0.0, dot(n, light));
    for (int c = 0; c < 3; ++c)
      image[c * pixels + p] = static_cast<float>(std::clamp(albedo[static_cast<std::size_t>(c)] * shade, 0.0, 1.0));
  }
  return image;
}

SyntheticAuDataset makeSyntheticDataset(const MorphableModel& model, const DatasetConfig& cfg) {
  cfg.validate();
  model.validate();
  if (model.nExp < cfg.nAu) throw ValidationError("model has fewer expression columns than AUs");
  SyntheticAuDataset data;
  data.imageSize = cfg.imageSize;
  data.nAu = cfg.nAu;
  data.thresholds.assign(cfg.nAu, cfg.threshold);
  data.metadata = cfg.toJson();
  const std::size_t pixels = cfg.imageSize * cfg.imageSize;
  const double jitter = cfg.poseJitterDegrees * kDegrees;

  for (std::size_t s = 0; s < cfg.samples; ++s) {
    DatasetSample smp;
    smp.identity = static_cast<std::uint32_t>(s % cfg.identities);
    smp.train = smp.identity % 3 != 2;

    Rng idRng = Rng::stream(cfg.seed, kIdentityStream, smp.identity);
    smp.coeffs = ShapeCoeffs::zeros(model);
    for (auto& w : smp.coeffs.wId) w = idRng.normal(0.0, cfg.identityScale);
    const double tone = idRng.uniform(0.75, 1.1);
    std::array<double, 3> albedo{0.86, 0.66, 0.56};
    for (auto& a : albedo) a *= tone * idRng.uniform(0.95, 1.05);

    Rng rng = Rng::stream(cfg.seed, kSampleStream, s);
    for (std::size_t c = 0; c < model.nExp; ++c)
      smp.coeffs.wExp[c] = c < kNamedExpressions ? rng.uniform(-cfg.expressionRange, cfg.expressionRange)
                                                 : rng.normal(0.0, 0.5);
    for (auto& a : smp.pose) a = rng.uniform(-jitter, jitter);
    const double background = rng.uniform(0.05, 0.35);

    const TriMesh mesh = buildShape(model, smp.coeffs);
    const Camera camera = sampleCamera(cfg.imageSize, smp.pose);
    const CorrespondenceMap corr = rasterize(mesh, camera);
    smp.image = renderShaded(mesh, camera, corr, albedo, background);
    for (std::size_t p = 0; p < 3 * pixels; ++p)
      smp.image[p] = static_cast<float>(std::clamp(smp.image[p] + rng.normal(0.0, cfg.pixelNoise), 0.0, 1.0));
    for (std::size_t i = 0; i < cfg.nAu; ++i)
      smp.labels.push_back(std::abs(smp.coeffs.wExp[i]) > data.thresholds[i] ? 1 : 0);
    smp.stack = compileWeights(corr, mesh, camera, cfg.architecture, cfg.weights, sampleId(s));
    data.samples.push_back(std::move(smp));
  }

  for (bool train : {true, false}) {
    const auto idx = data.indices(train);
    if (idx.empty()) continue;
    const auto table = data.labelTable(idx);
    for (std::size_t i = 0; i < cfg.nAu; ++i) {
      std::size_t pos = 0;
      for (std::size_t k = i; k < table.size(); k += cfg.nAu) pos += table[k];
      if (pos == 0 || pos == idx.size())
        throw DegenerateClassError("AU " + std::to_string(i) + " is constant over the " +
                                   (train ? "training" : "test") + " split");
    }
  }
  return data;
}

void recompileWeightStacks(SyntheticAuDataset& data, const MorphableModel& model, const WeightOptions& options,
                           std::span<const ArchLayer> architecture) {
  for (std::size_t s = 0; s < data.samples.size(); ++s) {
    auto& smp = data.samples[s];
    const TriMesh mesh = buildShape(model, smp.coeffs);
    const Camera camera = sampleCamera(data.imageSize, smp.pose);
    const CorrespondenceMap corr = rasterize(mesh, camera);
    smp.stack = compileWeights(corr, mesh, camera, architecture, options, smp.stack.imageId);
  }
  data.metadata["clampRatio"] = options.clampRatio;
  data.metadata["hierarchyCompensation"] = options.hierarchyCompensation;
  data.metadata["tScale"] = options.heat.tScale;
  data.metadata["architecture"] = architectureToJson(architecture);
}

std::vector<std::uint8_t> encodeDataset(const SyntheticAuDataset& data) {
  io::ByteWriter w;
  w.magic("GDS1");
  nlohmann::json meta = {{"imageSize", data.imageSize},
                         {"nAu", data.nAu},
                         {"thresholds", data.thresholds},
                         {"samples", data.samples.size()},
                         {"generator", data.metadata}};
  const std::string text = meta.dump();
  w.put(static_cast<std::uint32_t>(text.size()));
  w.text(text);
  const std::size_t imageValues = 3 * data.imageSize * data.imageSize;
  for (const auto& s : data.samples) {
    if (s.image.size() != imageValues || s.labels.size() != data.nAu)
      throw ShapeError("dataset sample does not match the dataset dimensions");
    w.put(s.identity);
    w.put(static_cast<std::uint8_t>(s.train));
    w.put(static_cast<std::uint32_t>(s.coeffs.wId.size()));
    w.putAll<double>(s.coeffs.wId);
    w.put(static_cast<std::uint32_t>(s.coeffs.wExp.size()));
    w.putAll<double>(s.coeffs.wExp);
    for (double a : s.pose) w.put(a);
    w.putAll<float>(s.image);
    w.putAll<std::uint8_t>(s.labels);
    const auto stack = encodeWeightStack(s.stack);
    w.put(static_cast<std::uint64_t>(stack.size()));
    w.raw(stack);
  }
  return w.take();
}

SyntheticAuDataset decodeDataset(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "dataset");
  r.expectMagic("GDS1");
  SyntheticAuDataset data;
  std::size_t count = 0;
  try {
    const auto len = r.get<std::uint32_t>();
    const auto text = r.take(len);
    const auto meta = nlohmann::json::parse(text.begin(), text.end());
    data.imageSize = meta.at("imageSize").get<std::size_t>();
    data.nAu = meta.at("nAu").get<std::size_t>();
    data.thresholds = meta.at("thresholds").get<std::vector<double>>();
    data.metadata = meta.at("generator");
    count = meta.at("samples").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset: bad metadata: ") + e.what());
  }
  if (data.imageSize == 0 || data.imageSize > 4096 || data.nAu == 0 || data.thresholds.size() != data.nAu)
    throw FormatError("dataset: bad dimensions");
  const std::size_t imageValues = 3 * data.imageSize * data.imageSize;
  for (std::size_t i = 0; i < count; ++i) {
    DatasetSample s;
    s.identity = r.get<std::uint32_t>();
    s.train = r.get<std::uint8_t>() != 0;
    s.coeffs.wId.resize(r.get<std::uint32_t>());
    r.getAll<double>(s.coeffs.wId);
    s.coeffs.wExp.resize(r.get<std::uint32_t>());
    r.getAll<double>(s.coeffs.wExp);
    for (double& a : s.pose) a = r.get<double>();
    r.need(4 * imageValues);
    s.image.resize(imageValues);
    r.getAll<float>(s.image);
    s.labels.resize(data.nAu);
    r.getAll<std::uint8_t>(s.labels);
    const auto len = r.get<std::uint64_t>();
    if (len > r.remaining()) throw FormatError("dataset: truncated payload");
    s.stack = decodeWeightStack(r.take(static_cast<std::size_t>(len)));
    data.samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) throw FormatError("dataset: trailing bytes");
  return data;
}

void saveDataset(const SyntheticAuDataset& data, const std::filesystem::path& path) {
  io::writeFile(path, encodeDataset(data));
}

SyntheticAuDataset loadDataset(const std::filesystem::path& path) { return decodeDataset(io::readFile(path)); }

}  // namespace geoconv
