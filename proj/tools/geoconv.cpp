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


// geoconv: command-line driver for the preprocessing, training and ablation
// pipeline. Every command reads one JSON config plus overriding flags and
// writes resolved-config.json next to its outputs.

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "geoconv/ablation.hpp"
#include "geoconv/binary_io.hpp"
#include "geoconv/conv.hpp"
#include "geoconv/dataset.hpp"
#include "geoconv/errors.hpp"
#include "geoconv/geodesy.hpp"
#include "geoconv/geoweight.hpp"
#include "geoconv/gradcheck.hpp"
#include "geoconv/morphable_model.hpp"
#include "geoconv/network.hpp"
#include "geoconv/obj_io.hpp"
#include "geoconv/projection.hpp"
#include "geoconv/rng.hpp"
#include "geoconv/synthetic_face.hpp"
#include "geoconv/train.hpp"
#include "geoconv/trainer.hpp"

namespace {

using namespace geoconv;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

json defaultConfig() {
  return {
      {"seed", 1},
      {"threads", 1},
      {"outputDir", "geoconv-out"},
      {"model", {{"path", ""}, {"resolution", 32}, {"seed", 0}}},
      {"coefficients", {{"path", ""}, {"wId", json::array()}, {"wExp", json::array()}}},
      {"mesh", {{"source", "model"}}},
      {"camera",
       {{"projection", "orthographic"},
        {"width", 64},
        {"height", 64},
        {"scale", 0.0},
        {"focal", 0.0},
        {"distance", 3.0},
        {"yawDegrees", 0.0},
        {"pitchDegrees", 0.0},
        {"rollDegrees", 0.0}}},
      {"architecture", architectureToJson(referenceGeoBranch())},
      {"heat", {{"tScale", 1.0}, {"solver", "cholesky"}}},
      {"geodesic", {{"sources", json::array({0})}, {"oracle", false}}},
      {"weights",
       {{"clampRatio", 8.0}, {"hierarchyCompensation", true}, {"exactChords", true}, {"boundToOracles", true}}},
      {"gradcheck", {{"seeds", json::array({1, 2, 3, 4, 5})}, {"tolerance", 1e-4}}},
      {"network", {{"geoMask", "G_(11111)"}, {"hidden", 64}}},
      {"dataset",
       {{"path", ""},
        {"samples", 750},
        {"identities", 30},
        {"imageSize", 64},
        {"nAu", 2},
        {"expressionRange", 2.0},
        {"threshold", 1.0},
        {"identityScale", 0.7},
        {"poseJitterDegrees", 6.0},
        {"pixelNoise", 0.02},
        {"seed", 7}}},
      {"training",
       {{"epochs", 10},
        {"batchSize", 16},
        {"lrBackbone", 0.01},
        {"lrRest", 0.01},
        {"momentum", 0.9},
        {"weightDecay", 0.0005},
        {"nesterov", true},
        {"horizon", 0},
        {"balanced", true},
        {"colorJitter", true},
        {"pcaNoise", true}}},
      {"checkpoint", {{"path", ""}}},
      {"ablate", {{"variants", {"G_(11111)", "G_(00000)", "w/o HC", "w/o BW"}}, {"seeds", json::array({1})}}},
  };
}

// Replaces a leaf of `base` with `value`, keeping the leaf's JSON type.
void assignLeaf(json& dst, const json& value, const std::string& key) {
  auto bad = [&](const char* want) {
    throw ValidationError("config key '" + key + "' expects " + want + ", got " + value.dump());
  };
  if (dst.is_boolean()) {
    if (!value.is_boolean()) bad("a boolean");
    dst = value;
  } else if (dst.is_number_float()) {
    if (!value.is_number()) bad("a number");
    dst = value.get<double>();
  } else if (dst.is_number_integer()) {
    if (!value.is_number_integer()) bad("an integer");
    if (value.get<std::int64_t>() < 0) bad("a non-negative integer");
    dst = value;
  } else if (dst.is_string()) {
    if (!value.is_string()) bad("a string");
    dst = value;
  } else if (dst.is_array()) {
    if (!value.is_array()) bad("an array");
    dst = value;
  } else {
    bad("a value of the default's type");
  }
}

void mergeStrict(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ValidationError("config section '" + prefix + "' must be an object");
  for (const auto& [k, v] : patch.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (!base.contains(k)) throw ValidationError("unknown config key '" + key + "'");
    auto& dst = base[k];
    if (dst.is_object())
      mergeStrict(dst, v, key);
    else
      assignLeaf(dst, v, key);
  }
}

// Applies one "dotted.key=value" override. The value is read as JSON unless
// the target is a string, in which case the raw text is used.
void applyOverride(json& cfg, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + text + "' is not key=value");
  const std::string key = text.substr(0, eq), raw = text.substr(eq + 1);
  json* node = &cfg;
  std::string prefix;
  std::stringstream parts(key);
  std::string part;
  while (std::getline(parts, part, '.')) {
    prefix = prefix.empty() ? part : prefix + "." + part;
    if (!node->is_object() || !node->contains(part)) throw ValidationError("unknown config key '" + prefix + "'");
    node = &(*node)[part];
  }
  if (node->is_object()) throw ValidationError("config key '" + key + "' is a section, not a value");
  json value;
  if (node->is_string()) {
    value = raw;
  } else {
    value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) throw ValidationError("override '" + key + "': cannot parse '" + raw + "'");
  }
  assignLeaf(*node, value, key);
}

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<json>> rows;
};

std::string cell(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    std::ostringstream s;
    s << std::setprecision(6) << v.get<double>();
    return s.str();
  }
  return v.dump();
}

// Collects command output. Tables go to stdout as TSV with a header row, or
// as one JSON document with --json.
class Report {
 public:
  Report(std::string command, bool asJson) : asJson_(asJson) { doc_["command"] = std::move(command); }

  void table(const Table& t) {
    if (asJson_) {
      json rows = json::array();
      for (const auto& r : t.rows) {
        json o;
        for (std::size_t i = 0; i < t.header.size(); ++i) o[t.header[i]] = r[i];
        rows.push_back(o);
      }
      doc_["tables"][t.name] = rows;
      return;
    }
    if (printed_) std::cout << '\n';
    printed_ = true;
    for (std::size_t i = 0; i < t.header.size(); ++i) std::cout << (i ? "\t" : "") << t.header[i];
    std::cout << '\n';
    for (const auto& r : t.rows) {
      for (std::size_t i = 0; i < r.size(); ++i) std::cout << (i ? "\t" : "") << cell(r[i]);
      std::cout << '\n';
    }
    std::cout << std::flush;
  }

  void line(const std::string& key, const json& value, const std::string& text) {
    doc_[key] = value;
    if (!asJson_) std::cout << text << '\n' << std::flush;
  }

  void artifact(const fs::path& p) { doc_["artifacts"].push_back(p.string()); }

  void finish() {
    if (asJson_) std::cout << doc_.dump(2) << '\n';
  }

 private:
  bool asJson_;
  bool printed_ = false;
  json doc_;
};

struct Context {
  json cfg;
  fs::path out;
  int threads = 1;
  Report* report = nullptr;

  const json& at(const std::string& section) const { return cfg.at(section); }
};

double seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

MorphableModel loadModel(const Context& c) {
  const auto& m = c.at("model");
  const auto path = m.at("path").get<std::string>();
  if (!path.empty()) return loadMorphableModel(path);
  return makeSyntheticFaceModel(m.at("resolution").get<std::size_t>(), m.at("seed").get<std::uint64_t>());
}

ShapeCoeffs loadCoefficients(const Context& c, const MorphableModel& model) {
  json src = c.at("coefficients");
  const auto path = src.at("path").get<std::string>();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open coefficients file '" + path + "'");
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded() || !file.is_object()) throw FormatError("coefficients file '" + path + "' is not a JSON object");
    for (const auto& [k, v] : file.items()) {
      if (k != "wId" && k != "wExp") throw ValidationError("coefficients file: unknown key '" + k + "'");
      src[k] = v;
    }
  }
  ShapeCoeffs coeffs = ShapeCoeffs::zeros(model);
  auto take = [&](const char* key, std::vector<double>& dst) {
    const auto& v = src.at(key);
    if (!v.empty()) dst = v.get<std::vector<double>>();
  };
  take("wId", coeffs.wId);
  take("wExp", coeffs.wExp);
  return coeffs;
}

bool flatSource(const Context& c) { return c.at("mesh").at("source").get<std::string>() == "flat"; }

TriMesh loadMesh(const Context& c) {
  const auto source = c.at("mesh").at("source").get<std::string>();
  const auto& cam = c.at("camera");
  if (source == "model") {
    const auto model = loadModel(c);
    return buildShape(model, loadCoefficients(c, model));
  }
  if (source == "flat") {
    const int w = cam.at("width").get<int>(), h = cam.at("height").get<int>();
    if (w < 2 || h < 2) throw ValidationError("flat fixture needs an image of at least 2x2 pixels");
    return makeGridMesh(static_cast<std::size_t>(w), static_cast<std::size_t>(h), 1, 1, 0.5 - w / 2.0,
                        0.5 - h / 2.0);
  }
  if (source.rfind("icosphere:", 0) == 0) {
    const auto levels = source.substr(10);
    if (levels.empty() || levels.find_first_not_of("0123456789") != std::string::npos || levels.size() > 1)
      throw ValidationError("mesh source '" + source + "': expected icosphere:<0-9>");
    return makeIcosphere(std::stoi(levels));
  }
  if (source.size() > 4 && source.substr(source.size() - 4) == ".obj") return loadMeshObj(source);
  throw ValidationError("mesh source '" + source + "' is not model, flat, icosphere:N or an .obj path");
}

Camera makeCamera(const Context& c) {
  const auto& j = c.at("camera");
  const int w = j.at("width").get<int>(), h = j.at("height").get<int>();
  const double deg = std::acos(-1.0) / 180.0;
  const double yaw = j.at("yawDegrees").get<double>() * deg, pitch = j.at("pitchDegrees").get<double>() * deg,
               roll = j.at("rollDegrees").get<double>() * deg;
  const Mat3 rot = axisAngle({0, 0, 1}, roll) * axisAngle({1, 0, 0}, pitch) * axisAngle({0, 1, 0}, yaw);
  const auto mode = j.at("projection").get<std::string>();
  Camera cam;
  if (mode == "orthographic") {
    double scale = j.at("scale").get<double>();
    if (scale == 0) scale = flatSource(c) ? 1.0 : Camera::orthographicDefault(w, h).scale;
    if (!(scale > 0)) throw ValidationError("camera.scale must be positive (0 selects the default)");
    cam.width = w;
    cam.height = h;
    cam.scale = scale;
    cam.rotation = rot;
    cam.translation = {w / (2 * scale), h / (2 * scale), 0};
  } else if (mode == "perspective") {
    double focal = j.at("focal").get<double>();
    if (focal == 0) focal = 1.35 * std::min(w, h);
    cam = Camera::perspective(focal, w, h, rot, {0, 0, j.at("distance").get<double>()});
  } else {
    throw ValidationError("camera.projection must be orthographic or perspective");
  }
  if (flatSource(c) && (mode != "orthographic" || yaw != 0 || pitch != 0 || roll != 0))
    throw ValidationError("the flat fixture is viewed by a frontal orthographic camera");
  cam.validate();
  return cam;
}

HeatOptions heatOptions(const Context& c) {
  HeatOptions h;
  h.tScale = c.at("heat").at("tScale").get<double>();
  const auto solver = c.at("heat").at("solver").get<std::string>();
  if (solver == "cholesky")
    h.solver = LinearSolver::kCholesky;
  else if (solver == "cg")
    h.solver = LinearSolver::kConjugateGradient;
  else
    throw ValidationError("heat.solver must be cholesky or cg");
  return h;
}

WeightOptions weightOptions(const Context& c) {
  const auto& j = c.at("weights");
  WeightOptions o;
  o.clampRatio = j.at("clampRatio").get<double>();
  o.hierarchyCompensation = j.at("hierarchyCompensation").get<bool>();
  o.exactChords = j.at("exactChords").get<bool>();
  o.boundToOracles = j.at("boundToOracles").get<bool>();
  o.heat = heatOptions(c);
  o.threads = c.threads;
  return o;
}

TrainOptions trainOptions(const Context& c) {
  const auto& j = c.at("training");
  TrainOptions t;
  t.optim.epochs = j.at("epochs").get<int>();
  t.optim.batchSize = j.at("batchSize").get<std::size_t>();
  t.optim.lrBackbone = j.at("lrBackbone").get<double>();
  t.optim.lrRest = j.at("lrRest").get<double>();
  t.optim.momentum = j.at("momentum").get<double>();
  t.optim.weightDecay = j.at("weightDecay").get<double>();
  t.optim.nesterov = j.at("nesterov").get<bool>();
  t.optim.horizon = j.at("horizon").get<int>();
  t.balanced = j.at("balanced").get<bool>();
  t.augment.colorJitter = j.at("colorJitter").get<bool>();
  t.augment.pcaNoise = j.at("pcaNoise").get<bool>();
  t.seed = c.cfg.at("seed").get<std::uint64_t>();
  t.optim.validate();
  return t;
}

std::string requiredPath(const Context& c, const std::string& section) {
  const auto p = c.at(section).at("path").get<std::string>();
  if (p.empty()) throw ValidationError(section + ".path is required");
  return p;
}

NetSpec netSpec(const Context& c, const SyntheticAuDataset& data) {
  return NetSpec::toy(data.nAu, NetSpec::parseMask(c.at("network").at("geoMask").get<std::string>()), data.imageSize,
                      c.at("network").at("hidden").get<std::size_t>());
}

template <class T>
std::vector<T> seedList(const json& j, const std::string& key) {
  auto v = j.get<std::vector<T>>();
  if (v.empty()) throw ValidationError(key + " must not be empty");
  return v;
}

int cmdSynthModel(Context& c) {
  const auto& m = c.at("model");
  const auto model =
      makeSyntheticFaceModel(m.at("resolution").get<std::size_t>(), m.at("seed").get<std::uint64_t>());
  const auto path = c.out / "model.bin";
  saveMorphableModel(model, path);
  c.report->artifact(path);
  c.report->table({"model",
                   {"vertices", "triangles", "nId", "nExp"},
                   {{model.vertexCount(), model.triangles.size(), model.nId, model.nExp}}});
  return 0;
}

int cmdBuildShape(Context& c) {
  const auto mesh = loadMesh(c);
  const auto path = c.out / "shape.obj";
  saveMeshObj(mesh, path);
  c.report->artifact(path);
  c.report->table({"shape",
                   {"vertices", "triangles", "surfaceArea", "meanEdgeLength"},
                   {{mesh.vertexCount(), mesh.triangleCount(), mesh.surfaceArea(), mesh.meanEdgeLength()}}});
  return 0;
}

int cmdGeodesic(Context& c) {
  const auto mesh = loadMesh(c);
  const auto sources = c.at("geodesic").at("sources").get<std::vector<std::uint32_t>>();
  if (sources.empty()) throw ValidationError("geodesic.sources must not be empty");
  for (auto s : sources)
    if (s >= mesh.vertexCount())
      throw ValidationError("source vertex " + std::to_string(s) + " is out of range (" +
                            std::to_string(mesh.vertexCount()) + " vertices)");
  const bool oracle = c.at("geodesic").at("oracle").get<bool>();
  const auto batch = geodesicBatch(mesh, sources, heatOptions(c), c.threads);

  Table t{"geodesic", {"source", "reachable", "max", "mean"}, {}};
  if (oracle) {
    t.header.push_back("oracleMaxRelDev");
    t.header.push_back("oracleMeanRelDev");
  }
  for (const auto& [src, field] : batch.fields) {
    const auto path = c.out / ("geodesic-" + std::to_string(src) + ".gfd");
    saveGeodesicField(field, path);
    c.report->artifact(path);
    std::size_t reachable = 0;
    double maxD = 0, sum = 0;
    for (double d : field.distances) {
      if (!std::isfinite(d)) continue;
      ++reachable;
      maxD = std::max(maxD, d);
      sum += d;
    }
    std::vector<json> row = {src, reachable, maxD, reachable ? sum / reachable : 0.0};
    if (oracle) {
      const auto ref = dijkstraGeodesic(mesh, src);
      double maxDev = 0, devSum = 0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < ref.distances.size(); ++i) {
        const double d = ref.distances[i];
        if (!(d > 0) || !std::isfinite(d)) continue;
        const double dev = std::abs(field.distances[i] - d) / d;
        maxDev = std::max(maxDev, dev);
        devSum += dev;
        ++n;
      }
      row.push_back(maxDev);
      row.push_back(n ? devSum / n : 0.0);
    }
    t.rows.push_back(std::move(row));
  }
  c.report->table(t);
  if (!batch.failures.empty()) {
    for (const auto& [src, msg] : batch.failures) std::cerr << "source " << src << ": " << msg << '\n';
    throw NumericalError(std::to_string(batch.failures.size()) + " geodesic source(s) failed");
  }
  return 0;
}

// Flat fixture check: all weights are 1 and GeoConv reproduces the plain
// convolution bit for bit at every layer resolution.
bool flatReduction(const GeoWeightStack& stack, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& layer : stack.layers) {
    for (float g : layer.g)
      if (!(std::abs(g - 1.0f) <= 1e-6f)) return false;
    const auto k = static_cast<std::size_t>(layer.geometry.kernel);
    Tensor4 x(1, 3, layer.geometry.height, layer.geometry.width);
    for (auto& v : x.values()) v = rng.normal();
    ConvKernel kernel(4, 3, k);
    for (auto& v : kernel.weight.values()) v = rng.normal();
    for (auto& b : kernel.bias) b = rng.normal();
    const LayerWeights* slices[] = {&layer};
    const auto a = conv2dForward(x, kernel);
    const auto b = geoConvForward(x, kernel, slices);
    if (a.values().size() != b.values().size() ||
        std::memcmp(a.data(), b.data(), a.values().size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

int cmdCompileWeights(Context& c) {
  const auto total = std::chrono::steady_clock::now();
  Table timing{"timing", {"stage", "seconds"}, {}};

  auto t0 = std::chrono::steady_clock::now();
  const auto mesh = loadMesh(c);
  const auto camera = makeCamera(c);
  timing.rows.push_back({"shape", seconds(t0)});

  t0 = std::chrono::steady_clock::now();
  const auto corr = rasterize(mesh, camera);
  timing.rows.push_back({"rasterize", seconds(t0)});

  const auto arch = architectureFromJson(c.at("architecture"));
  CompileStats stats;
  const auto stack = compileWeights(corr, mesh, camera, arch, weightOptions(c), "compile-weights", &stats);
  timing.rows.push_back({"geodesic", stats.geodesicSeconds});
  timing.rows.push_back({"assembly", stats.assemblySeconds});

  t0 = std::chrono::steady_clock::now();
  const auto weightsPath = c.out / "weights.gws", corrPath = c.out / "correspondence.crs";
  saveWeightStack(stack, weightsPath);
  saveCorrespondence(corr, corrPath);
  c.report->artifact(weightsPath);
  c.report->artifact(corrPath);
  timing.rows.push_back({"write", seconds(t0)});
  timing.rows.push_back({"total", seconds(total)});

  Table layers{"layers", {"layer", "height", "width", "stride", "minWeight", "maxWeight"}, {}};
  for (const auto& l : stack.layers) {
    const auto [lo, hi] = std::minmax_element(l.g.begin(), l.g.end());
    layers.rows.push_back({l.geometry.layerIndex, l.geometry.height, l.geometry.width, l.geometry.stride,
                           l.g.empty() ? 0.0 : *lo, l.g.empty() ? 0.0 : *hi});
  }
  c.report->table({"summary",
                   {"coveredPixels", "pixels", "sources"},
                   {{corr.coveredCount(), corr.pixels.size(), stats.sources}}});
  c.report->table(layers);
  c.report->table(timing);

  if (flatSource(c)) {
    const bool ok = flatReduction(stack, c.cfg.at("seed").get<std::uint64_t>());
    c.report->line("flatReduction", ok ? "PASS" : "FAIL", std::string("flat reduction: ") + (ok ? "PASS" : "FAIL"));
    if (!ok) return kExitNumerical;
  }
  return 0;
}

int cmdGradcheck(Context& c) {
  const auto& j = c.at("gradcheck");
  const auto seeds = seedList<std::uint64_t>(j.at("seeds"), "gradcheck.seeds");
  const double tol = j.at("tolerance").get<double>();
  Table t{"gradcheck", {"suite", "seed", "checked", "maxRelativeError", "status"}, {}};
  bool ok = true;
  for (auto seed : seeds) {
    for (int suite = 0; suite < 2; ++suite) {
      const auto r = suite == 0 ? geoConvGradCheck(seed) : networkGradCheck(seed);
      const bool pass = r.maxRelativeError <= tol;
      ok = ok && pass;
      t.rows.push_back({suite == 0 ? "geoconv" : "network", seed, r.checked, r.maxRelativeError, pass ? "PASS" : "FAIL"});
    }
  }
  c.report->table(t);
  c.report->line("gradcheck", ok ? "PASS" : "FAIL", std::string("gradcheck: ") + (ok ? "PASS" : "FAIL"));
  return ok ? 0 : kExitNumerical;
}

int cmdMakeDataset(Context& c) {
  const auto model = loadModel(c);
  const auto& j = c.at("dataset");
  DatasetConfig d;
  d.samples = j.at("samples").get<std::size_t>();
  d.identities = j.at("identities").get<std::size_t>();
  d.imageSize = j.at("imageSize").get<std::size_t>();
  d.nAu = j.at("nAu").get<std::size_t>();
  d.expressionRange = j.at("expressionRange").get<double>();
  d.threshold = j.at("threshold").get<double>();
  d.identityScale = j.at("identityScale").get<double>();
  d.poseJitterDegrees = j.at("poseJitterDegrees").get<double>();
  d.pixelNoise = j.at("pixelNoise").get<double>();
  d.seed = j.at("seed").get<std::uint64_t>();
  d.weights = weightOptions(c);
  d.architecture = architectureFromJson(c.at("architecture"));
  d.validate();

  auto data = makeSyntheticDataset(model, d);
  data.metadata["model"] = c.at("model");
  const auto path = c.out / "dataset.gds";
  saveDataset(data, path);
  c.report->artifact(path);

  Table t{"dataset", {"split", "samples"}, {}};
  for (std::size_t a = 0; a < data.nAu; ++a) t.header.push_back("AU" + std::to_string(a + 1) + "rate");
  for (bool train : {true, false}) {
    const auto idx = data.indices(train);
    const auto labels = data.labelTable(idx);
    std::vector<json> row = {train ? "train" : "test", idx.size()};
    for (std::size_t a = 0; a < data.nAu; ++a) {
      std::size_t pos = 0;
      for (std::size_t s = 0; s < idx.size(); ++s) pos += labels[s * data.nAu + a];
      row.push_back(idx.empty() ? 0.0 : static_cast<double>(pos) / idx.size());
    }
    t.rows.push_back(std::move(row));
  }
  c.report->table(t);
  return 0;
}

int cmdTrain(Context& c) {
  const auto data = loadDataset(requiredPath(c, "dataset"));
  const auto opts = trainOptions(c);
  Network net(netSpec(c, data), opts.seed);
  const auto logPath = c.out / "train-log.jsonl";
  std::ofstream log(logPath, std::ios::binary);
  if (!log) throw ValidationError("cannot write '" + logPath.string() + "'");
  const auto records = trainEpochs(net, data, opts, &log);
  log.close();
  const auto ckpt = c.out / "checkpoint.gck";
  saveCheckpoint(net, ckpt);
  c.report->artifact(logPath);
  c.report->artifact(ckpt);

  Table t{"train", {"epoch", "lr", "loss", "avgF1"}, {}};
  for (const auto& r : records) t.rows.push_back({r.epoch, r.lr, r.loss, r.avgF1});
  c.report->table(t);
  return 0;
}

Table f1Table(const std::vector<AblationRow>& rows, std::size_t nAu, const F1Result& chance) {
  Table t{"f1", {"variant"}, {}};
  for (std::size_t a = 0; a < nAu; ++a) t.header.push_back("AU" + std::to_string(a + 1));
  t.header.push_back("avg");
  auto round1 = [](double v) { return std::round(v * 10) / 10; };
  auto add = [&](const std::string& name, const std::vector<double>& per, double avg) {
    std::vector<json> r = {name};
    for (double f : per) r.push_back(round1(f));
    r.push_back(round1(avg));
    t.rows.push_back(std::move(r));
  };
  for (const auto& r : rows) add(r.name, r.perAuF1, r.avgF1);
  add("chance", chance.perAu, chance.average);
  return t;
}

void writeTable(const std::vector<AblationRow>& rows, std::size_t nAu, const F1Result& chance, const fs::path& path) {
  std::ostringstream s;
  writeF1Table(s, rows, nAu, chance);
  const auto text = s.str();
  io::writeFile(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

int cmdEval(Context& c) {
  const auto data = loadDataset(requiredPath(c, "dataset"));
  auto net = loadCheckpoint(requiredPath(c, "checkpoint"));
  if (net.spec().nAu != data.nAu || net.spec().inputSize != data.imageSize)
    throw ShapeError("checkpoint does not match the dataset's image size or AU count");
  const auto result = evaluate(net, data);
  AblationRow row;
  row.name = net.spec().maskName();
  row.perAuF1 = result.f1.perAu;
  row.avgF1 = result.f1.average;
  const std::vector<AblationRow> rows = {row};
  const auto path = c.out / "eval.tsv";
  writeTable(rows, data.nAu, result.chance, path);
  c.report->artifact(path);
  c.report->table(f1Table(rows, data.nAu, result.chance));
  return 0;
}

int cmdAblate(Context& c) {
  const auto data = loadDataset(requiredPath(c, "dataset"));
  const auto& j = c.at("ablate");
  const auto names = j.at("variants").get<std::vector<std::string>>();
  if (names.empty()) throw ValidationError("ablate.variants must not be empty");
  AblationSetup setup;
  setup.base = netSpec(c, data);
  setup.training = trainOptions(c);
  setup.seeds = seedList<std::uint64_t>(j.at("seeds"), "ablate.seeds");
  std::vector<AblationVariant> variants;
  for (const auto& n : names) variants.push_back(AblationVariant::parse(n, setup.base.geoConvCount()));

  std::unique_ptr<MorphableModel> model;
  for (const auto& v : variants)
    if (!v.hierarchyCompensation) {
      // Stacks are recompiled from the model that generated the dataset.
      Context mc = c;
      if (data.metadata.contains("model")) mergeStrict(mc.cfg["model"], data.metadata.at("model"), "model");
      model = std::make_unique<MorphableModel>(loadModel(mc));
      break;
    }
  const auto rows = runAblation(data, model.get(), variants, setup, &std::cerr);
  const auto test = data.indices(false);
  const auto chance = chanceF1(data.labelTable(test), data.nAu);
  const auto path = c.out / "ablation.tsv";
  writeTable(rows, data.nAu, chance, path);
  c.report->artifact(path);
  c.report->table(f1Table(rows, data.nAu, chance));

  Table seeds{"seeds", {"variant", "seed", "avgF1", "finalLoss"}, {}};
  for (const auto& r : rows)
    for (std::size_t i = 0; i < setup.seeds.size(); ++i)
      seeds.rows.push_back({r.name, setup.seeds[i], r.seedAvgF1[i], r.finalLoss[i]});
  c.report->table(seeds);
  return 0;
}

std::string errorType(const std::exception& e) {
  if (dynamic_cast<const TrainingFailure*>(&e)) return "TrainingFailure";
  if (dynamic_cast<const SolverError*>(&e)) return "SolverError";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  if (dynamic_cast<const UnsupportedFaceError*>(&e)) return "UnsupportedFaceError";
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const VersionError*>(&e)) return "VersionError";
  if (dynamic_cast<const FormatError*>(&e)) return "FormatError";
  if (dynamic_cast<const ShapeError*>(&e)) return "ShapeError";
  if (dynamic_cast<const GeometryError*>(&e)) return "GeometryError";
  if (dynamic_cast<const UnsupportedArchitectureError*>(&e)) return "UnsupportedArchitectureError";
  if (dynamic_cast<const PrecomputeIncompleteError*>(&e)) return "PrecomputeIncompleteError";
  if (dynamic_cast<const DegenerateClassError*>(&e)) return "DegenerateClassError";
  if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
  return "Error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GeoConv preprocessing, training and ablation pipeline"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string configPath, outputDir;
  std::vector<std::string> overrides;
  int threads = 0;
  bool asJson = false, jsonErrors = false;
  app.add_option("--config", configPath, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override a dotted config key, e.g. training.epochs=3")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--output-dir", outputDir, "directory for outputs (config key outputDir)");
  app.add_option("--threads", threads, "worker threads (config key threads)")->check(CLI::PositiveNumber);
  app.add_flag("--json", asJson, "print machine-readable JSON instead of TSV tables");
  app.add_flag("--json-errors", jsonErrors, "print errors as a JSON record on stderr");

  struct Command {
    const char* name;
    const char* help;
    int (*run)(Context&);
    CLI::App* app = nullptr;
  };
  std::vector<Command> commands = {
      {"synth-model", "write a synthetic morphable model (model.bin)", cmdSynthModel},
      {"build-shape", "build a mesh from coefficients (shape.obj)", cmdBuildShape},
      {"geodesic", "heat-method geodesic fields from source vertices", cmdGeodesic},
      {"compile-weights", "rasterize, compute geodesics and compile a weight stack", cmdCompileWeights},
      {"gradcheck", "finite-difference checks of GeoConv and a whole network", cmdGradcheck},
      {"make-dataset", "generate the synthetic AU dataset (dataset.gds)", cmdMakeDataset},
      {"train", "train a network (checkpoint.gck, train-log.jsonl)", cmdTrain},
      {"eval", "per-AU F1 of a checkpoint on the test split", cmdEval},
      {"ablate", "train and evaluate a list of variants", cmdAblate},
  };
  for (auto& c : commands) c.app = app.add_subcommand(c.name, c.help)->fallthrough();

  // Per-command shortcuts for common keys.
  std::vector<std::pair<std::string, std::string>> shortcuts;
  auto shortcut = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&shortcuts, key](const std::string& v) { shortcuts.emplace_back(key, v); },
                                          help + " (" + key + ")");
  };
  for (auto& c : commands) {
    const std::string n = c.name;
    if (n == "build-shape" || n == "geodesic" || n == "compile-weights") shortcut(c.app, "--mesh", "mesh.source", "mesh source");
    if (n == "train" || n == "eval" || n == "ablate") shortcut(c.app, "--dataset", "dataset.path", "dataset file");
    if (n == "train" || n == "ablate") shortcut(c.app, "--epochs", "training.epochs", "training epochs");
    if (n == "train") shortcut(c.app, "--mask", "network.geoMask", "G-mask such as G_(11111)");
    if (n == "eval") shortcut(c.app, "--checkpoint", "checkpoint.path", "checkpoint file");
    if (n == "geodesic") {
      shortcut(c.app, "--sources", "geodesic.sources", "JSON list of source vertices");
      c.app->add_flag_callback("--oracle", [&shortcuts] { shortcuts.emplace_back("geodesic.oracle", "true"); },
                               "compare against Dijkstra (geodesic.oracle)");
    }
  }

  std::string command = "geoconv";
  auto fail = [&](const std::string& type, const std::string& message, int code, const json& extra) {
    std::cerr << "error: " << message << '\n';
    if (jsonErrors) {
      json rec = {{"error", {{"type", type}, {"message", message}, {"exitCode", code}, {"command", command}}}};
      for (const auto& [k, v] : extra.items()) rec["error"][k] = v;
      std::cerr << rec.dump() << '\n';
    }
    return code;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("UsageError", e.what(), kExitValidation, json::object());
  }

  const Command* selected = nullptr;
  for (const auto& c : commands)
    if (c.app->parsed()) selected = &c;
  command = selected->name;

  try {
    Context ctx;
    ctx.cfg = defaultConfig();
    if (!configPath.empty()) {
      std::ifstream in(configPath);
      json file = json::parse(in, nullptr, false);
      if (file.is_discarded()) throw ValidationError("config file '" + configPath + "' is not valid JSON");
      mergeStrict(ctx.cfg, file, "");
    }
    for (const auto& o : overrides) applyOverride(ctx.cfg, o);
    for (const auto& [k, v] : shortcuts) applyOverride(ctx.cfg, k + "=" + v);
    if (!outputDir.empty()) ctx.cfg["outputDir"] = outputDir;
    if (threads > 0) ctx.cfg["threads"] = threads;

    ctx.threads = ctx.cfg.at("threads").get<int>();
    if (ctx.threads < 1) throw ValidationError("threads must be at least 1");
    ctx.out = ctx.cfg.at("outputDir").get<std::string>();
    if (ctx.out.empty()) throw ValidationError("outputDir must not be empty");
    fs::create_directories(ctx.out);
    {
      const auto text = ctx.cfg.dump(2) + "\n";
      io::writeFile(ctx.out / "resolved-config.json", {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
    }

    Report report(command, asJson);
    ctx.report = &report;
    const int code = selected->run(ctx);
    report.finish();
    return code;
  } catch (const TrainingFailure& e) {
    return fail(errorType(e), e.what(), kExitNumerical, {{"epoch", e.epoch()}});
  } catch (const ParseError& e) {
    return fail(errorType(e), e.what(), kExitValidation, {{"line", e.line()}});
  } catch (const NumericalError& e) {
    return fail(errorType(e), e.what(), kExitNumerical, json::object());
  } catch (const ValidationError& e) {
    return fail(errorType(e), e.what(), kExitValidation, json::object());
  } catch (const json::exception& e) {
    return fail("ConfigError", e.what(), kExitValidation, json::object());
  } catch (const fs::filesystem_error& e) {
    return fail("IoError", e.what(), kExitValidation, json::object());
  } catch (const std::exception& e) {
    return fail("Error", e.what(), kExitValidation, json::object());
  }
}
