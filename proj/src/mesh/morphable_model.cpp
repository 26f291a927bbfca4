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

#include "geoconv/morphable_model.hpp"

#include <string>

#include "geoconv/binary_io.hpp"
#include "geoconv/errors.hpp"

namespace geoconv {

void MorphableModel::validate() const {
  if (meanShape.size() % 3 != 0)
    throw ShapeError("mean shape length " + std::to_string(meanShape.size()) +
                     " is not a multiple of 3");
  const auto rows = meanShape.size();
  if (idBasis.size() != rows * nId)
    throw ShapeError("identity basis holds " + std::to_string(idBasis.size()) +
                     " values, expected 3V x " + std::to_string(nId));
  if (expBasis.size() != rows * nExp)
    throw ShapeError("expression basis holds " + std::to_string(expBasis.size()) +
                     " values, expected 3V x " + std::to_string(nExp));
  const auto v = vertexCount();
  for (const auto& t : triangles)
    for (auto i : t)
      if (i >= v) throw ShapeError("triangle index out of range");
}

std::vector<double> basisResponse(const MorphableModel& model, const ShapeCoeffs& coeffs) {
  if (coeffs.wId.size() != model.nId)
    throw ShapeError("identity coefficients have " + std::to_string(coeffs.wId.size()) +
                     " entries, model expects " + std::to_string(model.nId));
  if (coeffs.wExp.size() != model.nExp)
    throw ShapeError("expression coefficients have " + std::to_string(coeffs.wExp.size()) +
                     " entries, model expects " + std::to_string(model.nExp));
  const auto rows = model.meanShape.size();
  std::vector<double> out(rows, 0.0);
  auto accumulate = [&](const std::vector<double>& basis, const std::vector<double>& w) {
    for (std::size_t c = 0; c < w.size(); ++c) {
      const double wc = w[c];
      if (wc == 0.0) continue;
      const double* col = basis.data() + c * rows;
      for (std::size_t r = 0; r < rows; ++r) out[r] += col[r] * wc;
    }
  };
  accumulate(model.idBasis, coeffs.wId);
  accumulate(model.expBasis, coeffs.wExp);
  return out;
}

TriMesh buildShape(const MorphableModel& model, const ShapeCoeffs& coeffs) {
  model.validate();
  auto delta = basisResponse(model, coeffs);
  std::vector<Vec3> v(model.vertexCount());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = {model.meanShape[3 * i] + delta[3 * i], model.meanShape[3 * i + 1] + delta[3 * i + 1],
            model.meanShape[3 * i + 2] + delta[3 * i + 2]};
  return TriMesh(std::move(v), model.triangles);
}

std::vector<std::uint8_t> encodeMorphableModel(const MorphableModel& model) {
  model.validate();
  io::ByteWriter w;
  w.magic("GMM1");
  w.put(static_cast<std::uint32_t>(model.vertexCount()));
  w.put(static_cast<std::uint32_t>(model.nId));
  w.put(static_cast<std::uint32_t>(model.nExp));
  w.put(static_cast<std::uint32_t>(model.triangles.size()));
  w.putAll<double>(model.meanShape);
  w.putAll<double>(model.idBasis);
  w.putAll<double>(model.expBasis);
  for (const auto& t : model.triangles)
    for (auto i : t) w.put(i);
  return w.take();
}

MorphableModel decodeMorphableModel(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "morphable model");
  r.expectMagic("GMM1");
  MorphableModel m;
  const auto v = r.get<std::uint32_t>();
  m.nId = r.get<std::uint32_t>();
  m.nExp = r.get<std::uint32_t>();
  const auto t = r.get<std::uint32_t>();
  const std::size_t rows = 3ull * v;
  // Size check before allocating so a corrupted header cannot request
  // gigabytes.
  const std::size_t payload = 8 * rows * (1 + m.nId + m.nExp) + 12ull * t;
  r.need(payload);
  m.meanShape.resize(rows);
  m.idBasis.resize(rows * m.nId);
  m.expBasis.resize(rows * m.nExp);
  r.getAll<double>(m.meanShape);
  r.getAll<double>(m.idBasis);
  r.getAll<double>(m.expBasis);
  m.triangles.resize(t);
  for (auto& tri : m.triangles)
    for (auto& i : tri) i = r.get<std::uint32_t>();
  if (r.remaining() != 0) throw FormatError("morphable model: trailing bytes after payload");
  try {
    m.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("morphable model: ") + e.what());
  }
  return m;
}

void saveMorphableModel(const MorphableModel& model, const std::filesystem::path& path) {
  io::writeFile(path, encodeMorphableModel(model));
}

MorphableModel loadMorphableModel(const std::filesystem::path& path) {
  return decodeMorphableModel(io::readFile(path));
}

}  // namespace geoconv
