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

#include "geoconv/obj_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "geoconv/errors.hpp"

namespace geoconv {

namespace {

double parseDouble(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad coordinate '" + tok + "'", line);
  }
}

}  // namespace

TriMesh readMeshObj(std::istream& in) {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::string text;
  std::size_t lineNo = 0;
  while (std::getline(in, text)) {
    ++lineNo;
    if (auto hash = text.find('#'); hash != std::string::npos) text.resize(hash);
    std::istringstream ls(text);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      std::string a, b, c;
      if (!(ls >> a >> b >> c)) throw ParseError("vertex record needs 3 coordinates", lineNo);
      vertices.push_back({parseDouble(a, lineNo), parseDouble(b, lineNo), parseDouble(c, lineNo)});
    } else if (tag == "f") {
      std::vector<long> idx;
      std::string tok;
      while (ls >> tok) {
        auto slash = tok.find('/');
        std::string head = tok.substr(0, slash);
        long value = 0;
        auto [p, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
        if (ec != std::errc() || p != head.data() + head.size() || value == 0)
          throw ParseError("bad face index '" + tok + "'", lineNo);
        if (value < 0) value = static_cast<long>(vertices.size()) + value + 1;
        if (value < 1 || static_cast<std::size_t>(value) > vertices.size())
          throw ParseError("face index " + head + " out of range", lineNo);
        idx.push_back(value - 1);
      }
      if (idx.size() != 3)
        throw UnsupportedFaceError(
            "unsupported face with " + std::to_string(idx.size()) + " vertices (triangles only)",
            lineNo);
      triangles.push_back({static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[1]),
                           static_cast<std::uint32_t>(idx[2])});
    }
  }
  return TriMesh(std::move(vertices), std::move(triangles));
}

void writeMeshObj(const TriMesh& mesh, std::ostream& out) {
  char buf[128];
  for (const auto& v : mesh.vertices()) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
    out << buf;
  }
  for (const auto& t : mesh.triangles()) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

TriMesh loadMeshObj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return readMeshObj(in);
}

void saveMeshObj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  writeMeshObj(mesh, out);
}

}  // namespace geoconv
