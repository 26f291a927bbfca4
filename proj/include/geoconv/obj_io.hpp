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

#include <filesystem>
#include <iosfwd>

#include "geoconv/mesh.hpp"

namespace geoconv {

// Wavefront OBJ subset: "v x y z" and triangular "f a b c" records. Face
// indices may carry texture/normal suffixes ("f 1/1/1 ...") which are ignored;
// negative (relative) indices are resolved. Other record types are skipped.

TriMesh readMeshObj(std::istream& in);
void writeMeshObj(const TriMesh& mesh, std::ostream& out);

TriMesh loadMeshObj(const std::filesystem::path& path);
void saveMeshObj(const TriMesh& mesh, const std::filesystem::path& path);

}  // namespace geoconv
