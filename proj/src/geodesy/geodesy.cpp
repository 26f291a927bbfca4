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

#include "geoconv/geodesy.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <queue>
#include <thread>

#include "geoconv/binary_io.hpp"
#include "geoconv/errors.hpp"

namespace geoconv {

SparseSym cotanLaplacian(const TriMesh& mesh) {
  std::vector<Triplet> t;
  t.reserve(mesh.triangleCount() * 12);
  const auto& p = mesh.vertices();
  for (std::size_t f = 0; f < mesh.triangleCount(); ++f) {
    const auto& tri = mesh.triangle(f);
    for (int c = 0; c < 3; ++c) {
      const auto k = tri[c], i = tri[(c + 1) % 3], j = tri[(c + 2) % 3];
      const Vec3 e1 = p[i] - p[k], e2 = p[j] - p[k];
      const double twiceArea = length(cross(e1, e2));
      if (!(twiceArea > 2 * kMinTriangleArea))
        throw GeometryError("degenerate triangle " + std::to_string(f) + " in cotangent Laplacian");
      const double w = 0.5 * dot(e1, e2) / twiceArea;
      t.push_back({i, j, -w});
      t.push_back({j, i, -w});
      t.push_back({i, i, w});
      t.push_back({j, j, w});
    }
  }
  return SparseSym(mesh.vertexCount(), std::move(t));
}

std::vector<double> lumpedMass(const TriMesh& mesh) {
  std::vector<double> m(mesh.vertexCount(), 0.0);
  for (std::size_t f = 0; f < mesh.triangleCount(); ++f) {
    const double a = mesh.triangleArea(f);
    if (!(a > kMinTriangleArea)) throw GeometryError("degenerate triangle " + std::to_string(f));
    for (auto v : mesh.triangle(f)) m[v] += a / 3.0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Heat method

namespace {

using EigenSparse = Eigen::SparseMatrix<double>;
using Factor = Eigen::SimplicialLDLT<EigenSparse>;

EigenSparse toEigen(const SparseSym& a) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(a.nonZeros());
  const auto& rp = a.rowOffsets();
  for (std::size_t r = 0; r < a.dimension(); ++r)
    for (std::size_t k = rp[r]; k < rp[r + 1]; ++k)
      t.emplace_back(static_cast<int>(r), static_cast<int>(a.columns()[k]), a.values()[k]);
  EigenSparse m(static_cast<Eigen::Index>(a.dimension()), static_cast<Eigen::Index>(a.dimension()));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

std::unique_ptr<Factor> factorize(const SparseSym& a) {
  auto f = std::make_unique<Factor>();
  f->compute(toEigen(a));
  if (f->info() != Eigen::Success) throw SolverError("sparse Cholesky factorization failed", 0.0, 0);
  return f;
}

}  // namespace

struct HeatGeodesicSolver::Component {
  std::vector<std::uint32_t> vertices;             // global ids, ascending
  std::vector<std::array<std::uint32_t, 3>> tris;  // local ids
  std::vector<std::array<Vec3, 3>> hatGradients;   // per triangle, per corner
  std::vector<double> areas;
  SparseSym stiffness;
  SparseSym heat;
  std::unique_ptr<Factor> heatFactor;
  std::unique_ptr<Factor> poissonFactor;  // stiffness with local vertex 0 pinned
};

HeatGeodesicSolver::HeatGeodesicSolver(const TriMesh& mesh, HeatOptions options)
    : mesh_(&mesh), options_(options) {
  if (!(options_.tScale > 0)) throw ValidationError("heat time scale must be positive");
  const double h = mesh.meanEdgeLength();
  t_ = options_.tScale * h * h;
  componentOf_ = mesh.componentLabels();
  const auto n = mesh.vertexCount();
  localIndex_.assign(n, 0);
  std::uint32_t count = 0;
  for (auto c : componentOf_) count = std::max(count, c + 1);
  components_.resize(count);
  for (auto& c : components_) c = std::make_unique<Component>();
  for (std::uint32_t v = 0; v < n; ++v) {
    auto& c = *components_[componentOf_[v]];
    localIndex_[v] = static_cast<std::uint32_t>(c.vertices.size());
    c.vertices.push_back(v);
  }
  const auto& p = mesh.vertices();
  for (std::size_t f = 0; f < mesh.triangleCount(); ++f) {
    const auto& tri = mesh.triangle(f);
    auto& c = *components_[componentOf_[tri[0]]];
    c.tris.push_back({localIndex_[tri[0]], localIndex_[tri[1]], localIndex_[tri[2]]});
    const Vec3 nrm = cross(p[tri[1]] - p[tri[0]], p[tri[2]] - p[tri[0]]);
    const double twiceArea = length(nrm);
    const Vec3 unit = nrm * (1.0 / twiceArea);
    std::array<Vec3, 3> g;
    for (int k = 0; k < 3; ++k)
      g[k] = cross(unit, p[tri[(k + 2) % 3]] - p[tri[(k + 1) % 3]]) * (1.0 / twiceArea);
    c.hatGradients.push_back(g);
    c.areas.push_back(0.5 * twiceArea);
  }

  const SparseSym fullL = cotanLaplacian(mesh);
  const std::vector<double> fullM = lumpedMass(mesh);
  for (auto& cp : components_) {
    auto& c = *cp;
    if (c.vertices.size() < 3) continue;
    c.stiffness = fullL.restricted(c.vertices);
    std::vector<Triplet> mass;
    for (std::uint32_t i = 0; i < c.vertices.size(); ++i) mass.push_back({i, i, fullM[c.vertices[i]]});
    c.heat = SparseSym(c.vertices.size(), std::move(mass)).plusScaled(c.stiffness, t_);
    if (options_.solver == LinearSolver::kCholesky) {
      c.heatFactor = factorize(c.heat);
      std::vector<std::uint32_t> rest(c.vertices.size() - 1);
      for (std::uint32_t i = 0; i < rest.size(); ++i) rest[i] = i + 1;
      c.poissonFactor = factorize(c.stiffness.restricted(rest));
    }
  }
}

HeatGeodesicSolver::~HeatGeodesicSolver() = default;
HeatGeodesicSolver::HeatGeodesicSolver(HeatGeodesicSolver&&) noexcept = default;
HeatGeodesicSolver& HeatGeodesicSolver::operator=(HeatGeodesicSolver&&) noexcept = default;

GeodesicField HeatGeodesicSolver::distance(std::uint32_t source) const {
  const auto n = mesh_->vertexCount();
  if (source >= n) throw ValidationError("source vertex " + std::to_string(source) + " out of range");
  const Component& c = *components_[componentOf_[source]];
  const auto m = c.vertices.size();
  if (m < 3)
    throw GeometryError("source vertex " + std::to_string(source) +
                        " lies in a component with fewer than 3 vertices");
  const auto src = localIndex_[source];

  // (1) short-time heat flow
  std::vector<double> u(m, 0.0);
  if (options_.solver == LinearSolver::kCholesky) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    rhs[src] = 1.0;
    Eigen::VectorXd sol = c.heatFactor->solve(rhs);
    for (std::size_t i = 0; i < m; ++i) u[i] = sol[static_cast<Eigen::Index>(i)];
  } else {
    std::vector<double> rhs(m, 0.0);
    rhs[src] = 1.0;
    u = solveSpd(c.heat, rhs, options_.tolerance, options_.maxIterations);
  }

  // (2) normalized gradient, accumulated straight into the weak divergence
  // b_i = sum_f area_f <X_f, grad psi_i>
  std::vector<double> b(m, 0.0);
  for (std::size_t f = 0; f < c.tris.size(); ++f) {
    const auto& tri = c.tris[f];
    const auto& g = c.hatGradients[f];
    Vec3 grad = g[0] * u[tri[0]] + g[1] * u[tri[1]] + g[2] * u[tri[2]];
    const double len = length(grad);
    if (len == 0.0) continue;
    const Vec3 x = grad * (-1.0 / len);
    for (int k = 0; k < 3; ++k) b[tri[k]] += c.areas[f] * dot(x, g[k]);
  }
  projectOutConstant(b);

  // (3) Poisson solve L phi = b
  std::vector<double> phi(m, 0.0);
  if (options_.solver == LinearSolver::kCholesky) {
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(m - 1));
    for (std::size_t i = 1; i < m; ++i) rhs[static_cast<Eigen::Index>(i - 1)] = b[i];
    Eigen::VectorXd sol = c.poissonFactor->solve(rhs);
    for (std::size_t i = 1; i < m; ++i) phi[i] = sol[static_cast<Eigen::Index>(i - 1)];
  } else {
    phi = solveSpd(c.stiffness, b, options_.tolerance, options_.maxIterations);
  }

  GeodesicField out{source, std::vector<double>(n, kUnreachable)};
  const double shift = phi[src];
  for (std::size_t i = 0; i < m; ++i) out.distances[c.vertices[i]] = std::max(0.0, phi[i] - shift);
  out.distances[source] = 0.0;
  return out;
}

GeodesicField heatGeodesic(const TriMesh& mesh, std::uint32_t source, HeatOptions options) {
  return HeatGeodesicSolver(mesh, options).distance(source);
}

GeodesicField dijkstraGeodesic(const TriMesh& mesh, std::uint32_t source) {
  return dijkstraGeodesic(mesh, source, {});
}

GeodesicField dijkstraGeodesic(const TriMesh& mesh, std::uint32_t source,
                               std::span<const std::uint32_t> targets) {
  const auto n = mesh.vertexCount();
  if (source >= n) throw ValidationError("source vertex " + std::to_string(source) + " out of range");
  GeodesicField out{source, std::vector<double>(n, kUnreachable)};
  std::vector<char> wanted;
  std::size_t pending = 0;
  if (!targets.empty()) {
    wanted.assign(n, 0);
    for (auto t : targets)
      if (t < n && !wanted[t]) {
        wanted[t] = 1;
        ++pending;
      }
  }
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  out.distances[source] = 0.0;
  queue.push({0.0, source});
  const auto& p = mesh.vertices();
  while (!queue.empty()) {
    auto [d, v] = queue.top();
    queue.pop();
    if (d > out.distances[v]) continue;
    if (!wanted.empty() && wanted[v]) {
      wanted[v] = 0;
      if (--pending == 0) break;
    }
    for (auto w : mesh.neighbors(v)) {
      const double nd = d + length(p[w] - p[v]);
      if (nd < out.distances[w]) {
        out.distances[w] = nd;
        queue.push({nd, w});
      }
    }
  }
  return out;
}

GeodesicBatch geodesicBatch(const HeatGeodesicSolver& solver, std::span<const std::uint32_t> sources,
                            int threads) {
  std::vector<std::uint32_t> unique(sources.begin(), sources.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  std::vector<GeodesicField> fields(unique.size());
  std::vector<std::string> errors(unique.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        fields[i] = solver.distance(unique[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || unique.size() < 2) {
    work(0, unique.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (unique.size() + workers - 1) / workers;
    for (std::size_t begin = 0; begin < unique.size(); begin += chunk)
      pool.emplace_back(work, begin, std::min(unique.size(), begin + chunk));
  }

  GeodesicBatch out;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    if (errors[i].empty())
      out.fields.emplace(unique[i], std::move(fields[i]));
    else
      out.failures.emplace(unique[i], std::move(errors[i]));
  }
  return out;
}

GeodesicBatch geodesicBatch(const TriMesh& mesh, std::span<const std::uint32_t> sources,
                            HeatOptions options, int threads) {
  HeatGeodesicSolver solver(mesh, options);
  return geodesicBatch(solver, sources, threads);
}

// ---------------------------------------------------------------------------
// Straight chord walk

namespace {

struct Frame2 {
  Vec3 origin, u, v;
  std::array<double, 2> at(const Vec3& p) const {
    const Vec3 d = p - origin;
    return {dot(d, u), dot(d, v)};
  }
  std::array<double, 2> dir(const Vec3& d) const { return {dot(d, u), dot(d, v)}; }
};

double cross2(std::array<double, 2> a, std::array<double, 2> b) { return a[0] * b[1] - a[1] * b[0]; }

std::uint32_t thirdVertex(const Triangle& t, std::uint32_t a, std::uint32_t b) {
  for (auto v : t)
    if (v != a && v != b) return v;
  return t[0];
}

}  // namespace

bool straightChordOnSurface(const TriMesh& mesh, std::uint32_t a, std::uint32_t b, double relTol) {
  if (a == b) return true;
  const auto& p = mesh.vertices();
  const Vec3 chord = p[b] - p[a];
  const double total = length(chord);
  const Vec3 d = chord * (1.0 / total);
  const double eps = relTol * total;

  enum class At { kVertex, kEdge } state = At::kVertex;
  std::uint32_t vtx = a;               // kVertex
  std::uint32_t e0 = 0, e1 = 0;        // kEdge: current edge
  std::uint32_t fromTri = 0;           // kEdge: triangle just crossed
  Vec3 point = p[a];
  double travelled = 0;

  const std::size_t maxSteps = 4 * mesh.triangleCount() + 8;
  for (std::size_t step = 0; step < maxSteps; ++step) {
    if (travelled > total + eps) return false;
    if (state == At::kVertex) {
      if (vtx == b) return std::abs(travelled - total) <= 10 * eps + 1e-12;
      bool moved = false;
      for (auto f : mesh.vertexTriangles(vtx)) {
        const Vec3 n = mesh.triangleNormal(f);
        if (std::abs(dot(n, d)) > relTol) continue;
        const auto& tri = mesh.triangle(f);
        std::uint32_t q1 = 0, q2 = 0;
        for (int k = 0; k < 3; ++k)
          if (tri[k] == vtx) {
            q1 = tri[(k + 1) % 3];
            q2 = tri[(k + 2) % 3];
          }
        const Vec3 s1 = p[q1] - p[vtx], s2 = p[q2] - p[vtx];
        // d = alpha*s1 + beta*s2 within the face plane
        const double g11 = dot(s1, s1), g12 = dot(s1, s2), g22 = dot(s2, s2);
        const double r1 = dot(s1, d), r2 = dot(s2, d);
        const double det = g11 * g22 - g12 * g12;
        const double alpha = (r1 * g22 - r2 * g12) / det;
        const double beta = (r2 * g11 - r1 * g12) / det;
        const double l1 = std::sqrt(g11), l2 = std::sqrt(g22);
        if (alpha * l1 < -relTol || beta * l2 < -relTol) continue;
        if (std::abs(beta) * l2 <= relTol) {  // along edge to q1
          travelled += l1;
          point = p[q1];
          vtx = q1;
        } else if (std::abs(alpha) * l1 <= relTol) {  // along edge to q2
          travelled += l2;
          point = p[q2];
          vtx = q2;
        } else {
          const double s = 1.0 / (alpha + beta);
          point = p[vtx] + d * s;
          travelled += s;
          state = At::kEdge;
          e0 = q1;
          e1 = q2;
          fromTri = f;
        }
        moved = true;
        break;
      }
      if (!moved) return false;
    } else {
      // Find the face on the other side of edge (e0, e1).
      std::int64_t next = -1;
      for (auto f : mesh.vertexTriangles(e0)) {
        if (f == fromTri) continue;
        const auto& tri = mesh.triangle(f);
        if (tri[0] == e1 || tri[1] == e1 || tri[2] == e1) {
          next = f;
          break;
        }
      }
      if (next < 0) return false;  // boundary edge
      const auto f = static_cast<std::uint32_t>(next);
      const Vec3 n = mesh.triangleNormal(f);
      if (std::abs(dot(n, d)) > relTol) return false;
      const auto r = thirdVertex(mesh.triangle(f), e0, e1);
      Frame2 frame{point, normalize(p[e1] - p[e0]), {}};
      frame.v = normalize(cross(n, frame.u));
      const auto dir = frame.dir(d);
      const auto pr = frame.at(p[r]);
      bool moved = false;
      for (auto other : {e0, e1}) {
        // Ray from the origin along dir against segment other -> r.
        const auto po = frame.at(p[other]);
        const std::array<double, 2> seg{pr[0] - po[0], pr[1] - po[1]};
        const double den = cross2(dir, seg);
        if (std::abs(den) < 1e-300) continue;
        const double s = cross2(po, seg) / den;   // along the ray
        const double mu = cross2(po, dir) / den;  // along the segment
        const double segLen = std::hypot(seg[0], seg[1]);
        if (s <= eps || mu * segLen < -relTol || (mu - 1.0) * segLen > relTol) continue;
        travelled += s;
        if (std::abs(1.0 - mu) * segLen <= relTol) {
          state = At::kVertex;
          vtx = r;
          point = p[r];
        } else {
          point = point + d * s;
          e0 = other;
          e1 = r;
          fromTri = f;
        }
        moved = true;
        break;
      }
      if (!moved) return false;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// GFD1

std::vector<std::uint8_t> encodeGeodesicField(const GeodesicField& field) {
  io::ByteWriter w;
  w.magic("GFD1");
  w.put(static_cast<std::uint32_t>(field.distances.size()));
  w.put(field.source);
  w.putAll<double>(field.distances);
  return w.take();
}

GeodesicField decodeGeodesicField(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "geodesic field");
  r.expectMagic("GFD1");
  GeodesicField f;
  const auto v = r.get<std::uint32_t>();
  f.source = r.get<std::uint32_t>();
  r.need(8ull * v);
  f.distances.resize(v);
  r.getAll<double>(f.distances);
  if (r.remaining() != 0) throw FormatError("geodesic field: trailing bytes");
  return f;
}

void saveGeodesicField(const GeodesicField& field, const std::filesystem::path& path) {
  io::writeFile(path, encodeGeodesicField(field));
}

GeodesicField loadGeodesicField(const std::filesystem::path& path) {
  return decodeGeodesicField(io::readFile(path));
}

}  // namespace geoconv
