// Copyright 2026 The PartGen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "partgen/mesh.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <string>

#include "partgen/error.hpp"
#include "partgen/rng.hpp"

namespace partgen {

double TriMesh::area() const {
  double a = 0.0;
  for (const auto& f : faces) {
    a += 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
  }
  return a;
}

namespace {

struct Face {
  Cell cell;
  int axis;
  int sign;  // +1 or -1
};

struct UnionFind {
  std::vector<uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  uint32_t find(uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(uint32_t a, uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

int dir_slot(int axis, int sign) { return axis * 2 + (sign > 0 ? 1 : 0); }

Cell offset(Cell c, int axis, int delta) {
  if (axis == 0) c.x += delta;
  if (axis == 1) c.y += delta;
  if (axis == 2) c.z += delta;
  return c;
}

int coord(const Cell& c, int axis) { return axis == 0 ? c.x : (axis == 1 ? c.y : c.z); }

// Lattice points of a face's corners, counter-clockwise seen from outside.
std::array<Cell, 4> face_corners(const Face& f) {
  const int u = (f.axis + 1) % 3;
  const int v = (f.axis + 2) % 3;
  Cell base = f.cell;
  if (f.sign > 0) base = offset(base, f.axis, 1);
  std::array<Cell, 4> corners = {base, offset(base, u, 1), offset(offset(base, u, 1), v, 1),
                                 offset(base, v, 1)};
  if (f.sign < 0) std::swap(corners[1], corners[3]);
  return corners;
}

}  // namespace

TriMesh grid_to_cubes(const VoxelGrid& grid, const Aabb& frame) {
  TriMesh mesh;
  const int n = grid.n();
  if (n == 0) return mesh;

  std::vector<Face> faces;
  std::vector<int32_t> face_of(grid.size() * 6, -1);
  for (std::size_t li : grid.occupied()) {
    const Cell c = grid.cell(li);
    for (int axis = 0; axis < 3; ++axis) {
      for (int sign : {-1, 1}) {
        const Cell nb = offset(c, axis, sign);
        if (grid.get_or_empty(nb.x, nb.y, nb.z)) continue;
        face_of[li * 6 + dir_slot(axis, sign)] = static_cast<int32_t>(faces.size());
        faces.push_back({c, axis, sign});
      }
    }
  }
  if (faces.empty()) return mesh;

  auto occupied = [&](const Cell& c) { return grid.get_or_empty(c.x, c.y, c.z); };
  auto face_index = [&](const Cell& c, int axis, int sign) {
    return face_of[grid.linear(c.x, c.y, c.z) * 6 + dir_slot(axis, sign)];
  };

  UnionFind uf(faces.size() * 4);
  for (std::size_t fi = 0; fi < faces.size(); ++fi) {
    const Face& f = faces[fi];
    const auto corners = face_corners(f);
    for (int k = 0; k < 4; ++k) {
      const Cell& p = corners[k];
      const Cell& q = corners[(k + 1) % 4];
      // The edge runs along `e`; `w` is the remaining in-plane axis and `t`
      // points from the face interior toward the edge.
      int e = 0;
      while (coord(p, e) == coord(q, e)) ++e;
      const int w = 3 - f.axis - e;
      const int t = (coord(p, w) > coord(f.cell, w)) ? 1 : -1;
      const Cell side = offset(f.cell, w, t);
      const Cell diag = offset(side, f.axis, f.sign);
      int32_t partner;
      if (occupied(side)) {
        partner = occupied(diag) ? face_index(diag, w, -t) : face_index(side, f.axis, f.sign);
      } else {
        partner = face_index(f.cell, w, t);
      }
      const auto pc = face_corners(faces[partner]);
      for (int end = 0; end < 2; ++end) {
        const int own = (k + end) % 4;
        const int j = static_cast<int>(std::find(pc.begin(), pc.end(), corners[own]) - pc.begin());
        uf.unite(static_cast<uint32_t>(fi * 4 + own), static_cast<uint32_t>(partner * 4 + j));
      }
    }
  }

  std::vector<int64_t> vertex_of(faces.size() * 4, -1);
  const Vec3 e = frame.extent();
  auto lattice_to_frame = [&](const Cell& c) {
    return Vec3{frame.min.x + e.x * c.x / n, frame.min.y + e.y * c.y / n, frame.min.z + e.z * c.z / n};
  };
  std::array<uint32_t, 4> ids{};
  for (std::size_t fi = 0; fi < faces.size(); ++fi) {
    const auto corners = face_corners(faces[fi]);
    for (int k = 0; k < 4; ++k) {
      const uint32_t root = uf.find(static_cast<uint32_t>(fi * 4 + k));
      if (vertex_of[root] < 0) {
        vertex_of[root] = static_cast<int64_t>(mesh.vertices.size());
        mesh.vertices.push_back(lattice_to_frame(corners[k]));
      }
      ids[k] = static_cast<uint32_t>(vertex_of[root]);
    }
    const std::size_t owner = grid.linear(faces[fi].cell.x, faces[fi].cell.y, faces[fi].cell.z);
    mesh.faces.push_back({ids[0], ids[1], ids[2]});
    mesh.faces.push_back({ids[0], ids[2], ids[3]});
    mesh.face_cell.push_back(owner);
    mesh.face_cell.push_back(owner);
  }
  return mesh;
}

PointCloud sample_surface(const TriMesh& mesh, std::size_t count, uint64_t seed) {
  PointCloud cloud;
  if (count == 0) return cloud;
  if (mesh.empty()) throw Error(ErrorCode::kEmptyInput, "sample_surface: empty mesh");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    total += 0.5 * (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                       .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]])
                       .norm();
    cumulative[i] = total;
  }
  if (total <= 0.0) throw Error(ErrorCode::kDegenerate, "sample_surface: zero-area mesh");
  Rng rng(seed);
  cloud.points.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const double pick = rng.uniform() * total;
    std::size_t fi = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
    fi = std::min(fi, mesh.faces.size() - 1);
    const auto& f = mesh.faces[fi];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    cloud.points.push_back(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
  }
  return cloud;
}

PointCloud sample_occupied(const VoxelGrid& grid, const Aabb& frame, std::size_t count, uint64_t seed) {
  if (count == 0) return {};
  if (grid.empty()) throw Error(ErrorCode::kEmptyInput, "sample_occupied: empty grid");
  return sample_surface(grid_to_cubes(grid, frame), count, seed);
}

std::vector<uint8_t> encode_ply(const TriMesh& mesh, std::span<const Rgb8> vertex_colors) {
  const bool colored = !vertex_colors.empty();
  if (colored && vertex_colors.size() != mesh.vertices.size()) {
    throw Error(ErrorCode::kInvalidArgument, "encode_ply: color count does not match vertices");
  }
  std::string header = "ply\nformat binary_little_endian 1.0\n";
  header += "element vertex " + std::to_string(mesh.vertices.size()) + "\n";
  header += "property float x\nproperty float y\nproperty float z\n";
  if (colored) header += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  header += "element face " + std::to_string(mesh.faces.size()) + "\n";
  header += "property list uchar int vertex_indices\nend_header\n";

  std::vector<uint8_t> out(header.begin(), header.end());
  auto put_f32 = [&](float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    append_u32(out, bits);
  };
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    put_f32(static_cast<float>(v.x));
    put_f32(static_cast<float>(v.y));
    put_f32(static_cast<float>(v.z));
    if (colored) {
      out.push_back(vertex_colors[i].r);
      out.push_back(vertex_colors[i].g);
      out.push_back(vertex_colors[i].b);
    }
  }
  for (const auto& f : mesh.faces) {
    out.push_back(3);
    for (uint32_t idx : f) append_u32(out, idx);
  }
  return out;
}

void write_ply(const std::filesystem::path& path, const TriMesh& mesh, std::span<const Rgb8> vertex_colors) {
  write_file(path, encode_ply(mesh, vertex_colors));
}

}  // namespace partgen
