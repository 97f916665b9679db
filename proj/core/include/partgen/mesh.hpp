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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "partgen/geometry.hpp"
#include "partgen/voxel.hpp"

namespace partgen {

struct Rgb8 {
  uint8_t r = 0;
  uint8_t g = 0;
  uint8_t b = 0;
  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<uint32_t, 3>> faces;
  /// For meshes built from voxel grids: linear index of the cell that owns
  /// each triangle. Empty otherwise.
  std::vector<std::size_t> face_cell;

  bool empty() const { return faces.empty(); }
  double area() const;
};

/// Exposed cell faces of the occupied voxels, two triangles per face, wound
/// outward. Vertices are shared along paired edges; where two cells touch
/// only along an edge the vertices are split so every edge keeps exactly two
/// incident triangles.
TriMesh grid_to_cubes(const VoxelGrid& grid, const Aabb& frame);

struct PointCloud {
  std::vector<Vec3> points;
  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Area-weighted uniform samples; deterministic for a given seed.
PointCloud sample_surface(const TriMesh& mesh, std::size_t count, uint64_t seed);

/// Uniform samples over the exposed faces of the occupied cells.
PointCloud sample_occupied(const VoxelGrid& grid, const Aabb& frame, std::size_t count, uint64_t seed);

/// Binary little-endian PLY. `vertex_colors`, when given, must match the
/// vertex count.
std::vector<uint8_t> encode_ply(const TriMesh& mesh, std::span<const Rgb8> vertex_colors = {});
void write_ply(const std::filesystem::path& path, const TriMesh& mesh,
               std::span<const Rgb8> vertex_colors = {});

}  // namespace partgen
