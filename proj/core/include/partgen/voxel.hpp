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
#include <span>
#include <vector>

#include "partgen/geometry.hpp"
#include "partgen/solid.hpp"

namespace partgen {

/// Integer cell coordinate inside an n^3 grid.
struct Cell {
  int x = 0;
  int y = 0;
  int z = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// n^3 binary occupancy, bit-packed. Linear index is x + n*y + n*n*z; this
/// layout is also the on-disk order of the PVOX format and must not change.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  explicit VoxelGrid(int n);

  int n() const { return n_; }
  std::size_t size() const { return static_cast<std::size_t>(n_) * n_ * n_; }

  std::size_t linear(int x, int y, int z) const {
    return static_cast<std::size_t>(x) + static_cast<std::size_t>(n_) * y +
           static_cast<std::size_t>(n_) * n_ * z;
  }
  Cell cell(std::size_t linear_index) const;
  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < n_ && y < n_ && z < n_;
  }

  bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  bool get(int x, int y, int z) const { return get(linear(x, y, z)); }
  /// Out-of-bounds reads are empty.
  bool get_or_empty(int x, int y, int z) const { return in_bounds(x, y, z) && get(x, y, z); }
  void set(std::size_t i, bool v = true);
  void set(int x, int y, int z, bool v = true) { set(linear(x, y, z), v); }
  void fill(bool v);

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  /// Occupied linear indices in ascending order.
  std::vector<std::size_t> occupied() const;

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  int n_ = 0;
  std::vector<uint64_t> words_;
};

/// Center of `cell` in the frame's coordinates.
Vec3 cell_center(const Aabb& frame, int n, const Cell& c);

/// A bit is set iff its cell center lies inside the solid.
VoxelGrid voxelize(const Solid& solid, const Aabb& frame, int n);

/// Intersection-over-union of two same-resolution grids (1 when both empty).
double grid_iou(const VoxelGrid& a, const VoxelGrid& b);

// PVOX: "PVOX", u32 LE version (1), u32 LE n, ceil(n^3/8) bytes, LSB-first.
inline constexpr uint32_t kPvoxVersion = 1;
std::vector<uint8_t> encode_pvox(const VoxelGrid& grid);
VoxelGrid decode_pvox(std::span<const uint8_t> bytes);
void write_pvox(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_pvox(const std::filesystem::path& path);

// Small binary helpers shared by the file formats.
void append_u32(std::vector<uint8_t>& out, uint32_t v);
uint32_t read_u32(std::span<const uint8_t> bytes, std::size_t offset);
std::vector<uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes);

}  // namespace partgen
