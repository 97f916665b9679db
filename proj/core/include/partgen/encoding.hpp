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
#include <memory>
#include <span>
#include <vector>

#include "partgen/geometry.hpp"
#include "partgen/nn/tensor.hpp"
#include "partgen/voxel.hpp"

namespace partgen {

inline constexpr int kDefaultLattice = 2048;

/// Integer position on the r^3 global lattice.
struct QuantCoord {
  uint16_t ix = 0;
  uint16_t iy = 0;
  uint16_t iz = 0;
  friend bool operator==(const QuantCoord&, const QuantCoord&) = default;
};

/// Quantized center plus the eight cell corners (corner i: bit0 -> +x,
/// bit1 -> +y, bit2 -> +z).
struct CenterCornerKey {
  QuantCoord center;
  std::array<QuantCoord, 8> corners;

  friend bool operator==(const CenterCornerKey&, const CenterCornerKey&) = default;

  /// 27 values: center then corners 0..7, each as (x, y, z).
  std::array<uint16_t, 27> values() const;
  /// The 27 values as little-endian u16, for logging.
  std::array<uint8_t, 54> serialize() const;
};

/// clamp(floor((g + 1) / 2 * r), 0, r - 1).
uint16_t quantize(double g, int lattice = kDefaultLattice);
QuantCoord quantize(const Vec3& g, int lattice = kDefaultLattice);

/// Key of `cell` in an n^3 grid laid over `part_box`: canonical cell corners
/// and center mapped to global space through the box, then quantized.
CenterCornerKey cell_key(const Aabb& part_box, const Cell& cell, int n, int lattice = kDefaultLattice);

/// Per-axis position tables (lattice x width each) and a part-ID table
/// ((kmax + 1) x width). e_pos(q) = X[q.ix] + Y[q.iy] + Z[q.iz]; the same
/// e_pos serves the center and all eight corners.
template <class T>
class EmbeddingTable {
 public:
  EmbeddingTable(int lattice, int width, int kmax, uint64_t seed);

  int lattice() const { return lattice_; }
  int width() const { return width_; }
  int kmax() const { return kmax_; }

  /// e_pos(center) + sum_i e_pos(corner_i) + e_id(part_id).
  nn::Mat<T> embed(const CenterCornerKey& key, int part_id) const;
  nn::Mat<T> position(const QuantCoord& q) const;
  nn::Mat<T> id(int part_id) const;

  std::array<nn::Param<T>, 3> axis;
  nn::Param<T> ids;

 private:
  int lattice_;
  int width_;
  int kmax_;
};

/// Per-axis row indices (9 per key) for EmbeddingTable::axis lookups.
struct KeyIndices {
  std::array<std::shared_ptr<const std::vector<int32_t>>, 3> axis;
};
KeyIndices key_indices(std::span<const CenterCornerKey> keys);

}  // namespace partgen
