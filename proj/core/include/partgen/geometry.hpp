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
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace partgen {

/// A point or direction in normalized object space. Components are always
/// finite; the constructor throws otherwise.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  Vec3(double x_, double y_, double z_);

  double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(double s, const Vec3& a) { return a * s; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const { return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x}; }
  double norm() const { return std::sqrt(dot(*this)); }
  double squared_norm() const { return dot(*this); }
};

Vec3 min(const Vec3& a, const Vec3& b);
Vec3 max(const Vec3& a, const Vec3& b);

/// Axis-aligned box. min <= max holds for every constructed box; a box used
/// as a part layout slot additionally needs strictly positive extents.
struct Aabb {
  Vec3 min;
  Vec3 max;

  Aabb() = default;
  Aabb(const Vec3& lo, const Vec3& hi);

  static Aabb unit() { return {{-1, -1, -1}, {1, 1, 1}}; }

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return (min + max) * 0.5; }
  double volume() const;
  bool is_valid() const;
  bool contains(const Vec3& p) const;

  friend bool operator==(const Aabb&, const Aabb&) = default;
};

/// Throws Error(kDegenerate) unless every extent is strictly positive.
void require_valid(const Aabb& box, const char* what);

struct CuboidMesh {
  /// Corner i has bit0 -> max x, bit1 -> max y, bit2 -> max z.
  std::array<Vec3, 8> vertices;
  std::array<std::array<int, 3>, 12> faces;
};

/// Outward-wound triangle list over the binary corner indexing above.
const std::array<std::array<int, 3>, 12>& cuboid_faces();

CuboidMesh box_to_cuboid_mesh(const Aabb& box);
Aabb aabb_of_points(std::span<const Vec3> points);
Aabb aabb_of_mesh(const CuboidMesh& mesh);

double intersection_volume(const Aabb& a, const Aabb& b);
double iou(const Aabb& a, const Aabb& b);

/// Greedy suppression, largest volume first (ties by index). Returns the
/// indices of survivors in ascending (original) order.
std::vector<std::size_t> nms_indices(std::span<const Aabb> boxes, double iou_threshold = 0.7);
std::vector<Aabb> nms(std::span<const Aabb> boxes, double iou_threshold = 0.7);

/// Per-axis affine map from `box` onto [-1,1]^3 and back.
Vec3 to_canonical(const Aabb& box, const Vec3& p_global);
Vec3 to_global(const Aabb& box, const Vec3& p_canonical);

/// Eight vertices in the cuboid corner order; faces may be non-planar.
using Hexahedron = std::array<Vec3, 8>;

/// Signed volume via the six-tetrahedron split around the 0-7 diagonal.
double hexahedron_volume(const Hexahedron& hex);
bool point_in_hexahedron(const Hexahedron& hex, const Vec3& p);

/// Fraction of a res^3 cell-center lattice over the hexahedron's own AABB
/// that lies inside the hexahedron. Because the hexahedron is contained in
/// its AABB this is the volumetric IoU of the two. Zero for a flat AABB.
double hexahedron_aabb_iou(const Hexahedron& hex, int res = 64);

}  // namespace partgen
