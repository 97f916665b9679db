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

#include "partgen/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "partgen/error.hpp"

namespace partgen {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kNotApplicable: return "not_applicable";
    case ErrorCode::kEmptyLayout: return "empty_layout";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

Vec3::Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
    throw Error(ErrorCode::kInvalidArgument, "Vec3 components must be finite");
  }
}

Vec3 min(const Vec3& a, const Vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}

Vec3 max(const Vec3& a, const Vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

Aabb::Aabb(const Vec3& lo, const Vec3& hi) : min(lo), max(hi) {
  if (lo.x > hi.x || lo.y > hi.y || lo.z > hi.z) {
    throw Error(ErrorCode::kInvalidArgument, "Aabb requires min <= max componentwise");
  }
}

double Aabb::volume() const {
  const Vec3 e = extent();
  return e.x * e.y * e.z;
}

bool Aabb::is_valid() const { return max.x > min.x && max.y > min.y && max.z > min.z; }

bool Aabb::contains(const Vec3& p) const {
  return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
         p.z <= max.z;
}

void require_valid(const Aabb& box, const char* what) {
  if (!box.is_valid()) {
    throw Error(ErrorCode::kDegenerate, std::string(what) + ": box has a zero-extent axis");
  }
}

const std::array<std::array<int, 3>, 12>& cuboid_faces() {
  static const std::array<std::array<int, 3>, 12> faces = {{
      {0, 4, 6}, {0, 6, 2},  // -x
      {1, 3, 7}, {1, 7, 5},  // +x
      {0, 1, 5}, {0, 5, 4},  // -y
      {2, 6, 7}, {2, 7, 3},  // +y
      {0, 2, 3}, {0, 3, 1},  // -z
      {4, 5, 7}, {4, 7, 6},  // +z
  }};
  return faces;
}

CuboidMesh box_to_cuboid_mesh(const Aabb& box) {
  require_valid(box, "box_to_cuboid_mesh");
  CuboidMesh mesh;
  for (int i = 0; i < 8; ++i) {
    mesh.vertices[i] = {(i & 1) ? box.max.x : box.min.x, (i & 2) ? box.max.y : box.min.y,
                        (i & 4) ? box.max.z : box.min.z};
  }
  mesh.faces = cuboid_faces();
  return mesh;
}

Aabb aabb_of_points(std::span<const Vec3> points) {
  if (points.empty()) throw Error(ErrorCode::kEmptyInput, "aabb_of_points: no vertices");
  Vec3 lo = points.front();
  Vec3 hi = points.front();
  for (const Vec3& p : points.subspan(1)) {
    lo = min(lo, p);
    hi = max(hi, p);
  }
  return {lo, hi};
}

Aabb aabb_of_mesh(const CuboidMesh& mesh) { return aabb_of_points(mesh.vertices); }

double intersection_volume(const Aabb& a, const Aabb& b) {
  double v = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    const double lo = std::max(a.min[axis], b.min[axis]);
    const double hi = std::min(a.max[axis], b.max[axis]);
    if (hi <= lo) return 0.0;
    v *= hi - lo;
  }
  return v;
}

double iou(const Aabb& a, const Aabb& b) {
  const double inter = intersection_volume(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.volume() + b.volume() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<std::size_t> nms_indices(std::span<const Aabb> boxes, double iou_threshold) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].volume() > boxes[b].volume();
  });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return iou(boxes[idx], boxes[k]) > iou_threshold;
    });
    if (!suppressed) kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::vector<Aabb> nms(std::span<const Aabb> boxes, double iou_threshold) {
  std::vector<Aabb> out;
  for (std::size_t i : nms_indices(boxes, iou_threshold)) out.push_back(boxes[i]);
  return out;
}

Vec3 to_canonical(const Aabb& box, const Vec3& p_global) {
  require_valid(box, "to_canonical");
  Vec3 c;
  for (int axis = 0; axis < 3; ++axis) {
    c[axis] = 2.0 * (p_global[axis] - box.min[axis]) / (box.max[axis] - box.min[axis]) - 1.0;
  }
  return c;
}

Vec3 to_global(const Aabb& box, const Vec3& p_canonical) {
  require_valid(box, "to_global");
  Vec3 g;
  for (int axis = 0; axis < 3; ++axis) {
    g[axis] = box.min[axis] + (p_canonical[axis] + 1.0) * 0.5 * (box.max[axis] - box.min[axis]);
  }
  return g;
}

namespace {

// Kuhn split of the cube along the 0-7 diagonal.
constexpr std::array<std::array<int, 4>, 6> kHexTets = {{
    {0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7}, {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7},
}};

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}

bool point_in_tet(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& p) {
  const double v = signed_tet_volume(a, b, c, d);
  if (std::abs(v) < 1e-15) return false;
  const double tol = -1e-12 * std::abs(v);
  const double s0 = signed_tet_volume(p, b, c, d) / v;
  const double s1 = signed_tet_volume(a, p, c, d) / v;
  const double s2 = signed_tet_volume(a, b, p, d) / v;
  const double s3 = signed_tet_volume(a, b, c, p) / v;
  return s0 >= tol && s1 >= tol && s2 >= tol && s3 >= tol;
}

}  // namespace

double hexahedron_volume(const Hexahedron& hex) {
  double v = 0.0;
  for (const auto& t : kHexTets) {
    v += std::abs(signed_tet_volume(hex[t[0]], hex[t[1]], hex[t[2]], hex[t[3]]));
  }
  return v;
}

bool point_in_hexahedron(const Hexahedron& hex, const Vec3& p) {
  for (const auto& t : kHexTets) {
    if (point_in_tet(hex[t[0]], hex[t[1]], hex[t[2]], hex[t[3]], p)) return true;
  }
  return false;
}

double hexahedron_aabb_iou(const Hexahedron& hex, int res) {
  const Aabb box = aabb_of_points(hex);
  if (!box.is_valid() || res <= 0) return 0.0;
  const Vec3 e = box.extent();
  std::size_t inside = 0;
  for (int k = 0; k < res; ++k) {
    for (int j = 0; j < res; ++j) {
      for (int i = 0; i < res; ++i) {
        const Vec3 p{box.min.x + (i + 0.5) * e.x / res, box.min.y + (j + 0.5) * e.y / res,
                     box.min.z + (k + 0.5) * e.z / res};
        if (point_in_hexahedron(hex, p)) ++inside;
      }
    }
  }
  return static_cast<double>(inside) / (static_cast<double>(res) * res * res);
}

}  // namespace partgen
