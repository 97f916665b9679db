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

#include <optional>
#include <variant>
#include <vector>

#include "partgen/geometry.hpp"
#include "partgen/rng.hpp"

namespace partgen {

struct BoxSolid {
  Aabb box;
};

struct SphereSolid {
  Vec3 center;
  double radius = 0.0;
};

/// Axis-aligned right circular cylinder.
struct CylinderSolid {
  Vec3 center;
  int axis = 1;
  double radius = 0.0;
  double half_length = 0.0;
};

/// {p : p[axis] >= offset} (or <= when `positive` is false). Unbounded; only
/// useful as a voxelization test solid.
struct HalfSpaceSolid {
  int axis = 0;
  double offset = 0.0;
  bool positive = true;
};

using Primitive = std::variant<BoxSolid, SphereSolid, CylinderSolid, HalfSpaceSolid>;

bool contains(const Primitive& prim, const Vec3& p);

/// Tight bounds; nullopt for unbounded primitives.
std::optional<Aabb> bounds(const Primitive& prim);

double surface_area(const Primitive& prim);

/// Uniform sample on the primitive's boundary surface.
Vec3 sample_surface_point(const Primitive& prim, Rng& rng);

/// True when the orthographic projection of `prim` along `view_axis` covers
/// the point whose remaining two coordinates are (a, b), with a/b taken in
/// cyclic axis order after view_axis.
bool projection_covers(const Primitive& prim, int view_axis, double a, double b);

/// Union of analytic primitives.
struct Solid {
  std::vector<Primitive> parts;

  Solid() = default;
  explicit Solid(Primitive p) : parts{std::move(p)} {}
  explicit Solid(std::vector<Primitive> ps) : parts(std::move(ps)) {}

  bool contains(const Vec3& p) const;
  std::optional<Aabb> bounds() const;
};

}  // namespace partgen
