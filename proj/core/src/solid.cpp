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

#include "partgen/solid.hpp"

#include <cmath>
#include <numbers>

namespace partgen {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

constexpr double kPi = std::numbers::pi;

// Axes following `axis` in cyclic order.
int next_axis(int axis, int k) { return (axis + k) % 3; }

}  // namespace

bool contains(const Primitive& prim, const Vec3& p) {
  return std::visit(
      Overloaded{
          [&](const BoxSolid& s) { return s.box.contains(p); },
          [&](const SphereSolid& s) { return (p - s.center).squared_norm() <= s.radius * s.radius; },
          [&](const CylinderSolid& s) {
            const Vec3 d = p - s.center;
            const double along = d[s.axis];
            const double a = d[next_axis(s.axis, 1)];
            const double b = d[next_axis(s.axis, 2)];
            return std::abs(along) <= s.half_length && a * a + b * b <= s.radius * s.radius;
          },
          [&](const HalfSpaceSolid& s) {
            return s.positive ? p[s.axis] >= s.offset : p[s.axis] <= s.offset;
          },
      },
      prim);
}

std::optional<Aabb> bounds(const Primitive& prim) {
  return std::visit(
      Overloaded{
          [](const BoxSolid& s) -> std::optional<Aabb> { return s.box; },
          [](const SphereSolid& s) -> std::optional<Aabb> {
            const Vec3 r{s.radius, s.radius, s.radius};
            return Aabb{s.center - r, s.center + r};
          },
          [](const CylinderSolid& s) -> std::optional<Aabb> {
            Vec3 h{s.radius, s.radius, s.radius};
            h[s.axis] = s.half_length;
            return Aabb{s.center - h, s.center + h};
          },
          [](const HalfSpaceSolid&) -> std::optional<Aabb> { return std::nullopt; },
      },
      prim);
}

double surface_area(const Primitive& prim) {
  return std::visit(
      Overloaded{
          [](const BoxSolid& s) {
            const Vec3 e = s.box.extent();
            return 2.0 * (e.x * e.y + e.y * e.z + e.x * e.z);
          },
          [](const SphereSolid& s) { return 4.0 * kPi * s.radius * s.radius; },
          [](const CylinderSolid& s) {
            return 2.0 * kPi * s.radius * s.radius + 2.0 * kPi * s.radius * 2.0 * s.half_length;
          },
          [](const HalfSpaceSolid&) { return 0.0; },
      },
      prim);
}

Vec3 sample_surface_point(const Primitive& prim, Rng& rng) {
  return std::visit(
      Overloaded{
          [&](const BoxSolid& s) {
            const Vec3 e = s.box.extent();
            const double areas[3] = {e.y * e.z, e.x * e.z, e.x * e.y};
            const double total = areas[0] + areas[1] + areas[2];
            double pick = rng.uniform() * total;
            int axis = 0;
            while (axis < 2 && pick >= areas[axis]) pick -= areas[axis++];
            Vec3 p{s.box.min.x + rng.uniform() * e.x, s.box.min.y + rng.uniform() * e.y,
                   s.box.min.z + rng.uniform() * e.z};
            p[axis] = rng.bernoulli(0.5) ? s.box.max[axis] : s.box.min[axis];
            return p;
          },
          [&](const SphereSolid& s) {
            Vec3 d{rng.normal(), rng.normal(), rng.normal()};
            while (d.squared_norm() < 1e-24) d = {rng.normal(), rng.normal(), rng.normal()};
            return s.center + d * (s.radius / d.norm());
          },
          [&](const CylinderSolid& s) {
            const double cap = kPi * s.radius * s.radius;
            const double side = 2.0 * kPi * s.radius * 2.0 * s.half_length;
            const double u = rng.uniform() * (2.0 * cap + side);
            Vec3 p = s.center;
            const int a = next_axis(s.axis, 1);
            const int b = next_axis(s.axis, 2);
            if (u < 2.0 * cap) {
              const double r = s.radius * std::sqrt(rng.uniform());
              const double th = 2.0 * kPi * rng.uniform();
              p[a] += r * std::cos(th);
              p[b] += r * std::sin(th);
              p[s.axis] += (u < cap) ? -s.half_length : s.half_length;
            } else {
              const double th = 2.0 * kPi * rng.uniform();
              p[a] += s.radius * std::cos(th);
              p[b] += s.radius * std::sin(th);
              p[s.axis] += (2.0 * rng.uniform() - 1.0) * s.half_length;
            }
            return p;
          },
          [&](const HalfSpaceSolid&) -> Vec3 {
            return {};
          },
      },
      prim);
}

bool projection_covers(const Primitive& prim, int view_axis, double a, double b) {
  const int ia = next_axis(view_axis, 1);
  const int ib = next_axis(view_axis, 2);
  return std::visit(
      Overloaded{
          [&](const BoxSolid& s) {
            return a >= s.box.min[ia] && a <= s.box.max[ia] && b >= s.box.min[ib] &&
                   b <= s.box.max[ib];
          },
          [&](const SphereSolid& s) {
            const double da = a - s.center[ia];
            const double db = b - s.center[ib];
            return da * da + db * db <= s.radius * s.radius;
          },
          [&](const CylinderSolid& s) {
            const double da = a - s.center[ia];
            const double db = b - s.center[ib];
            if (s.axis == view_axis) return da * da + db * db <= s.radius * s.radius;
            // Side view: a rectangle, long along the cylinder axis.
            const double half_a = (s.axis == ia) ? s.half_length : s.radius;
            const double half_b = (s.axis == ib) ? s.half_length : s.radius;
            return std::abs(da) <= half_a && std::abs(db) <= half_b;
          },
          [&](const HalfSpaceSolid& s) {
            if (s.axis == view_axis) return true;
            const double v = (s.axis == ia) ? a : b;
            return s.positive ? v >= s.offset : v <= s.offset;
          },
      },
      prim);
}

bool Solid::contains(const Vec3& p) const {
  for (const auto& prim : parts) {
    if (partgen::contains(prim, p)) return true;
  }
  return false;
}

std::optional<Aabb> Solid::bounds() const {
  std::optional<Aabb> out;
  for (const auto& prim : parts) {
    auto b = partgen::bounds(prim);
    if (!b) return std::nullopt;
    out = out ? Aabb{min(out->min, b->min), max(out->max, b->max)} : *b;
  }
  return out;
}

}  // namespace partgen
