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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "partgen/error.hpp"
#include "partgen/geometry.hpp"
#include "partgen/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace partgen {
namespace {

using testing_util::voxel_iou;

TEST(Geometry, IouMatchesVoxelCountingOracle) {
  Rng rng(2024);
  for (int i = 0; i < 200; ++i) {
    const Aabb a = testing_util::random_box(rng, -1.0, 1.0, 0.1);
    Aabb b = testing_util::random_box(rng, -1.0, 1.0, 0.1);
    if (i % 2 == 0) {
      // Force overlap for half of the pairs so the comparison is not vacuous.
      const Vec3 shift = (a.center() - b.center()) * rng.uniform(0.3, 1.0);
      b = Aabb(b.min + shift, b.max + shift);
    }
    EXPECT_NEAR(iou(a, b), voxel_iou(a, b, 64), 0.02) << "pair " << i;
  }
}

TEST(Geometry, IouWorkedValue) {
  const Aabb a({0, 0, 0}, {1, 1, 1});
  const Aabb b({0.5, 0, 0}, {1.5, 1, 1});
  EXPECT_EQ(iou(a, b), 1.0 / 3.0);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, Aabb({2, 2, 2}, {3, 3, 3})), 0.0);
  // Touching faces share no volume.
  EXPECT_EQ(iou(a, Aabb({1, 0, 0}, {2, 1, 1})), 0.0);
}

TEST(Geometry, IouIsSymmetricAndBounded) {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const Aabb a = testing_util::random_box(rng, -1.0, 1.0, 0.01);
    const Aabb b = testing_util::random_box(rng, -1.0, 1.0, 0.01);
    const double v = iou(a, b);
    EXPECT_NEAR(v, iou(b, a), 1e-12);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Geometry, NmsLeavesNoOverlappingSurvivors) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Aabb> boxes;
    const Aabb seed_box = testing_util::random_box(rng, -0.8, 0.8, 0.2);
    for (int i = 0; i < 40; ++i) {
      if (i % 3 == 0) {
        const double j = rng.uniform(-0.05, 0.05);
        boxes.emplace_back(seed_box.min + Vec3{j, j, j}, seed_box.max + Vec3{j, -j, j});
      } else {
        boxes.push_back(testing_util::random_box(rng, -1.0, 1.0, 0.05));
      }
    }
    const auto keep = nms_indices(boxes, 0.7);
    ASSERT_FALSE(keep.empty());
    EXPECT_TRUE(std::is_sorted(keep.begin(), keep.end()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      for (std::size_t j = i + 1; j < keep.size(); ++j) EXPECT_LE(iou(boxes[keep[i]], boxes[keep[j]]), 0.7);
    }
    // Every suppressed box overlaps a kept box at least as large.
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (std::find(keep.begin(), keep.end(), i) != keep.end()) continue;
      bool covered = false;
      for (std::size_t k : keep) {
        covered |= iou(boxes[i], boxes[k]) > 0.7 && boxes[k].volume() >= boxes[i].volume();
      }
      EXPECT_TRUE(covered) << "box " << i;
    }
  }
}

TEST(Geometry, NmsTieBreaksByIndex) {
  const Aabb a({0, 0, 0}, {1, 1, 1});
  const std::vector<Aabb> boxes = {a, a, Aabb({3, 3, 3}, {4, 4, 4})};
  EXPECT_EQ(nms_indices(boxes, 0.7), (std::vector<std::size_t>{0, 2}));
}

TEST(Geometry, CanonicalRoundTrip) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Aabb box = testing_util::random_box(rng, -1.0, 1.0, 0.05);
    const Vec3 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Vec3 q = to_global(box, to_canonical(box, p));
    EXPECT_NEAR(q.x, p.x, 1e-12);
    EXPECT_NEAR(q.y, p.y, 1e-12);
    EXPECT_NEAR(q.z, p.z, 1e-12);
  }
  const Aabb box({0, 1, 2}, {2, 3, 6});
  const Vec3 lo = to_canonical(box, box.min);
  const Vec3 hi = to_canonical(box, box.max);
  EXPECT_EQ(lo, Vec3(-1, -1, -1));
  EXPECT_EQ(hi, Vec3(1, 1, 1));
}

TEST(Geometry, CuboidMeshMatchesBox) {
  const Aabb box({-0.5, 0.1, 0.2}, {0.3, 0.9, 0.4});
  const CuboidMesh mesh = box_to_cuboid_mesh(box);
  EXPECT_EQ(aabb_of_mesh(mesh), box);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(mesh.vertices[i].x, (i & 1) ? box.max.x : box.min.x);
    EXPECT_EQ(mesh.vertices[i].y, (i & 2) ? box.max.y : box.min.y);
    EXPECT_EQ(mesh.vertices[i].z, (i & 4) ? box.max.z : box.min.z);
  }
  EXPECT_NEAR(hexahedron_volume(mesh.vertices), box.volume(), 1e-12);
  // Outward winding: every face normal points away from the center.
  for (const auto& f : cuboid_faces()) {
    const Vec3 n = (mesh.vertices[f[1]] - mesh.vertices[f[0]]).cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    EXPECT_GT(n.dot(mesh.vertices[f[0]] - box.center()), 0.0);
  }
}

TEST(Geometry, HexahedronValidity) {
  const Aabb box({-0.5, -0.2, 0.0}, {0.5, 0.6, 0.3});
  Hexahedron hex = box_to_cuboid_mesh(box).vertices;
  EXPECT_NEAR(hexahedron_aabb_iou(hex, 32), 1.0, 1e-12);
  EXPECT_TRUE(point_in_hexahedron(hex, box.center()));
  EXPECT_FALSE(point_in_hexahedron(hex, box.max + Vec3{0.1, 0, 0}));
  // Collapse the top face toward the center: a frustum fills about 7/12 of
  // its bounding box... minus the discretization.
  for (int i = 0; i < 8; ++i) {
    if (i & 2) {
      hex[i].x = 0.5 * hex[i].x;
      hex[i].z = 0.15 + 0.5 * (hex[i].z - 0.15);
    }
  }
  const double v = hexahedron_aabb_iou(hex, 64);
  EXPECT_NEAR(v, 7.0 / 12.0, 0.03);
  EXPECT_NEAR(hexahedron_volume(hex), box.volume() * 7.0 / 12.0, 1e-9);
}

TEST(Geometry, RejectsBadInput) {
  EXPECT_THROW(Vec3(std::numeric_limits<double>::quiet_NaN(), 0, 0), Error);
  EXPECT_THROW(Aabb({1, 0, 0}, {0, 1, 1}), Error);
  EXPECT_THROW(require_valid(Aabb({0, 0, 0}, {1, 0, 1}), "flat"), Error);
  EXPECT_THROW(aabb_of_points({}), Error);
}

}  // namespace
}  // namespace partgen
