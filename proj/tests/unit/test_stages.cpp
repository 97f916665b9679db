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

#include "partgen/error.hpp"
#include "partgen/stages.hpp"
#include "partgen/synthdata.hpp"
#include "test_models.hpp"
#include "test_util.hpp"

namespace partgen {
namespace {

VoxelGrid random_grid(Rng& rng, int n, double p) {
  VoxelGrid g(n);
  for (std::size_t i = 0; i < g.size(); ++i) g.set(i, rng.bernoulli(p));
  return g;
}

TEST(Stages, PatchifyIsBijectiveOn500Grids) {
  Rng rng(500);
  const int sizes[][2] = {{16, 4}, {8, 2}, {12, 3}, {64, 16}, {4, 4}};
  for (int trial = 0; trial < 500; ++trial) {
    const int n = sizes[trial % 5][0];
    const int p = sizes[trial % 5][1];
    const VoxelGrid g = random_grid(rng, n, rng.uniform());
    const nn::Mat<float> t = occupancy_to_tokens(g, p);
    const int np = n / p;
    ASSERT_EQ(t.rows(), np * np * np);
    ASSERT_EQ(t.cols(), p * p * p);
    EXPECT_EQ(tokens_to_occupancy(t, n, p), g) << trial;
    if (trial % 25 != 0) continue;
    // Element oracle: row is the patch index, column the in-patch index.
    for (int z = 0; z < n; ++z) {
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const int row = x / p + np * (y / p) + np * np * (z / p);
          const int col = x % p + p * (y % p) + p * p * (z % p);
          ASSERT_EQ(t(row, col), g.get(x, y, z) ? 1.0f : -1.0f);
        }
      }
    }
  }
  EXPECT_THROW(occupancy_to_tokens(VoxelGrid(10), 4), Error);
}

TEST(Stages, TokensThresholdAtZero) {
  nn::Mat<float> t = nn::Mat<float>::Constant(1, 8, -0.5f);
  t(0, 3) = 0.01f;
  t(0, 5) = 0.0f;
  const VoxelGrid g = tokens_to_occupancy(t, 2, 2);
  EXPECT_EQ(g.count(), 1u);
  EXPECT_TRUE(g.get(1, 1, 0));
}

TEST(Stages, PatchKeysUsePatchLattice) {
  const Aabb box({-0.5, -0.2, 0.1}, {0.3, 0.6, 0.9});
  const auto keys = patch_keys(box, 16, 4);
  ASSERT_EQ(keys.size(), 64u);
  for (int i = 0; i < 64; ++i) {
    EXPECT_EQ(keys[i], cell_key(box, {i % 4, (i / 4) % 4, i / 16}, 4)) << i;
  }
}

TEST(Stages, AugmentStaysInsideAndNearOriginal) {
  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    const Aabb b = random_box(rng, 0.05);
    const Aabb a = augment_box(b, rng);
    ASSERT_TRUE(a.is_valid());
    for (int k = 0; k < 3; ++k) {
      EXPECT_GE(a.min[k], -1.0);
      EXPECT_LE(a.max[k], 1.0);
      EXPECT_LE(a.extent()[k], 1.1 * b.extent()[k] + 1e-12);
      EXPECT_LE(std::abs(a.center()[k] - b.center()[k]), 0.05 * b.extent()[k] + 0.55 * b.extent()[k]);
    }
  }
}

struct Recorded {
  int round;
  double t;
  nn::Mat<float> global_rows;
};

TEST(Stages, SequentialRoundsClampGlobalSlotExactly) {
  // 35 boxes with kmax 30: two rounds sharing the round-1 global latent.
  Models m = testing_util::tiny_models(21, 30);
  Rng rng(35);
  std::vector<PartRequest> parts;
  for (int i = 0; i < 35; ++i) parts.push_back({i + 1, random_box(rng, 0.1), std::nullopt});
  SamplerOptions sampler;
  sampler.steps = 3;
  std::vector<Recorded> seen;
  RoundObserver obs = [&](int round, const nn::Mat<float>& x, double t, std::span<const SlotRange> slots) {
    seen.push_back({round, t, x.middleRows(slots[0].begin, slots[0].end - slots[0].begin)});
    EXPECT_EQ(slots[0].slot_id, 0);
    EXPECT_LE(static_cast<int>(slots.size()), 31);
  };
  const Condition<float> cond{condition_patches(generate_sample(1, "robot").condition)};
  const CoarseResult r = generate_coarse(m.coarse.dit, m.coarse.opts, parts, std::nullopt, cond, 9, sampler, obs);
  EXPECT_EQ(r.latents.rounds, 2);
  ASSERT_EQ(r.parts.size(), 35u);
  const SlotLatent& g = r.latents.global;
  int round2 = 0;
  for (const Recorded& rec : seen) {
    if (rec.round != 2) continue;
    ++round2;
    const float a = static_cast<float>(1.0 - rec.t);
    const float b = static_cast<float>(rec.t);
    const nn::Mat<float> want = a * g.x0 + b * g.eps;
    EXPECT_EQ(rec.global_rows, want) << "t=" << rec.t;
  }
  EXPECT_EQ(round2, sampler.steps + 1);
  // Round 1 ends on the recorded global latent.
  for (const Recorded& rec : seen) {
    if (rec.round == 1 && rec.t == 0.0) EXPECT_EQ(rec.global_rows, g.x0);
  }
  // Part noise depends only on the seed and part id, not on the round.
  for (int id : {1, 30, 31, 35}) {
    Rng nr(derive_seed(9, static_cast<uint64_t>(id)));
    EXPECT_EQ(r.latents.parts[id - 1].eps, gaussian<float>(64, 64, nr)) << id;
  }
}

TEST(Stages, FrozenSlotIsHeldOnTheInterpolant) {
  Models m = testing_util::tiny_models(22);
  Rng rng(3);
  std::vector<PartRequest> parts = {{1, random_box(rng, 0.2), std::nullopt}, {2, random_box(rng, 0.2), std::nullopt}};
  SamplerOptions sampler;
  sampler.steps = 4;
  const Condition<float> cond = Condition<float>::make_null();
  const CoarseResult first = generate_coarse(m.coarse.dit, m.coarse.opts, parts, std::nullopt, cond, 1, sampler);
  parts[0].frozen = first.latents.parts[0];
  parts[1].box = random_box(rng, 0.2);
  std::vector<std::pair<double, nn::Mat<float>>> rows;
  RoundObserver obs = [&](int, const nn::Mat<float>& x, double t, std::span<const SlotRange> slots) {
    rows.emplace_back(t, x.middleRows(slots[1].begin, slots[1].end - slots[1].begin));
  };
  const CoarseResult second = generate_coarse(m.coarse.dit, m.coarse.opts, parts, first.latents.global, cond, 2,
                                              sampler, obs);
  const SlotLatent& f = first.latents.parts[0];
  ASSERT_EQ(rows.size(), 5u);
  for (const auto& [t, x] : rows) {
    EXPECT_EQ(x, static_cast<float>(1.0 - t) * f.x0 + static_cast<float>(t) * f.eps) << t;
  }
  EXPECT_EQ(second.latents.parts[0].x0, f.x0);
  EXPECT_EQ(second.parts[0].grid, first.parts[0].grid);
  EXPECT_EQ(second.latents.global.x0, first.latents.global.x0);

  parts[0].frozen->x0 = nn::Mat<float>::Zero(3, 3);
  EXPECT_THROW(generate_coarse(m.coarse.dit, m.coarse.opts, parts, std::nullopt, cond, 2, sampler), Error);
}

TEST(Stages, CoarseRejectsBadRequests) {
  Models m = testing_util::tiny_models(23);
  const Condition<float> cond = Condition<float>::make_null();
  SamplerOptions s;
  s.steps = 1;
  std::vector<PartRequest> dup = {{1, Aabb::unit(), std::nullopt}, {1, Aabb::unit(), std::nullopt}};
  EXPECT_THROW(generate_coarse(m.coarse.dit, m.coarse.opts, dup, std::nullopt, cond, 0, s), Error);
  std::vector<PartRequest> none;
  EXPECT_THROW(generate_coarse(m.coarse.dit, m.coarse.opts, none, std::nullopt, cond, 0, s), Error);
  CoarseOptions wrong;
  wrong.patch = 2;
  std::vector<PartRequest> one = {{1, Aabb::unit(), std::nullopt}};
  EXPECT_THROW(generate_coarse(m.coarse.dit, wrong, one, std::nullopt, cond, 0, s), Error);
}

TEST(Stages, CoarseItemMatchesGroundTruthVoxels) {
  const ObjectSample s = generate_sample(4, "chair");
  CoarseOptions o;
  const TrainItem<float> item = coarse_item(s, o, 30);
  ASSERT_EQ(item.x0.slots.size(), s.parts.size() + 1);
  for (std::size_t k = 0; k < s.parts.size(); ++k) {
    const SlotRange& r = item.x0.slots[k + 1];
    const VoxelGrid want = voxelize(Solid(s.parts[k].solid), s.parts[k].box, 16);
    EXPECT_EQ(tokens_to_occupancy(item.x0.tokens.middleRows(r.begin, r.end - r.begin), 16, 4), want);
    EXPECT_EQ(r.slot_id, static_cast<int>(k) + 1);
  }
  EXPECT_EQ(static_cast<int>(item.x0.keys.size()), item.x0.rows());
  EXPECT_FALSE(item.cond.null);
}

TEST(Stages, RefineTokenCellsRespectBudget) {
  RefineOptions o;
  o.budget = 10;
  VoxelGrid g(16);
  g.set(1, 2, 3);
  g.set(15, 0, 0);
  bool patched = true;
  EXPECT_EQ(refine_token_cells(g, o, &patched), (std::vector<Cell>{{15, 0, 0}, {1, 2, 3}}));
  EXPECT_FALSE(patched);
  for (int x = 0; x < 12; ++x) g.set(x, 0, 0);
  const std::vector<Cell> cells = refine_token_cells(g, o, &patched);
  EXPECT_TRUE(patched);
  EXPECT_EQ(cells, (std::vector<Cell>{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}}));
  g.set(1, 2, 4);
  EXPECT_EQ(refine_token_cells(g, o, &patched).back(), (Cell{0, 0, 1}));
}

TEST(Stages, ColorCodecRoundTrip) {
  for (float v = 0.05f; v <= 0.95f; v += 0.05f) {
    const auto f = encode_color({v, 0.5f, 0.95f - v + 0.05f});
    const auto back = decode_color(f.data());
    EXPECT_NEAR(back[0], v, 1e-5);
    EXPECT_NEAR(back[1], 0.5f, 1e-6);
  }
}

TEST(Stages, RefineKeepsOccupancyAndColorsEveryVoxel) {
  Models m = testing_util::tiny_models(24);
  const ObjectSample s = generate_sample(2, "table");
  std::vector<PartOccupancy> parts;
  for (const SynthPart& p : s.parts) parts.push_back({p.part_id, p.box, voxelize(Solid(p.solid), p.box, 16)});
  SamplerOptions sampler;
  sampler.steps = 2;
  const RefineResult r = refine(m.refine.dit, m.refine.opts, parts, Condition<float>::make_null(), 5, sampler);
  ASSERT_EQ(r.parts.size(), parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    EXPECT_EQ(r.parts[k].positions.size(), parts[k].grid.count());
    EXPECT_EQ(r.parts[k].colors.size(), parts[k].grid.count());
    for (const auto& c : r.parts[k].colors) {
      for (float v : c) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
      }
    }
  }
  const RefineResult again = refine(m.refine.dit, m.refine.opts, parts, Condition<float>::make_null(), 5, sampler);
  EXPECT_EQ(again.parts[0].colors, r.parts[0].colors);
}

TEST(Stages, UnionGridCoversPartCells) {
  VoxelGrid a(4);
  a.fill(true);
  const std::vector<PartOccupancy> parts = {{1, Aabb({-1, -1, -1}, {0, 0, 0}), a}};
  const VoxelGrid u = union_grid(parts, 4);
  EXPECT_EQ(u.count(), 8u);
  EXPECT_TRUE(u.get(0, 0, 0));
  EXPECT_TRUE(u.get(1, 1, 1));
  EXPECT_FALSE(u.get(2, 1, 1));
}

TEST(Stages, AssembleSkipsEmptyPartsAndPlacesMeshesInBoxes) {
  VoxelGrid full(2);
  full.fill(true);
  const Aabb box({0.2, 0.2, 0.2}, {0.6, 0.8, 0.4});
  const std::vector<PartOccupancy> parts = {{1, box, full}, {2, Aabb::unit(), VoxelGrid(2)}};
  const std::vector<PartMesh> meshes = assemble(parts);
  ASSERT_EQ(meshes.size(), 1u);
  EXPECT_EQ(aabb_of_points(meshes[0].mesh.vertices), box);
  const std::vector<PartOccupancy> empty = {{1, box, VoxelGrid(2)}};
  EXPECT_THROW(assemble(empty), Error);
  const std::vector<std::array<float, 3>> colors(8, {1.0f, 0.0f, 0.5f});
  const PartMesh pm = make_part_mesh(parts[0], colors);
  for (const Rgb8& c : pm.vertex_colors) EXPECT_EQ(c, (Rgb8{255, 0, 128}));
}

TEST(Stages, CheckpointRoundTrip) {
  Models m = testing_util::tiny_models(25);
  const auto dir = testing_util::temp_dir("ckpt");
  m.save(dir);
  Models back = Models::load(dir);
  TokenStream<float> s;
  s.tokens = nn::Mat<float>::Constant(64, 64, 0.2f);
  s.slots = {{0, 64, 0, true}};
  s.keys = patch_keys(Aabb::unit(), 16, 4);
  const Condition<float> c = Condition<float>::make_null();
  EXPECT_EQ(m.coarse.dit.velocity(s, 0.4, c), back.coarse.dit.velocity(s, 0.4, c));
  EXPECT_EQ(back.refine.opts.budget, m.refine.opts.budget);
  const Aabb b({-0.1, 0, 0.2}, {0.4, 0.5, 0.6});
  EXPECT_EQ(m.layout.codec.encode(b), back.layout.codec.encode(b));
  std::filesystem::remove(dir / kCoarseCheckpoint);
  EXPECT_THROW(Models::load(dir), Error);
}

TEST(Stages, TrainModelScheduleIsDeterministic) {
  const ObjectSample s = generate_sample(6, "barbell");
  auto run = [&] {
    Models m = testing_util::tiny_models(26);
    TrainOptions o;
    o.iters = 4;
    o.batch = 2;
    std::vector<double> lrs;
    const double loss = train_model(
        m.coarse.dit, [&](std::size_t, Rng&) { return coarse_item(s, m.coarse.opts, 4); }, 1, o,
        [&](int, double, double lr) { lrs.push_back(lr); });
    return std::make_pair(loss, lrs);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

}  // namespace
}  // namespace partgen
