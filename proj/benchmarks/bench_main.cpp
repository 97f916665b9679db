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


#include <benchmark/benchmark.h>

#include <algorithm>
#include <limits>

#include "partgen/dit.hpp"
#include "partgen/mesh.hpp"
#include "partgen/metrics.hpp"
#include "partgen/solid.hpp"
#include "partgen/voxel.hpp"

namespace partgen {
namespace {

nn::Mat<float> random_rows(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  nn::Mat<float> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
  return m;
}

// K slots of M tokens each, width 128, 4 heads.
void BM_IntraAttention(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const int m = static_cast<int>(state.range(1));
  Rng rng(1);
  auto w = make_attention_weights<float>("a", 128, rng);
  const nn::Mat<float> x = random_rows(static_cast<Eigen::Index>(k) * m, 128, rng);
  std::vector<SlotRange> slots;
  for (int s = 0; s < k; ++s) slots.push_back({s * m, (s + 1) * m, s, true});
  for (auto _ : state) {
    nn::Graph<float> g(false);
    benchmark::DoNotOptimize(g.value(intra_attention<float>(g, g.constant(x), w, 4, slots)).data());
  }
  state.SetItemsProcessed(state.iterations() * k * m);
}
BENCHMARK(BM_IntraAttention)->Args({9, 8})->Args({9, 64})->Args({31, 64});

void BM_InterAttention(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  Rng rng(2);
  auto w = make_attention_weights<float>("a", 128, rng);
  const nn::Mat<float> x = random_rows(rows, 128, rng);
  for (auto _ : state) {
    nn::Graph<float> g(false);
    benchmark::DoNotOptimize(g.value(inter_attention<float>(g, g.constant(x), w, 4)).data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(BM_InterAttention)->Arg(72)->Arg(576)->Arg(1984);

void BM_Voxelize(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Solid sphere(SphereSolid{{0.1, -0.2, 0.05}, 0.3});
  const Aabb box({-0.25, -0.55, -0.3}, {0.45, 0.15, 0.4});
  for (auto _ : state) benchmark::DoNotOptimize(voxelize(sphere, box, n).count());
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Voxelize)->Arg(16)->Arg(32)->Arg(64);

void BM_GridToCubes(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const VoxelGrid grid = voxelize(Solid(SphereSolid{{0, 0, 0}, 0.8}), Aabb::unit(), n);
  for (auto _ : state) benchmark::DoNotOptimize(grid_to_cubes(grid, Aabb::unit()).faces.size());
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(grid.count()));
}
BENCHMARK(BM_GridToCubes)->Arg(16)->Arg(32)->Arg(64);

PointCloud random_cloud(std::size_t n, uint64_t seed) {
  Rng rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  return c;
}

double brute_force_chamfer(const PointCloud& a, const PointCloud& b) {
  auto one_way = [](const PointCloud& from, const PointCloud& to) {
    double sum = 0.0;
    for (const Vec3& p : from.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : to.points) best = std::min(best, (p - q).squared_norm());
      sum += std::sqrt(best);
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

void BM_ChamferKdTree(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud a = random_cloud(n, 1);
  const PointCloud b = random_cloud(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n));
}
BENCHMARK(BM_ChamferKdTree)->Arg(1024)->Arg(4096);

void BM_ChamferBruteForce(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud a = random_cloud(n, 1);
  const PointCloud b = random_cloud(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_chamfer(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n));
}
BENCHMARK(BM_ChamferBruteForce)->Arg(1024)->Arg(4096);

}  // namespace
}  // namespace partgen

BENCHMARK_MAIN();
