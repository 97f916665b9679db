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

#include "partgen/encoding.hpp"
#include "partgen/error.hpp"
#include "partgen/stages.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace partgen {
namespace {

// Integer oracle for the unit box: lattice coordinate of grid line c.
uint16_t line(int c, int n, int lattice) {
  return static_cast<uint16_t>(std::min<long>(static_cast<long>(c) * lattice / n, lattice - 1));
}

TEST(Encoding, WorkedValue) {
  const CenterCornerKey k = cell_key(Aabb::unit(), {0, 0, 0}, 64, 2048);
  EXPECT_EQ(k.center, (QuantCoord{16, 16, 16}));
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(k.corners[i].ix, (i & 1) ? 32 : 0);
    EXPECT_EQ(k.corners[i].iy, (i & 2) ? 32 : 0);
    EXPECT_EQ(k.corners[i].iz, (i & 4) ? 32 : 0);
  }
}

TEST(Encoding, UnitBoxKeysMatchIntegerOracle) {
  for (int n : {4, 16, 64}) {
    for (int x = 0; x < n; x += std::max(1, n / 8)) {
      for (int y = 0; y < n; y += std::max(1, n / 5)) {
        for (int z = 0; z < n; z += std::max(1, n / 3)) {
          const CenterCornerKey k = cell_key(Aabb::unit(), {x, y, z}, n);
          const int c[3] = {x, y, z};
          for (int i = 0; i < 8; ++i) {
            const uint16_t want[3] = {line(c[0] + (i & 1 ? 1 : 0), n, 2048), line(c[1] + (i & 2 ? 1 : 0), n, 2048),
                                      line(c[2] + (i & 4 ? 1 : 0), n, 2048)};
            EXPECT_EQ(k.corners[i], (QuantCoord{want[0], want[1], want[2]}));
          }
          // Center of cell c: (2c + 1) / (2n) of the lattice.
          const auto mid = [&](int v) { return static_cast<uint16_t>((2L * v + 1) * 2048 / (2L * n)); };
          EXPECT_EQ(k.center, (QuantCoord{mid(x), mid(y), mid(z)}));
        }
      }
    }
  }
}

TEST(Encoding, UnitBoxKeysEqualGlobalGridKeys) {
  for (int n : {1, 2, 16, 64}) {
    for (int z = 0; z < n; ++z) {
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          ASSERT_EQ(cell_key(Aabb::unit(), {x, y, z}, n), testing_util::global_grid_key({x, y, z}, n))
              << n << ": " << x << "," << y << "," << z;
        }
      }
    }
  }
}

TEST(Encoding, GlobalPatchKeysFollowLatticeOracle) {
  // Global-branch patch keys (unit box, N = 16, p = 4) are the keys of a
  // 4^3 patch lattice, in x-fastest order.
  const auto keys = patch_keys(Aabb::unit(), 16, 4);
  ASSERT_EQ(keys.size(), 64u);
  for (int z = 0; z < 4; ++z) {
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        const CenterCornerKey& k = keys[static_cast<std::size_t>(x + 4 * y + 16 * z)];
        EXPECT_EQ(k.corners[0], (QuantCoord{line(x, 4, 2048), line(y, 4, 2048), line(z, 4, 2048)}));
        EXPECT_EQ(k.corners[7], (QuantCoord{line(x + 1, 4, 2048), line(y + 1, 4, 2048), line(z + 1, 4, 2048)}));
      }
    }
  }
}

TEST(Encoding, SmallBoxesGetDistinctKeys) {
  // Full-resolution property at the key level: a part box of extent 0.25
  // still gives 64 distinct centers along one axis of a 64 grid.
  const Aabb box({0.1, 0.1, 0.1}, {0.35, 0.35, 0.35});
  std::vector<uint16_t> xs;
  for (int x = 0; x < 64; ++x) xs.push_back(cell_key(box, {x, 0, 0}, 64).center.ix);
  EXPECT_TRUE(std::is_sorted(xs.begin(), xs.end()));
  EXPECT_EQ(std::adjacent_find(xs.begin(), xs.end()), xs.end());
}

TEST(Encoding, QuantizeClamps) {
  EXPECT_EQ(quantize(-1.0), 0);
  EXPECT_EQ(quantize(1.0), 2047);
  EXPECT_EQ(quantize(-5.0), 0);
  EXPECT_EQ(quantize(0.0), 1024);
  EXPECT_EQ(quantize(0.0, 64), 32);
}

TEST(Encoding, SerializeIsLittleEndian) {
  const CenterCornerKey k = cell_key(Aabb::unit(), {63, 0, 0}, 64);
  const auto bytes = k.serialize();
  const auto v = k.values();
  for (int i = 0; i < 27; ++i) EXPECT_EQ(bytes[2 * i] | (bytes[2 * i + 1] << 8), v[i]);
  EXPECT_EQ(v[0], k.center.ix);
}

TEST(Encoding, EmbedSumsCenterCornersAndId) {
  EmbeddingTable<double> t(2048, 16, 5, 42);
  const CenterCornerKey k = cell_key(Aabb({-0.3, 0.0, 0.2}, {0.1, 0.5, 0.9}), {3, 1, 2}, 8);
  nn::Mat<double> want = t.ids.value.row(4);
  for (int s = 0; s < 9; ++s) {
    const QuantCoord q = s == 0 ? k.center : k.corners[s - 1];
    want += t.axis[0].value.row(q.ix) + t.axis[1].value.row(q.iy) + t.axis[2].value.row(q.iz);
  }
  EXPECT_LT((t.embed(k, 4) - want).cwiseAbs().maxCoeff(), 1e-12);

  // The gather path used by the model sums the same rows.
  const std::vector<CenterCornerKey> keys = {k};
  const KeyIndices idx = key_indices(keys);
  nn::Mat<double> pos = nn::Mat<double>::Zero(1, 16);
  for (int a = 0; a < 3; ++a) {
    ASSERT_EQ(idx.axis[a]->size(), 9u);
    for (int32_t r : *idx.axis[a]) pos += t.axis[a].value.row(r);
  }
  EXPECT_LT((pos + t.id(4) - want).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(t.id(6), Error);
}

TEST(Encoding, RejectsBadCells) {
  EXPECT_THROW(cell_key(Aabb::unit(), {4, 0, 0}, 4), Error);
  EXPECT_THROW(cell_key(Aabb::unit(), {-1, 0, 0}, 4), Error);
}

}  // namespace
}  // namespace partgen
