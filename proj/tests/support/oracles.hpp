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

#include <cstdint>
#include <vector>

#include "partgen/dit.hpp"
#include "partgen/encoding.hpp"
#include "partgen/geometry.hpp"
#include "partgen/rng.hpp"
#include "partgen/voxel.hpp"

// Brute-force references shared by the unit tests and the acceptance binary.
namespace partgen::testing_util {

nn::Mat<double> random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Dense multi-head attention with an explicit boolean mask.
nn::Mat<double> masked_attention_oracle(const nn::Mat<double>& x, const AttentionWeights<double>& w, int heads,
                                        const std::vector<std::vector<bool>>& allowed);

struct AttentionCheck {
  int instances = 0;
  double intra_max_diff = 0.0;
  double inter_max_diff = 0.0;
};
/// Random instances with K <= 4 slots, M <= 8 tokens per slot, D <= 16.
AttentionCheck check_attention(int instances, uint64_t seed);

struct GradientCheck {
  int checked = 0;
  double worst_relative = 0.0;
  std::string worst_param;
};
/// Central differences of the CFM loss of a depth-2, width-8 double model
/// against backprop, with every parameter perturbed away from its init.
GradientCheck check_cfm_gradients(uint64_t seed, double h = 1e-6);

/// Box IoU by counting cell centers of an n^3 lattice over the union bounds.
double voxel_iou(const Aabb& a, const Aabb& b, int n);

/// IoU between a voxelization of `solid` (grid laid over `frame`) and the
/// solid itself, measured at the centers of an m^3 lattice over `region`.
double reconstruction_iou(const Solid& solid, const VoxelGrid& grid, const Aabb& frame, const Aabb& region, int m);

/// Key of cell c of the global n^3 grid computed directly in global
/// coordinates: corner g = -1 + 2c/n, center g = -1 + (2c+1)/n, then
/// floor((g + 1) / 2 * r) in exact integer arithmetic.
CenterCornerKey global_grid_key(const Cell& cell, int n, int lattice = kDefaultLattice);

}  // namespace partgen::testing_util
