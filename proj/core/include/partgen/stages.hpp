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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "partgen/dit.hpp"
#include "partgen/encoding.hpp"
#include "partgen/layout.hpp"
#include "partgen/mesh.hpp"
#include "partgen/synthdata.hpp"
#include "partgen/voxel.hpp"

namespace partgen {

struct PartOccupancy {
  int part_id = 0;
  Aabb box;
  VoxelGrid grid;  // canonical frame of `box`
  bool empty() const { return grid.empty(); }
};

// ---------------------------------------------------------------------------
// Patchified occupancy (stage-2 tokens)

/// (n/p)^3 x p^3 matrix; row = patch linear index, column = in-patch linear
/// index, value +1 for occupied cells and -1 otherwise.
nn::Mat<float> occupancy_to_tokens(const VoxelGrid& grid, int p);
/// Inverse of occupancy_to_tokens: a cell is occupied iff its value is > 0.
VoxelGrid tokens_to_occupancy(const nn::Mat<float>& tokens, int n, int p);
/// One key per patch, computed on the (n/p)^3 patch lattice over `box`.
std::vector<CenterCornerKey> patch_keys(const Aabb& box, int n, int p, int lattice = kDefaultLattice);

struct AugmentOptions {
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double jitter = 0.05;  // fraction of the extent
};
/// Per-axis rescale about the center plus jitter, clamped to [-1,1]^3.
Aabb augment_box(const Aabb& box, Rng& rng, const AugmentOptions& opts = {});

// ---------------------------------------------------------------------------
// Slot sampling shared by stages 2 and 3

/// Clean latent of one slot and the noise it was generated from.
struct SlotLatent {
  nn::Mat<float> x0;
  nn::Mat<float> eps;
};

struct SlotInput {
  int part_id = 0;  // 0 for the global slot; selects the per-slot noise stream
  std::vector<CenterCornerKey> keys;
  int rows = 0;
  /// When set, the slot is held at (1 - t) x0 + t eps at every step.
  std::optional<SlotLatent> frozen;
};

/// Called after the per-step clamps with the current state of a round.
using RoundObserver = std::function<void(int round, const nn::Mat<float>& x, double t,
                                         std::span<const SlotRange> slots)>;

struct SlotSamples {
  SlotLatent global;  // from round 1
  std::vector<SlotLatent> parts;
  int rounds = 0;
};

/// Samples the global slot plus all part slots. Part slots are processed in
/// rounds of at most kmax; from round 2 on the global slot is clamped to the
/// latent and noise recorded in round 1. Noise for a free slot is drawn from
/// derive_seed(seed, part_id).
SlotSamples sample_slots(Dit<float>& model, const SlotInput& global, std::span<const SlotInput> parts,
                         const Condition<float>& cond, uint64_t seed, const SamplerOptions& sampler,
                         const RoundObserver& observer = {});

// ---------------------------------------------------------------------------
// Stage 2: coarse occupancy

struct CoarseOptions {
  int grid = 16;
  int patch = 4;
  int lattice = kDefaultLattice;
  int tokens() const { return (grid / patch) * (grid / patch) * (grid / patch); }
  int channels() const { return patch * patch * patch; }
  void validate() const;
};

struct PartRequest {
  int part_id = 0;
  Aabb box;
  std::optional<SlotLatent> frozen;
};

struct CoarseResult {
  std::vector<PartOccupancy> parts;
  VoxelGrid global;  // diagnostic only
  SlotSamples latents;
};

CoarseResult generate_coarse(Dit<float>& model, const CoarseOptions& opts, std::span<const PartRequest> parts,
                             const std::optional<SlotLatent>& frozen_global, const Condition<float>& cond,
                             uint64_t seed, const SamplerOptions& sampler, const RoundObserver& observer = {});
/// Part ids 1..K, nothing frozen.
CoarseResult generate_coarse(Dit<float>& model, const CoarseOptions& opts, std::span<const Aabb> boxes,
                             const Condition<float>& cond, uint64_t seed, const SamplerOptions& sampler);

/// Global slot (union of parts on the unit frame) plus one slot per part.
/// With `augment`, each part box is perturbed and the part re-voxelized in
/// the perturbed frame.
TrainItem<float> coarse_item(const ObjectSample& sample, const CoarseOptions& opts, int kmax, Rng* augment = nullptr,
                             const AugmentOptions& aug = {});

// ---------------------------------------------------------------------------
// Stage 3: sparse feature refinement

struct RefineOptions {
  int grid = 16;
  int patch = 4;
  int budget = 64;  // max per-voxel tokens per slot before switching to patches
  int lattice = kDefaultLattice;
  static constexpr int kChannels = 3;
  void validate() const;
};

/// Occupied voxels of one part and their decoded colors. When the part has
/// more than `budget` occupied voxels, tokens are the occupied patches and
/// every voxel takes its patch's color.
struct SparseVoxelTokens {
  int part_id = 0;
  std::vector<Cell> positions;     // occupied cells, ascending linear index
  bool patched = false;
  std::vector<Cell> token_cells;   // voxel cells or patch cells
  nn::Mat<float> features;         // tokens x 3
  std::vector<std::array<float, 3>> colors;  // per position
};

/// Token cells for a grid under the budget rule.
std::vector<Cell> refine_token_cells(const VoxelGrid& grid, const RefineOptions& opts, bool* patched);
std::vector<CenterCornerKey> refine_keys(const Aabb& box, std::span<const Cell> cells, bool patched,
                                         const RefineOptions& opts);

/// f -> rgb = sigmoid(2 f); zero decodes to mid-gray.
std::array<float, 3> decode_color(const float* feature);
/// Inverse of decode_color on [0.05, 0.95].
std::array<float, 3> encode_color(const std::array<float, 3>& rgb);

struct RefineRequest {
  PartOccupancy part;
  std::optional<SlotLatent> frozen;
};

struct RefineResult {
  std::vector<SparseVoxelTokens> parts;
  SlotSamples latents;
};

/// Union of the parts resampled onto the unit-frame grid of the same size.
VoxelGrid union_grid(std::span<const PartOccupancy> parts, int n);

RefineResult refine(Dit<float>& model, const RefineOptions& opts, std::span<const RefineRequest> parts,
                    const std::optional<SlotLatent>& frozen_global, const Condition<float>& cond, uint64_t seed,
                    const SamplerOptions& sampler);
RefineResult refine(Dit<float>& model, const RefineOptions& opts, std::span<const PartOccupancy> parts,
                    const Condition<float>& cond, uint64_t seed, const SamplerOptions& sampler);

/// Training item with synthetic per-voxel colors as targets.
TrainItem<float> refine_item(const ObjectSample& sample, const RefineOptions& opts, int kmax);
/// Ground-truth per-voxel colors for a part grid (ascending linear index).
std::vector<std::array<float, 3>> part_colors(const SynthPart& part, const VoxelGrid& grid);

// ---------------------------------------------------------------------------
// Assembly

struct PartMesh {
  int part_id = 0;
  Aabb box;
  TriMesh mesh;
  std::vector<Rgb8> vertex_colors;
};

/// Cube-surface mesh of one part in its box frame; vertex colors taken from
/// the owning voxel when `colors` (per occupied voxel) is non-empty.
PartMesh make_part_mesh(const PartOccupancy& part, std::span<const std::array<float, 3>> colors = {});

/// One cube-surface mesh per non-empty part, placed in its own box frame.
/// `colors[i]`, when present, holds per-occupied-voxel colors of part i.
std::vector<PartMesh> assemble(std::span<const PartOccupancy> parts,
                               std::span<const std::vector<std::array<float, 3>>> colors = {});
/// All part meshes merged into one mesh (for metrics).
TriMesh merge_meshes(std::span<const PartMesh> meshes);

// ---------------------------------------------------------------------------
// Stage models and checkpoints

struct LayoutModel {
  explicit LayoutModel(const ModelConfig& cfg);
  ModelConfig config;
  BoxCodec codec;
  Dit<float> dit;
  FilterOptions filter;
};

struct CoarseModel {
  CoarseModel(const ModelConfig& cfg, const CoarseOptions& o);
  ModelConfig config;
  CoarseOptions opts;
  Dit<float> dit;
};

struct RefineModel {
  RefineModel(const ModelConfig& cfg, const RefineOptions& o);
  ModelConfig config;
  RefineOptions opts;
  Dit<float> dit;
};

/// Layout-stage model config: no spatial keys, codec-sized tokens.
ModelConfig layout_model_config(ModelConfig base, const BoxCodec& codec);
ModelConfig coarse_model_config(ModelConfig base, const CoarseOptions& opts);
ModelConfig refine_model_config(ModelConfig base, const RefineOptions& opts);

void save_model(const LayoutModel& m, const std::filesystem::path& path);
void save_model(const CoarseModel& m, const std::filesystem::path& path);
void save_model(const RefineModel& m, const std::filesystem::path& path);
LayoutModel load_layout_model(const std::filesystem::path& path);
CoarseModel load_coarse_model(const std::filesystem::path& path);
RefineModel load_refine_model(const std::filesystem::path& path);

struct LayoutSample {
  std::vector<Aabb> boxes;
  std::vector<DecodedSlot> diagnostics;
  nn::Mat<float> tokens;
};

TrainItem<float> layout_item(const LayoutModel& model, const ObjectSample& sample);
LayoutSample sample_layout(LayoutModel& model, const Condition<float>& cond, uint64_t seed,
                           const SamplerOptions& sampler);

// ---------------------------------------------------------------------------
// Training loop

struct TrainOptions {
  int iters = 1000;
  int batch = 4;
  double lr = 1e-3;
  int warmup = 50;
  double min_lr_ratio = 0.1;
  double drop_prob = 0.1;
  uint64_t seed = 0;
};

using ItemSource = std::function<TrainItem<float>(std::size_t index, Rng& rng)>;
using TrainLogger = std::function<void(int iter, double loss, double lr)>;

/// Warmup + cosine schedule; items are drawn uniformly from [0, count).
/// Returns the mean loss over the last 10% of iterations.
double train_model(Dit<float>& model, const ItemSource& items, std::size_t count, const TrainOptions& opts,
                   const TrainLogger& log = {});

}  // namespace partgen
