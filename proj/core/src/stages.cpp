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

#include "partgen/stages.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "partgen/error.hpp"

namespace partgen {

using nn::Mat;

// ---------------------------------------------------------------------------
// Patchified occupancy

namespace {

void require_divisible(int n, int p) {
  if (n <= 0 || p <= 0 || n % p != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "grid " + std::to_string(n) + " is not divisible by patch " + std::to_string(p));
  }
}

}  // namespace

Mat<float> occupancy_to_tokens(const VoxelGrid& grid, int p) {
  const int n = grid.n();
  require_divisible(n, p);
  const int np = n / p;
  Mat<float> out(np * np * np, p * p * p);
  for (int pz = 0; pz < np; ++pz) {
    for (int py = 0; py < np; ++py) {
      for (int px = 0; px < np; ++px) {
        const int row = px + np * py + np * np * pz;
        for (int lz = 0; lz < p; ++lz) {
          for (int ly = 0; ly < p; ++ly) {
            for (int lx = 0; lx < p; ++lx) {
              const bool on = grid.get(px * p + lx, py * p + ly, pz * p + lz);
              out(row, lx + p * ly + p * p * lz) = on ? 1.0f : -1.0f;
            }
          }
        }
      }
    }
  }
  return out;
}

VoxelGrid tokens_to_occupancy(const Mat<float>& tokens, int n, int p) {
  require_divisible(n, p);
  const int np = n / p;
  if (tokens.rows() != np * np * np || tokens.cols() != p * p * p) {
    throw Error(ErrorCode::kInvalidArgument, "tokens_to_occupancy: token matrix has the wrong shape");
  }
  VoxelGrid grid(n);
  for (int pz = 0; pz < np; ++pz) {
    for (int py = 0; py < np; ++py) {
      for (int px = 0; px < np; ++px) {
        const int row = px + np * py + np * np * pz;
        for (int lz = 0; lz < p; ++lz) {
          for (int ly = 0; ly < p; ++ly) {
            for (int lx = 0; lx < p; ++lx) {
              if (tokens(row, lx + p * ly + p * p * lz) > 0.0f) grid.set(px * p + lx, py * p + ly, pz * p + lz);
            }
          }
        }
      }
    }
  }
  return grid;
}

std::vector<CenterCornerKey> patch_keys(const Aabb& box, int n, int p, int lattice) {
  require_divisible(n, p);
  const int np = n / p;
  std::vector<CenterCornerKey> keys;
  keys.reserve(static_cast<std::size_t>(np) * np * np);
  for (int z = 0; z < np; ++z) {
    for (int y = 0; y < np; ++y) {
      for (int x = 0; x < np; ++x) keys.push_back(cell_key(box, {x, y, z}, np, lattice));
    }
  }
  return keys;
}

Aabb augment_box(const Aabb& box, Rng& rng, const AugmentOptions& opts) {
  require_valid(box, "augment_box");
  Vec3 lo, hi;
  const Vec3 c = box.center();
  const Vec3 e = box.extent();
  for (int a = 0; a < 3; ++a) {
    const double s = rng.uniform(opts.scale_lo, opts.scale_hi);
    const double j = rng.uniform(-opts.jitter, opts.jitter) * e[a];
    const double center = std::clamp(c[a] + j, -1.0, 1.0);
    const double half = 0.5 * e[a] * s;
    lo[a] = std::max(-1.0, center - half);
    hi[a] = std::min(1.0, center + half);
    if (!(hi[a] > lo[a])) {
      lo[a] = box.min[a];
      hi[a] = box.max[a];
    }
  }
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// Slot sampling

namespace {

struct RoundOutput {
  SlotLatent global;
  std::vector<SlotLatent> parts;
};

RoundOutput run_round(Dit<float>& model, int round, const SlotInput& global, std::span<const SlotInput> parts,
                      const Condition<float>& cond, uint64_t seed, const SamplerOptions& sampler,
                      const RoundObserver& observer) {
  const int channels = model.config().in_channels;
  std::vector<const SlotInput*> inputs = {&global};
  for (const SlotInput& p : parts) inputs.push_back(&p);

  int rows = 0;
  for (const SlotInput* s : inputs) rows += s->rows;
  TokenStream<float> stream;
  stream.tokens = Mat<float>::Zero(rows, channels);
  Mat<float> noise(rows, channels);
  int at = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const SlotInput& s = *inputs[i];
    if (static_cast<int>(s.keys.size()) != s.rows) {
      throw Error(ErrorCode::kInvalidArgument, "sample_slots: slot keys do not match its row count");
    }
    stream.slots.push_back({at, at + s.rows, static_cast<int>(i), true});
    stream.keys.insert(stream.keys.end(), s.keys.begin(), s.keys.end());
    if (s.frozen) {
      if (s.frozen->x0.rows() != s.rows || s.frozen->x0.cols() != channels || s.frozen->eps.rows() != s.rows ||
          s.frozen->eps.cols() != channels) {
        throw Error(ErrorCode::kInvalidArgument,
                    "sample_slots: frozen latent of part " + std::to_string(s.part_id) + " has the wrong shape");
      }
      noise.middleRows(at, s.rows) = s.frozen->eps;
    } else {
      Rng rng(derive_seed(seed, static_cast<uint64_t>(s.part_id)));
      noise.middleRows(at, s.rows) = gaussian<float>(s.rows, channels, rng);
    }
    at += s.rows;
  }

  StepHook<float> hook = [&](Mat<float>& x, double t) {
    const float a = static_cast<float>(1.0 - t);
    const float b = static_cast<float>(t);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const SlotInput& s = *inputs[i];
      if (!s.frozen) continue;
      const SlotRange& r = stream.slots[i];
      x.middleRows(r.begin, s.rows) = a * s.frozen->x0 + b * s.frozen->eps;
    }
    if (observer) observer(round, x, t, stream.slots);
  };
  const Mat<float> x = sample(model, stream, cond, noise, sampler, hook);

  RoundOutput out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const SlotRange& r = stream.slots[i];
    SlotLatent lat{x.middleRows(r.begin, r.end - r.begin), noise.middleRows(r.begin, r.end - r.begin)};
    if (i == 0) {
      out.global = std::move(lat);
    } else {
      out.parts.push_back(std::move(lat));
    }
  }
  return out;
}

}  // namespace

SlotSamples sample_slots(Dit<float>& model, const SlotInput& global, std::span<const SlotInput> parts,
                         const Condition<float>& cond, uint64_t seed, const SamplerOptions& sampler,
                         const RoundObserver& observer) {
  const std::size_t kmax = static_cast<std::size_t>(model.config().kmax);
  if (kmax == 0) throw Error(ErrorCode::kConfig, "sample_slots: model has no part slots");
  SlotSamples out;
  SlotInput anchor = global;
  std::size_t begin = 0;
  do {
    const std::size_t end = std::min(parts.size(), begin + kmax);
    ++out.rounds;
    RoundOutput r = run_round(model, out.rounds, anchor, parts.subspan(begin, end - begin), cond, seed, sampler,
                              observer);
    if (out.rounds == 1) {
      out.global = r.global;
      anchor.frozen = r.global;
    }
    for (SlotLatent& p : r.parts) out.parts.push_back(std::move(p));
    begin = end;
  } while (begin < parts.size());
  return out;
}

// ---------------------------------------------------------------------------
// Stage 2

void CoarseOptions::validate() const {
  require_divisible(grid, patch);
  if (lattice <= 0) throw Error(ErrorCode::kConfig, "coarse: lattice must be positive");
}

namespace {

void require_unique_ids(std::span<const int> ids) {
  std::vector<int> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  if (!sorted.empty() && sorted.front() < 1) throw Error(ErrorCode::kInvalidArgument, "part ids start at 1");
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate part id");
  }
}

void require_channels(const Dit<float>& model, int channels, const char* stage) {
  if (model.config().in_channels != channels) {
    throw Error(ErrorCode::kConfig, std::string(stage) + ": model token width does not match the stage options");
  }
}

}  // namespace

CoarseResult generate_coarse(Dit<float>& model, const CoarseOptions& opts, std::span<const PartRequest> parts,
                             const std::optional<SlotLatent>& frozen_global, const Condition<float>& cond,
                             uint64_t seed, const SamplerOptions& sampler, const RoundObserver& observer) {
  opts.validate();
  require_channels(model, opts.channels(), "generate_coarse");
  if (parts.empty()) throw Error(ErrorCode::kEmptyInput, "generate_coarse: no boxes");
  std::vector<int> ids;
  for (const PartRequest& p : parts) ids.push_back(p.part_id);
  require_unique_ids(ids);

  SlotInput global{0, patch_keys(Aabb::unit(), opts.grid, opts.patch, opts.lattice), opts.tokens(), frozen_global};
  std::vector<SlotInput> inputs;
  for (const PartRequest& p : parts) {
    require_valid(p.box, "generate_coarse");
    inputs.push_back({p.part_id, patch_keys(p.box, opts.grid, opts.patch, opts.lattice), opts.tokens(), p.frozen});
  }
  CoarseResult out;
  out.latents = sample_slots(model, global, inputs, cond, seed, sampler, observer);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.parts.push_back(
        {parts[i].part_id, parts[i].box, tokens_to_occupancy(out.latents.parts[i].x0, opts.grid, opts.patch)});
  }
  out.global = tokens_to_occupancy(out.latents.global.x0, opts.grid, opts.patch);
  return out;
}

CoarseResult generate_coarse(Dit<float>& model, const CoarseOptions& opts, std::span<const Aabb> boxes,
                             const Condition<float>& cond, uint64_t seed, const SamplerOptions& sampler) {
  std::vector<PartRequest> req;
  for (std::size_t i = 0; i < boxes.size(); ++i) req.push_back({static_cast<int>(i) + 1, boxes[i], std::nullopt});
  return generate_coarse(model, opts, req, std::nullopt, cond, seed, sampler);
}

TrainItem<float> coarse_item(const ObjectSample& sample, const CoarseOptions& opts, int kmax, Rng* augment,
                             const AugmentOptions& aug) {
  opts.validate();
  const std::vector<Aabb> boxes = sample.boxes();
  const std::vector<int> keep = largest_boxes(boxes, kmax);
  const int rows = opts.tokens();
  const int slots = static_cast<int>(keep.size()) + 1;

  TrainItem<float> item;
  item.x0.tokens.resize(static_cast<Eigen::Index>(rows) * slots, opts.channels());
  auto put = [&](int slot, const Aabb& box, const VoxelGrid& grid) {
    item.x0.tokens.middleRows(static_cast<Eigen::Index>(slot) * rows, rows) = occupancy_to_tokens(grid, opts.patch);
    item.x0.slots.push_back({slot * rows, (slot + 1) * rows, slot, true});
    const auto keys = patch_keys(box, opts.grid, opts.patch, opts.lattice);
    item.x0.keys.insert(item.x0.keys.end(), keys.begin(), keys.end());
  };
  put(0, Aabb::unit(), voxelize(sample.solid(), Aabb::unit(), opts.grid));
  for (std::size_t s = 0; s < keep.size(); ++s) {
    const SynthPart& part = sample.parts[static_cast<std::size_t>(keep[s])];
    const Aabb box = augment ? augment_box(part.box, *augment, aug) : part.box;
    put(static_cast<int>(s) + 1, box, voxelize(Solid(part.solid), box, opts.grid));
  }
  item.cond.patches = condition_patches(sample.condition);
  return item;
}

// ---------------------------------------------------------------------------
// Stage 3

void RefineOptions::validate() const {
  require_divisible(grid, patch);
  if (budget <= 0) throw Error(ErrorCode::kConfig, "refine: budget must be positive");
  if (lattice <= 0) throw Error(ErrorCode::kConfig, "refine: lattice must be positive");
}

std::vector<Cell> refine_token_cells(const VoxelGrid& grid, const RefineOptions& opts, bool* patched) {
  const std::vector<std::size_t> occ = grid.occupied();
  std::vector<Cell> cells;
  if (static_cast<int>(occ.size()) <= opts.budget) {
    if (patched) *patched = false;
    for (std::size_t li : occ) cells.push_back(grid.cell(li));
    return cells;
  }
  if (patched) *patched = true;
  const int np = grid.n() / opts.patch;
  std::vector<bool> hit(static_cast<std::size_t>(np) * np * np, false);
  for (std::size_t li : occ) {
    const Cell c = grid.cell(li);
    hit[static_cast<std::size_t>(c.x / opts.patch + np * (c.y / opts.patch) + np * np * (c.z / opts.patch))] = true;
  }
  for (std::size_t i = 0; i < hit.size(); ++i) {
    if (!hit[i]) continue;
    const int ii = static_cast<int>(i);
    cells.push_back({ii % np, (ii / np) % np, ii / (np * np)});
  }
  return cells;
}

std::vector<CenterCornerKey> refine_keys(const Aabb& box, std::span<const Cell> cells, bool patched,
                                         const RefineOptions& opts) {
  const int n = patched ? opts.grid / opts.patch : opts.grid;
  std::vector<CenterCornerKey> keys;
  keys.reserve(cells.size());
  for (const Cell& c : cells) keys.push_back(cell_key(box, c, n, opts.lattice));
  return keys;
}

std::array<float, 3> decode_color(const float* feature) {
  std::array<float, 3> rgb{};
  for (int c = 0; c < 3; ++c) rgb[c] = 1.0f / (1.0f + std::exp(-2.0f * feature[c]));
  return rgb;
}

std::array<float, 3> encode_color(const std::array<float, 3>& rgb) {
  std::array<float, 3> f{};
  for (int c = 0; c < 3; ++c) {
    const float v = std::clamp(rgb[c], 0.05f, 0.95f);
    f[c] = 0.5f * std::log(v / (1.0f - v));
  }
  return f;
}

namespace {

// Index of the first part whose occupancy covers global point p, or -1.
int covering_part(std::span<const PartOccupancy> parts, const Vec3& p) {
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const PartOccupancy& part = parts[k];
    if (part.grid.n() == 0 || !part.box.contains(p)) continue;
    const Vec3 c = to_canonical(part.box, p);
    const int n = part.grid.n();
    int idx[3];
    for (int a = 0; a < 3; ++a) idx[a] = std::clamp(static_cast<int>(std::floor((c[a] + 1.0) / 2.0 * n)), 0, n - 1);
    if (part.grid.get(idx[0], idx[1], idx[2])) return static_cast<int>(k);
  }
  return -1;
}

// Maps each occupied cell (ascending) to the row of its token.
std::vector<int> token_rows(const VoxelGrid& grid, std::span<const Cell> token_cells, bool patched, int patch) {
  std::vector<int> rows;
  const std::vector<std::size_t> occ = grid.occupied();
  if (!patched) {
    rows.resize(occ.size());
    for (std::size_t i = 0; i < occ.size(); ++i) rows[i] = static_cast<int>(i);
    return rows;
  }
  const int np = grid.n() / patch;
  std::unordered_map<int, int> row_of;
  for (std::size_t i = 0; i < token_cells.size(); ++i) {
    const Cell& c = token_cells[i];
    row_of[c.x + np * c.y + np * np * c.z] = static_cast<int>(i);
  }
  for (std::size_t li : occ) {
    const Cell c = grid.cell(li);
    rows.push_back(row_of.at(c.x / patch + np * (c.y / patch) + np * np * (c.z / patch)));
  }
  return rows;
}

// Per-token mean of per-voxel colors, encoded as features.
Mat<float> color_features(std::span<const std::array<float, 3>> colors, std::span<const int> rows, int tokens) {
  Mat<double> sum = Mat<double>::Zero(tokens, 3);
  std::vector<int> count(static_cast<std::size_t>(tokens), 0);
  for (std::size_t i = 0; i < colors.size(); ++i) {
    for (int c = 0; c < 3; ++c) sum(rows[i], c) += colors[i][c];
    ++count[static_cast<std::size_t>(rows[i])];
  }
  Mat<float> f(tokens, 3);
  for (int r = 0; r < tokens; ++r) {
    std::array<float, 3> mean{};
    for (int c = 0; c < 3; ++c) mean[c] = static_cast<float>(sum(r, c) / std::max(count[static_cast<std::size_t>(r)], 1));
    const auto e = encode_color(mean);
    for (int c = 0; c < 3; ++c) f(r, c) = e[c];
  }
  return f;
}

}  // namespace

VoxelGrid union_grid(std::span<const PartOccupancy> parts, int n) {
  VoxelGrid g(n);
  const Aabb unit = Aabb::unit();
  for (int z = 0; z < n; ++z) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (covering_part(parts, cell_center(unit, n, {x, y, z})) >= 0) g.set(x, y, z);
      }
    }
  }
  return g;
}

std::vector<std::array<float, 3>> part_colors(const SynthPart& part, const VoxelGrid& grid) {
  std::vector<std::array<float, 3>> out;
  for (std::size_t li : grid.occupied()) out.push_back(voxel_color(part, cell_center(part.box, grid.n(), grid.cell(li))));
  return out;
}

RefineResult refine(Dit<float>& model, const RefineOptions& opts, std::span<const RefineRequest> parts,
                    const std::optional<SlotLatent>& frozen_global, const Condition<float>& cond, uint64_t seed,
                    const SamplerOptions& sampler) {
  opts.validate();
  require_channels(model, RefineOptions::kChannels, "refine");
  std::vector<PartOccupancy> occ;
  std::vector<int> ids;
  bool any = false;
  for (const RefineRequest& r : parts) {
    if (r.part.grid.n() != opts.grid) throw Error(ErrorCode::kInvalidArgument, "refine: grid resolution mismatch");
    occ.push_back(r.part);
    ids.push_back(r.part.part_id);
    any = any || !r.part.empty();
  }
  if (!any) throw Error(ErrorCode::kEmptyInput, "refine: all parts are empty");
  require_unique_ids(ids);

  const VoxelGrid uni = union_grid(occ, opts.grid);
  bool global_patched = false;
  const std::vector<Cell> global_cells = refine_token_cells(uni, opts, &global_patched);
  SlotInput global{0, refine_keys(Aabb::unit(), global_cells, global_patched, opts),
                   static_cast<int>(global_cells.size()), frozen_global};

  RefineResult out;
  std::vector<SlotInput> inputs;
  for (const RefineRequest& r : parts) {
    SparseVoxelTokens t;
    t.part_id = r.part.part_id;
    for (std::size_t li : r.part.grid.occupied()) t.positions.push_back(r.part.grid.cell(li));
    t.token_cells = refine_token_cells(r.part.grid, opts, &t.patched);
    inputs.push_back({t.part_id, refine_keys(r.part.box, t.token_cells, t.patched, opts),
                      static_cast<int>(t.token_cells.size()), r.frozen});
    out.parts.push_back(std::move(t));
  }
  out.latents = sample_slots(model, global, inputs, cond, seed, sampler);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    SparseVoxelTokens& t = out.parts[i];
    t.features = out.latents.parts[i].x0;
    const std::vector<int> rows = token_rows(parts[i].part.grid, t.token_cells, t.patched, opts.patch);
    for (int r : rows) t.colors.push_back(decode_color(t.features.row(r).data()));
  }
  return out;
}

RefineResult refine(Dit<float>& model, const RefineOptions& opts, std::span<const PartOccupancy> parts,
                    const Condition<float>& cond, uint64_t seed, const SamplerOptions& sampler) {
  std::vector<RefineRequest> req;
  for (const PartOccupancy& p : parts) req.push_back({p, std::nullopt});
  return refine(model, opts, req, std::nullopt, cond, seed, sampler);
}

TrainItem<float> refine_item(const ObjectSample& sample, const RefineOptions& opts, int kmax) {
  opts.validate();
  const std::vector<Aabb> boxes = sample.boxes();
  const std::vector<int> keep = largest_boxes(boxes, kmax);

  std::vector<PartOccupancy> occ;
  std::vector<const SynthPart*> src;
  for (int k : keep) {
    const SynthPart& part = sample.parts[static_cast<std::size_t>(k)];
    occ.push_back({part.part_id, part.box, voxelize(Solid(part.solid), part.box, opts.grid)});
    src.push_back(&part);
  }

  TrainItem<float> item;
  std::vector<Mat<float>> blocks;
  auto add_slot = [&](const Aabb& box, const VoxelGrid& grid, const std::vector<std::array<float, 3>>& colors) {
    bool patched = false;
    const std::vector<Cell> cells = refine_token_cells(grid, opts, &patched);
    const std::vector<int> rows = token_rows(grid, cells, patched, opts.patch);
    blocks.push_back(color_features(colors, rows, static_cast<int>(cells.size())));
    const int begin = item.x0.slots.empty() ? 0 : item.x0.slots.back().end;
    item.x0.slots.push_back({begin, begin + static_cast<int>(cells.size()), static_cast<int>(item.x0.slots.size()), true});
    const auto keys = refine_keys(box, cells, patched, opts);
    item.x0.keys.insert(item.x0.keys.end(), keys.begin(), keys.end());
  };

  const VoxelGrid uni = union_grid(occ, opts.grid);
  std::vector<std::array<float, 3>> global_colors;
  for (std::size_t li : uni.occupied()) {
    const Vec3 p = cell_center(Aabb::unit(), opts.grid, uni.cell(li));
    global_colors.push_back(voxel_color(*src[static_cast<std::size_t>(covering_part(occ, p))], p));
  }
  add_slot(Aabb::unit(), uni, global_colors);
  for (std::size_t i = 0; i < occ.size(); ++i) add_slot(occ[i].box, occ[i].grid, part_colors(*src[i], occ[i].grid));

  item.x0.tokens.resize(item.x0.slots.back().end, RefineOptions::kChannels);
  for (std::size_t s = 0; s < blocks.size(); ++s) {
    item.x0.tokens.middleRows(item.x0.slots[s].begin, blocks[s].rows()) = blocks[s];
  }
  item.cond.patches = condition_patches(sample.condition);
  return item;
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

uint8_t to_u8(float v) { return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

}  // namespace

PartMesh make_part_mesh(const PartOccupancy& part, std::span<const std::array<float, 3>> colors) {
  PartMesh pm{part.part_id, part.box, grid_to_cubes(part.grid, part.box), {}};
  if (colors.empty()) return pm;
  const std::vector<std::size_t> occ = part.grid.occupied();
  if (colors.size() != occ.size()) {
    throw Error(ErrorCode::kInvalidArgument, "part mesh: color count does not match occupied voxels");
  }
  std::unordered_map<std::size_t, std::size_t> order;
  for (std::size_t k = 0; k < occ.size(); ++k) order[occ[k]] = k;
  pm.vertex_colors.assign(pm.mesh.vertices.size(), Rgb8{128, 128, 128});
  std::vector<bool> done(pm.mesh.vertices.size(), false);
  for (std::size_t f = 0; f < pm.mesh.faces.size(); ++f) {
    const auto& rgb = colors[order.at(pm.mesh.face_cell[f])];
    for (uint32_t v : pm.mesh.faces[f]) {
      if (done[v]) continue;
      done[v] = true;
      pm.vertex_colors[v] = {to_u8(rgb[0]), to_u8(rgb[1]), to_u8(rgb[2])};
    }
  }
  return pm;
}

std::vector<PartMesh> assemble(std::span<const PartOccupancy> parts,
                               std::span<const std::vector<std::array<float, 3>>> colors) {
  if (!colors.empty() && colors.size() != parts.size()) {
    throw Error(ErrorCode::kInvalidArgument, "assemble: one color list per part expected");
  }
  std::vector<PartMesh> out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].empty()) continue;
    out.push_back(make_part_mesh(parts[i], colors.empty() ? std::span<const std::array<float, 3>>() : colors[i]));
  }
  if (out.empty()) throw Error(ErrorCode::kEmptyInput, "assemble: all parts are empty");
  return out;
}

TriMesh merge_meshes(std::span<const PartMesh> meshes) {
  TriMesh out;
  for (const PartMesh& pm : meshes) {
    const auto base = static_cast<uint32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), pm.mesh.vertices.begin(), pm.mesh.vertices.end());
    for (const auto& f : pm.mesh.faces) out.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Models

ModelConfig layout_model_config(ModelConfig base, const BoxCodec& codec) {
  base.in_channels = codec.channels();
  base.tokens_per_part = codec.tokens();
  base.positional = false;
  return base;
}

ModelConfig coarse_model_config(ModelConfig base, const CoarseOptions& opts) {
  base.in_channels = opts.channels();
  base.tokens_per_part = opts.tokens();
  base.lattice = opts.lattice;
  base.positional = true;
  return base;
}

ModelConfig refine_model_config(ModelConfig base, const RefineOptions& opts) {
  base.in_channels = RefineOptions::kChannels;
  base.tokens_per_part = opts.budget;
  base.lattice = opts.lattice;
  base.positional = true;
  return base;
}

LayoutModel::LayoutModel(const ModelConfig& cfg)
    : config(cfg), codec(cfg.tokens_per_part, cfg.in_channels, derive_seed(cfg.seed, 7)), dit(cfg) {
  if (cfg.positional) throw Error(ErrorCode::kConfig, "layout model must not use positional keys");
}

CoarseModel::CoarseModel(const ModelConfig& cfg, const CoarseOptions& o) : config(cfg), opts(o), dit(cfg) {
  opts.validate();
  require_channels(dit, opts.channels(), "coarse model");
}

RefineModel::RefineModel(const ModelConfig& cfg, const RefineOptions& o) : config(cfg), opts(o), dit(cfg) {
  opts.validate();
  require_channels(dit, RefineOptions::kChannels, "refine model");
}

namespace {

constexpr int kCheckpointVersion = 1;

TensorArchive checkpoint_header(const char* kind, const ModelConfig& cfg) {
  TensorArchive a;
  a.meta = {{"kind", kind}, {"version", kCheckpointVersion}, {"model", cfg.to_json()}};
  return a;
}

TensorArchive open_checkpoint(const std::filesystem::path& path, const char* kind) {
  TensorArchive a = read_archive(path);
  if (!a.meta.contains("kind") || a.meta["kind"] != kind) {
    throw Error(ErrorCode::kFormat, path.string() + ": not a " + std::string(kind) + " checkpoint");
  }
  if (a.meta.value("version", 0) != kCheckpointVersion) {
    throw Error(ErrorCode::kFormat, path.string() + ": unsupported checkpoint version");
  }
  return a;
}

}  // namespace

void save_model(const LayoutModel& m, const std::filesystem::path& path) {
  TensorArchive a = checkpoint_header("layout", m.config);
  a.meta["filter"] = {{"validity_iou", m.filter.validity_iou},
                      {"nms_iou", m.filter.nms_iou},
                      {"min_extent", m.filter.min_extent},
                      {"validity_resolution", m.filter.validity_resolution}};
  m.codec.save(a, "");
  m.dit.save(a, "dit.");
  write_archive(path, a);
}

void save_model(const CoarseModel& m, const std::filesystem::path& path) {
  TensorArchive a = checkpoint_header("coarse", m.config);
  a.meta["options"] = {{"grid", m.opts.grid}, {"patch", m.opts.patch}, {"lattice", m.opts.lattice}};
  m.dit.save(a, "dit.");
  write_archive(path, a);
}

void save_model(const RefineModel& m, const std::filesystem::path& path) {
  TensorArchive a = checkpoint_header("refine", m.config);
  a.meta["options"] = {
      {"grid", m.opts.grid}, {"patch", m.opts.patch}, {"budget", m.opts.budget}, {"lattice", m.opts.lattice}};
  m.dit.save(a, "dit.");
  write_archive(path, a);
}

LayoutModel load_layout_model(const std::filesystem::path& path) {
  const TensorArchive a = open_checkpoint(path, "layout");
  try {
    LayoutModel m(ModelConfig::from_json(a.meta.at("model")));
    const auto& f = a.meta.at("filter");
    m.filter.validity_iou = f.at("validity_iou").get<double>();
    m.filter.nms_iou = f.at("nms_iou").get<double>();
    m.filter.min_extent = f.at("min_extent").get<double>();
    m.filter.validity_resolution = f.at("validity_resolution").get<int>();
    m.codec.load(a, "");
    m.dit.load(a, "dit.");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

CoarseModel load_coarse_model(const std::filesystem::path& path) {
  const TensorArchive a = open_checkpoint(path, "coarse");
  try {
    CoarseOptions o;
    const auto& j = a.meta.at("options");
    o.grid = j.at("grid").get<int>();
    o.patch = j.at("patch").get<int>();
    o.lattice = j.at("lattice").get<int>();
    CoarseModel m(ModelConfig::from_json(a.meta.at("model")), o);
    m.dit.load(a, "dit.");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

RefineModel load_refine_model(const std::filesystem::path& path) {
  const TensorArchive a = open_checkpoint(path, "refine");
  try {
    RefineOptions o;
    const auto& j = a.meta.at("options");
    o.grid = j.at("grid").get<int>();
    o.patch = j.at("patch").get<int>();
    o.budget = j.at("budget").get<int>();
    o.lattice = j.at("lattice").get<int>();
    RefineModel m(ModelConfig::from_json(a.meta.at("model")), o);
    m.dit.load(a, "dit.");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

TrainItem<float> layout_item(const LayoutModel& model, const ObjectSample& sample) {
  const LayoutSequence seq = assemble_layout(model.codec, sample.boxes(), model.config.kmax);
  TrainItem<float> item;
  item.x0 = layout_stream(seq);
  // Padded slots are regressed toward zero as well, so that sampling from
  // noise learns to leave unused slots empty.
  item.loss_rows.assign(static_cast<std::size_t>(item.x0.rows()), 1.0f);
  item.cond.patches = condition_patches(sample.condition);
  return item;
}

LayoutSample sample_layout(LayoutModel& model, const Condition<float>& cond, uint64_t seed,
                           const SamplerOptions& sampler) {
  const int m = model.codec.tokens();
  const int slots = model.config.kmax + 1;
  TokenStream<float> stream;
  stream.tokens = Mat<float>::Zero(static_cast<Eigen::Index>(m) * slots, model.codec.channels());
  for (int s = 0; s < slots; ++s) stream.slots.push_back({s * m, (s + 1) * m, s, true});
  Rng rng(derive_seed(seed, 0));
  Mat<float> noise = gaussian<float>(stream.tokens.rows(), stream.tokens.cols(), rng);
  LayoutSample out;
  out.tokens = sample(model.dit, stream, cond, std::move(noise), sampler);
  out.boxes = decode_and_filter(model.codec, layout_from_tokens(out.tokens, m), model.filter, &out.diagnostics);
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

double train_model(Dit<float>& model, const ItemSource& items, std::size_t count, const TrainOptions& opts,
                   const TrainLogger& log) {
  if (count == 0) throw Error(ErrorCode::kEmptyInput, "train_model: empty dataset");
  if (opts.iters <= 0 || opts.batch <= 0) throw Error(ErrorCode::kConfig, "train_model: iters and batch must be positive");
  nn::AdamWOptions ao;
  ao.lr = opts.lr;
  nn::AdamW<float> adam(model.parameters(), ao);
  Rng rng(opts.seed);
  const int tail_from = opts.iters - std::max(1, opts.iters / 10);
  double tail = 0.0;
  int tail_n = 0;
  std::vector<TrainItem<float>> batch;
  for (int it = 0; it < opts.iters; ++it) {
    double lr = opts.lr;
    if (it < opts.warmup) {
      lr = opts.lr * (it + 1) / opts.warmup;
    } else {
      const double span = std::max(1, opts.iters - opts.warmup);
      const double prog = (it - opts.warmup) / span;
      lr = opts.lr * (opts.min_lr_ratio + (1.0 - opts.min_lr_ratio) * 0.5 * (1.0 + std::cos(std::numbers::pi * prog)));
    }
    adam.set_lr(lr);
    batch.clear();
    for (int b = 0; b < opts.batch; ++b) batch.push_back(items(static_cast<std::size_t>(rng.below(count)), rng));
    const double loss = train_step<float>(model, adam, batch, opts.drop_prob, rng);
    if (it >= tail_from) {
      tail += loss;
      ++tail_n;
    }
    if (log) log(it, loss, lr);
  }
  return tail / std::max(tail_n, 1);
}

}  // namespace partgen
