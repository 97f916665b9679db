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

#include "partgen/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "partgen/error.hpp"

namespace partgen {

namespace fs = std::filesystem;

Models Models::load(const fs::path& dir) {
  return Models{load_layout_model(dir / kLayoutCheckpoint), load_coarse_model(dir / kCoarseCheckpoint),
                load_refine_model(dir / kRefineCheckpoint)};
}

void Models::save(const fs::path& dir) const {
  fs::create_directories(dir);
  save_model(layout, dir / kLayoutCheckpoint);
  save_model(coarse, dir / kCoarseCheckpoint);
  save_model(refine, dir / kRefineCheckpoint);
}

const ScenePart* SceneState::find(int part_id) const {
  for (const ScenePart& p : parts) {
    if (p.part_id == part_id) return &p;
  }
  return nullptr;
}

uint64_t layout_seed(uint64_t seed) { return derive_seed(seed, 1); }
uint64_t coarse_seed(uint64_t seed) { return derive_seed(seed, 2); }
uint64_t refine_seed(uint64_t seed) { return derive_seed(seed, 3); }

Condition<float> make_condition(const ConditionRef& ref) {
  Condition<float> c;
  c.patches = condition_patches(generate_sample(ref.seed, ref.category).condition);
  return c;
}

std::string default_scene_id(const ConditionRef& cond, uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "-%08llx-%llu", static_cast<unsigned long long>(cond.seed & 0xffffffffULL),
                static_cast<unsigned long long>(seed));
  return cond.category + buf;
}

namespace {

// Stage 3 over finished coarse parts; fills colors and refine latents.
void refine_parts(Models& models, SceneState& s, const std::vector<std::optional<SlotLatent>>& frozen,
                  const std::optional<SlotLatent>& frozen_global, const Condition<float>& cond, uint64_t seed,
                  const PipelineOptions& opts) {
  std::vector<RefineRequest> req;
  for (std::size_t i = 0; i < s.parts.size(); ++i) {
    req.push_back({{s.parts[i].part_id, s.parts[i].box, s.parts[i].grid}, frozen[i]});
  }
  RefineResult rr = refine(models.refine.dit, models.refine.opts, req, frozen_global, cond, seed, opts.sampler);
  for (std::size_t i = 0; i < s.parts.size(); ++i) {
    s.parts[i].colors = std::move(rr.parts[i].colors);
    s.parts[i].refine = std::move(rr.latents.parts[i]);
  }
  s.refine_global = std::move(rr.latents.global);
}

}  // namespace

SceneState generate_from_boxes(Models& models, const ConditionRef& cond, std::span<const Aabb> boxes, uint64_t seed,
                               const PipelineOptions& opts, const std::string& scene_id,
                               const std::string& layout_source) {
  if (boxes.empty()) throw Error(ErrorCode::kEmptyLayout, "no part boxes to generate");
  const Condition<float> c = make_condition(cond);
  std::vector<PartRequest> req;
  for (std::size_t i = 0; i < boxes.size(); ++i) req.push_back({static_cast<int>(i) + 1, boxes[i], std::nullopt});
  CoarseResult cr =
      generate_coarse(models.coarse.dit, models.coarse.opts, req, std::nullopt, c, coarse_seed(seed), opts.sampler);
  if (opts.progress) opts.progress(0.5);

  SceneState s;
  s.scene_id = scene_id.empty() ? default_scene_id(cond, seed) : scene_id;
  s.condition = cond;
  s.seed = seed;
  s.layout_source = layout_source;
  s.grid = models.coarse.opts.grid;
  s.global = cr.global;
  s.coarse_global = cr.latents.global;
  for (std::size_t i = 0; i < cr.parts.size(); ++i) {
    ScenePart p;
    p.part_id = cr.parts[i].part_id;
    p.box = cr.parts[i].box;
    p.grid = std::move(cr.parts[i].grid);
    p.coarse_seed = coarse_seed(seed);
    p.refine_seed = refine_seed(seed);
    p.coarse = std::move(cr.latents.parts[i]);
    s.parts.push_back(std::move(p));
  }
  refine_parts(models, s, std::vector<std::optional<SlotLatent>>(s.parts.size()), std::nullopt, c, refine_seed(seed),
               opts);
  if (opts.progress) opts.progress(1.0);
  return s;
}

SceneState run_full(Models& models, const ConditionRef& cond, uint64_t seed, const PipelineOptions& opts,
                    const std::string& scene_id) {
  const Condition<float> c = make_condition(cond);
  const FilterOptions saved = models.layout.filter;
  if (opts.nms_iou) models.layout.filter.nms_iou = *opts.nms_iou;
  LayoutSample ls;
  try {
    ls = sample_layout(models.layout, c, layout_seed(seed), opts.sampler);
  } catch (...) {
    models.layout.filter = saved;
    throw;
  }
  models.layout.filter = saved;
  if (ls.boxes.empty()) throw Error(ErrorCode::kEmptyLayout, "no layout box survived filtering");
  PipelineOptions inner = opts;
  if (opts.progress) {
    opts.progress(0.2);
    inner.progress = [&opts](double f) { opts.progress(0.2 + 0.8 * f); };
  }
  return generate_from_boxes(models, cond, ls.boxes, seed, inner, scene_id, "generated");
}

// ---------------------------------------------------------------------------
// Editing

namespace {

std::array<double, 3> vec3_array(const nlohmann::json& j, int op, const char* key) {
  try {
    return j.at(key).get<std::array<double, 3>>();
  } catch (const nlohmann::json::exception&) {
    throw EditError(op, "ops[" + std::to_string(op) + "]: '" + key + "' must be an array of 3 numbers");
  }
}

Aabb op_box(const nlohmann::json& j, int op) {
  const auto lo = vec3_array(j, op, "min");
  const auto hi = vec3_array(j, op, "max");
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(lo[a]) || !std::isfinite(hi[a]) || lo[a] < -1.0 || hi[a] > 1.0 || !(hi[a] > lo[a])) {
      throw EditError(op, "ops[" + std::to_string(op) + "]: box must have min < max inside [-1, 1]^3");
    }
  }
  return Aabb({lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]});
}

int op_part(const nlohmann::json& j, int op) {
  if (!j.contains("part_id") || !j["part_id"].is_number_integer()) {
    throw EditError(op, "ops[" + std::to_string(op) + "]: 'part_id' must be an integer");
  }
  return j["part_id"].get<int>();
}

}  // namespace

EditRequest parse_edit(const nlohmann::json& j) {
  if (!j.is_object()) throw EditError(-1, "edit request must be a JSON object");
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != 1) {
    throw EditError(-1, "edit request: 'version' must be 1");
  }
  EditRequest req;
  if (j.contains("ops")) {
    if (!j["ops"].is_array()) throw EditError(-1, "edit request: 'ops' must be an array");
    for (std::size_t i = 0; i < j["ops"].size(); ++i) {
      const auto& o = j["ops"][i];
      const int idx = static_cast<int>(i);
      if (!o.is_object() || !o.contains("op") || !o["op"].is_string()) {
        throw EditError(idx, "ops[" + std::to_string(i) + "]: missing 'op'");
      }
      const std::string kind = o["op"].get<std::string>();
      EditOp op;
      if (kind == "add") {
        op.kind = EditOp::Kind::kAdd;
        op.box = op_box(o, idx);
      } else if (kind == "delete") {
        op.kind = EditOp::Kind::kDelete;
        op.part_id = op_part(o, idx);
      } else if (kind == "transform") {
        op.kind = EditOp::Kind::kTransform;
        op.part_id = op_part(o, idx);
        op.box = op_box(o, idx);
      } else {
        throw EditError(idx, "ops[" + std::to_string(i) + "]: unknown op '" + kind + "'");
      }
      req.ops.push_back(op);
    }
  }
  if (j.contains("frozen")) {
    if (!j["frozen"].is_array()) throw EditError(-1, "edit request: 'frozen' must be an array of part ids");
    for (const auto& f : j["frozen"]) {
      if (!f.is_number_integer()) throw EditError(-1, "edit request: 'frozen' must be an array of part ids");
      req.frozen.push_back(f.get<int>());
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
      throw EditError(-1, "edit request: 'seed' must be a non-negative integer");
    }
    if (j["seed"].is_number_integer() && j["seed"].get<int64_t>() < 0) {
      throw EditError(-1, "edit request: 'seed' must be a non-negative integer");
    }
    req.seed = j["seed"].get<uint64_t>();
  }
  return req;
}

nlohmann::json edit_to_json(const EditRequest& req) {
  nlohmann::json ops = nlohmann::json::array();
  for (const EditOp& op : req.ops) {
    nlohmann::json o;
    const nlohmann::json lo = {op.box.min.x, op.box.min.y, op.box.min.z};
    const nlohmann::json hi = {op.box.max.x, op.box.max.y, op.box.max.z};
    switch (op.kind) {
      case EditOp::Kind::kAdd: o = {{"op", "add"}, {"min", lo}, {"max", hi}}; break;
      case EditOp::Kind::kDelete: o = {{"op", "delete"}, {"part_id", op.part_id}}; break;
      case EditOp::Kind::kTransform: o = {{"op", "transform"}, {"part_id", op.part_id}, {"min", lo}, {"max", hi}}; break;
    }
    ops.push_back(o);
  }
  return {{"version", 1}, {"ops", ops}, {"frozen", req.frozen}, {"seed", req.seed}};
}

void validate_edit(const SceneState& state, const EditRequest& req) {
  std::set<int> alive;
  for (const ScenePart& p : state.parts) alive.insert(p.part_id);
  std::set<int> edited;
  for (std::size_t i = 0; i < req.ops.size(); ++i) {
    const EditOp& op = req.ops[i];
    const int idx = static_cast<int>(i);
    if (op.kind == EditOp::Kind::kAdd) continue;
    if (!alive.count(op.part_id)) {
      throw EditError(idx, "ops[" + std::to_string(i) + "]: unknown part id " + std::to_string(op.part_id));
    }
    edited.insert(op.part_id);
    if (op.kind == EditOp::Kind::kDelete) alive.erase(op.part_id);
  }
  for (int f : req.frozen) {
    if (!state.find(f)) throw EditError(-1, "frozen: unknown part id " + std::to_string(f));
    if (edited.count(f)) {
      int idx = -1;
      for (std::size_t i = 0; i < req.ops.size(); ++i) {
        if (req.ops[i].kind != EditOp::Kind::kAdd && req.ops[i].part_id == f) {
          idx = static_cast<int>(i);
          break;
        }
      }
      throw EditError(idx, "part " + std::to_string(f) + " is both frozen and edited");
    }
  }
}

SceneState edit_scene(Models& models, const SceneState& state, const EditRequest& req, const PipelineOptions& opts) {
  validate_edit(state, req);
  const std::set<int> frozen(req.frozen.begin(), req.frozen.end());

  struct Slot {
    int part_id;
    Aabb box;
    const ScenePart* old;  // set for parts kept frozen
  };
  std::vector<Slot> slots;
  int next_id = 1;
  for (const ScenePart& p : state.parts) {
    slots.push_back({p.part_id, p.box, frozen.count(p.part_id) ? &p : nullptr});
    next_id = std::max(next_id, p.part_id + 1);
  }
  for (const EditOp& op : req.ops) {
    if (op.kind == EditOp::Kind::kAdd) {
      slots.push_back({next_id++, op.box, nullptr});
      continue;
    }
    auto it = std::find_if(slots.begin(), slots.end(), [&](const Slot& s) { return s.part_id == op.part_id; });
    if (op.kind == EditOp::Kind::kDelete) {
      slots.erase(it);
    } else {
      it->box = op.box;
    }
  }
  if (slots.empty()) throw Error(ErrorCode::kEmptyLayout, "edit leaves no parts");
  const bool clamp_global =
      req.ops.empty() && std::all_of(slots.begin(), slots.end(), [](const Slot& s) { return s.old != nullptr; });

  const Condition<float> c = make_condition(state.condition);
  std::vector<PartRequest> creq;
  for (const Slot& s : slots) {
    creq.push_back({s.part_id, s.box, s.old ? std::optional<SlotLatent>(s.old->coarse) : std::nullopt});
  }
  CoarseResult cr = generate_coarse(models.coarse.dit, models.coarse.opts, creq,
                                    clamp_global ? std::optional<SlotLatent>(state.coarse_global) : std::nullopt, c,
                                    coarse_seed(req.seed), opts.sampler);
  if (opts.progress) opts.progress(0.5);

  SceneState s;
  s.scene_id = state.scene_id;
  s.condition = state.condition;
  s.seed = req.seed;
  s.layout_source = req.ops.empty() ? state.layout_source : "edited";
  s.grid = state.grid;
  s.global = cr.global;
  s.coarse_global = cr.latents.global;
  std::vector<std::optional<SlotLatent>> refine_frozen;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    ScenePart p;
    p.part_id = slots[i].part_id;
    p.box = slots[i].box;
    p.grid = std::move(cr.parts[i].grid);
    p.coarse = std::move(cr.latents.parts[i]);
    if (slots[i].old) {
      p.coarse_seed = slots[i].old->coarse_seed;
      p.refine_seed = slots[i].old->refine_seed;
      refine_frozen.emplace_back(slots[i].old->refine);
    } else {
      p.coarse_seed = coarse_seed(req.seed);
      p.refine_seed = refine_seed(req.seed);
      refine_frozen.emplace_back(std::nullopt);
    }
    s.parts.push_back(std::move(p));
  }
  refine_parts(models, s, refine_frozen, clamp_global ? std::optional<SlotLatent>(state.refine_global) : std::nullopt,
               c, refine_seed(req.seed), opts);
  if (opts.progress) opts.progress(1.0);
  return s;
}

}  // namespace partgen
