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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "partgen/error.hpp"
#include "partgen/stages.hpp"
#include "partgen/synthdata.hpp"

namespace partgen {

/// The three stage checkpoints, loaded from layout.ptns, coarse.ptns and
/// refine.ptns inside one directory.
struct Models {
  LayoutModel layout;
  CoarseModel coarse;
  RefineModel refine;

  static Models load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;
};

inline constexpr const char* kLayoutCheckpoint = "layout.ptns";
inline constexpr const char* kCoarseCheckpoint = "coarse.ptns";
inline constexpr const char* kRefineCheckpoint = "refine.ptns";

/// A condition is named by the synthetic object it is rendered from.
struct ConditionRef {
  std::string category;
  uint64_t seed = 0;
  friend bool operator==(const ConditionRef&, const ConditionRef&) = default;
};

struct ScenePart {
  int part_id = 0;
  Aabb box;
  VoxelGrid grid;
  std::vector<std::array<float, 3>> colors;  // per occupied voxel
  uint64_t coarse_seed = 0;  // stage seed the part's noise was drawn under
  uint64_t refine_seed = 0;
  SlotLatent coarse;
  SlotLatent refine;
};

struct SceneState {
  static constexpr int kVersion = 1;
  std::string scene_id;
  ConditionRef condition;
  uint64_t seed = 0;
  /// "generated" (sampled layout), "ground_truth" (boxes of the condition
  /// object) or "edited".
  std::string layout_source = "generated";
  int grid = 16;
  std::vector<ScenePart> parts;
  VoxelGrid global;
  SlotLatent coarse_global;
  SlotLatent refine_global;

  const ScenePart* find(int part_id) const;
};

struct PipelineOptions {
  SamplerOptions sampler;
  std::optional<double> nms_iou;  // overrides the checkpoint's filter
  /// Called with the completed fraction after each stage.
  std::function<void(double)> progress;
};

uint64_t layout_seed(uint64_t seed);
uint64_t coarse_seed(uint64_t seed);
uint64_t refine_seed(uint64_t seed);

Condition<float> make_condition(const ConditionRef& ref);
/// "{category}-{low 32 bits of the condition seed, hex}-{seed}".
std::string default_scene_id(const ConditionRef& cond, uint64_t seed);

/// Layout sampling, decode/filter, coarse occupancy and refinement.
/// Throws Error(kEmptyLayout) when no box survives filtering.
SceneState run_full(Models& models, const ConditionRef& cond, uint64_t seed, const PipelineOptions& opts = {},
                    const std::string& scene_id = "");

/// Stages 2 and 3 over given boxes (part ids 1..K). More than kmax boxes are
/// sampled sequentially.
SceneState generate_from_boxes(Models& models, const ConditionRef& cond, std::span<const Aabb> boxes, uint64_t seed,
                               const PipelineOptions& opts = {}, const std::string& scene_id = "",
                               const std::string& layout_source = "ground_truth");

struct EditOp {
  enum class Kind { kAdd, kDelete, kTransform };
  Kind kind = Kind::kAdd;
  int part_id = 0;  // delete / transform
  Aabb box;         // add / transform
};

struct EditRequest {
  std::vector<EditOp> ops;
  std::vector<int> frozen;
  uint64_t seed = 0;
};

/// Invalid edit request; `op_index` is the offending op or -1.
class EditError : public Error {
 public:
  EditError(int op_index, const std::string& what) : Error(ErrorCode::kInvalidArgument, what), op_index_(op_index) {}
  int op_index() const noexcept { return op_index_; }

 private:
  int op_index_;
};

/// {"version": 1, "ops": [...], "frozen": [...], "seed": n}. Throws
/// EditError naming the offending op.
EditRequest parse_edit(const nlohmann::json& j);
nlohmann::json edit_to_json(const EditRequest& req);
/// Checks ids against the scene and that no frozen part is edited.
void validate_edit(const SceneState& state, const EditRequest& req);

/// Applies the ops, then regenerates: frozen parts are clamped to their
/// recorded latents at every sampler step (stages 2 and 3), the rest sample
/// freely under the request seed. The global slots are clamped as well when
/// the request has no ops and freezes every part.
SceneState edit_scene(Models& models, const SceneState& state, const EditRequest& req,
                      const PipelineOptions& opts = {});

}  // namespace partgen
