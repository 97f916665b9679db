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

#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "partgen/mesh.hpp"
#include "partgen/pipeline.hpp"
#include "partgen/solid.hpp"
#include "partgen/synthdata.hpp"

namespace partgen {

struct EvalOptions {
  std::size_t points = 4096;
  double tau = 0.1;
  uint64_t seed = 0;
};

struct GlobalMetrics {
  double fscore = 0.0;
  double chamfer = 0.0;
};

/// Area-weighted surface samples over a set of primitives.
PointCloud sample_primitives(std::span<const Primitive> prims, std::size_t count, uint64_t seed);

GlobalMetrics compare_clouds(const PointCloud& pred, const PointCloud& gt, double tau);
/// Union surface of the predicted part meshes against the analytic object.
GlobalMetrics eval_global(std::span<const PartMesh> pred, const ObjectSample& gt, const EvalOptions& opts = {});

/// Mean over parts of the chamfer distance in each part's canonical frame.
/// Parts are matched by id; a count or id mismatch throws
/// Error(kNotApplicable). An empty predicted part is scored against a single
/// point at the canonical origin.
double eval_parts(std::span<const PartOccupancy> pred, const ObjectSample& gt, const EvalOptions& opts = {});

struct SampleMetrics {
  std::string scene_id;
  std::string sample_id;
  double fscore = 0.0;
  double chamfer = 0.0;
  std::optional<double> part_chamfer;
};

/// Metrics for a scene against the object its condition was rendered from.
/// Part-CD is computed for ground-truth layouts only; with
/// `require_parts` any other layout throws Error(kNotApplicable).
SampleMetrics evaluate_scene(const SceneState& scene, const EvalOptions& opts = {}, bool require_parts = false);

struct EvalReport {
  static constexpr int kVersion = 1;
  std::vector<SampleMetrics> samples;
  EvalOptions options;

  double mean_fscore() const;
  double mean_chamfer() const;
  /// Mean over samples that have a part score.
  std::optional<double> mean_part_chamfer() const;
  std::string config_hash() const;
  nlohmann::json to_json() const;
  /// Aligned text table: one row per sample plus the mean.
  std::string table() const;
};

}  // namespace partgen
