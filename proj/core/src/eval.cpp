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

#include "partgen/eval.hpp"

#include <cstdio>
#include <map>

#include "partgen/error.hpp"
#include "partgen/metrics.hpp"
#include "partgen/rng.hpp"

namespace partgen {

PointCloud sample_primitives(std::span<const Primitive> prims, std::size_t count, uint64_t seed) {
  PointCloud cloud;
  if (count == 0) return cloud;
  std::vector<double> cumulative;
  double total = 0.0;
  for (const Primitive& p : prims) {
    total += surface_area(p);
    cumulative.push_back(total);
  }
  if (prims.empty() || total <= 0.0) throw Error(ErrorCode::kEmptyInput, "sample_primitives: no surface");
  Rng rng(seed);
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double pick = rng.uniform() * total;
    std::size_t k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) -
                                             cumulative.begin());
    k = std::min(k, prims.size() - 1);
    cloud.points.push_back(sample_surface_point(prims[k], rng));
  }
  return cloud;
}

GlobalMetrics compare_clouds(const PointCloud& pred, const PointCloud& gt, double tau) {
  return {fscore(pred, gt, tau), chamfer(pred, gt)};
}

GlobalMetrics eval_global(std::span<const PartMesh> pred, const ObjectSample& gt, const EvalOptions& opts) {
  const TriMesh merged = merge_meshes(pred);
  if (merged.empty()) throw Error(ErrorCode::kEmptyInput, "eval_global: empty prediction");
  std::vector<Primitive> prims;
  for (const SynthPart& p : gt.parts) prims.push_back(p.solid);
  const PointCloud a = sample_surface(merged, opts.points, derive_seed(opts.seed, 1));
  const PointCloud b = sample_primitives(prims, opts.points, derive_seed(opts.seed, 2));
  return compare_clouds(a, b, opts.tau);
}

double eval_parts(std::span<const PartOccupancy> pred, const ObjectSample& gt, const EvalOptions& opts) {
  if (pred.size() != gt.parts.size()) {
    throw Error(ErrorCode::kNotApplicable, "Part-CD needs the ground-truth layout: part count " +
                                               std::to_string(pred.size()) + " vs " +
                                               std::to_string(gt.parts.size()));
  }
  std::map<int, const SynthPart*> by_id;
  for (const SynthPart& p : gt.parts) by_id[p.part_id] = &p;
  double sum = 0.0;
  for (const PartOccupancy& p : pred) {
    const auto it = by_id.find(p.part_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kNotApplicable, "Part-CD: no ground-truth part with id " + std::to_string(p.part_id));
    }
    const SynthPart& g = *it->second;
    const uint64_t s = derive_seed(opts.seed, 100 + static_cast<uint64_t>(p.part_id));
    PointCloud gt_cloud = sample_primitives(std::span<const Primitive>(&g.solid, 1), opts.points, s);
    for (Vec3& q : gt_cloud.points) q = to_canonical(g.box, q);
    PointCloud pred_cloud;
    if (p.empty()) {
      pred_cloud.points.push_back({0, 0, 0});
    } else {
      pred_cloud = sample_surface(grid_to_cubes(p.grid, Aabb::unit()), opts.points, derive_seed(s, 1));
    }
    sum += chamfer(pred_cloud, gt_cloud);
  }
  return sum / static_cast<double>(pred.size());
}

SampleMetrics evaluate_scene(const SceneState& scene, const EvalOptions& opts, bool require_parts) {
  const ObjectSample gt = generate_sample(scene.condition.seed, scene.condition.category);
  const bool parts_ok = scene.layout_source == "ground_truth";
  if (require_parts && !parts_ok) {
    throw Error(ErrorCode::kNotApplicable,
                "Part-CD is not applicable: scene layout is '" + scene.layout_source + "', not ground_truth");
  }
  std::vector<PartOccupancy> occ;
  for (const ScenePart& p : scene.parts) occ.push_back({p.part_id, p.box, p.grid});
  SampleMetrics m;
  m.scene_id = scene.scene_id;
  m.sample_id = gt.sample_id;
  const GlobalMetrics g = eval_global(assemble(occ), gt, opts);
  m.fscore = g.fscore;
  m.chamfer = g.chamfer;
  if (parts_ok) m.part_chamfer = eval_parts(occ, gt, opts);
  return m;
}

double EvalReport::mean_fscore() const {
  double s = 0.0;
  for (const auto& m : samples) s += m.fscore;
  return samples.empty() ? 0.0 : s / static_cast<double>(samples.size());
}

double EvalReport::mean_chamfer() const {
  double s = 0.0;
  for (const auto& m : samples) s += m.chamfer;
  return samples.empty() ? 0.0 : s / static_cast<double>(samples.size());
}

std::optional<double> EvalReport::mean_part_chamfer() const {
  double s = 0.0;
  int n = 0;
  for (const auto& m : samples) {
    if (!m.part_chamfer) continue;
    s += *m.part_chamfer;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return s / n;
}

std::string EvalReport::config_hash() const {
  const std::string key = "points=" + std::to_string(options.points) + ";tau=" + std::to_string(options.tau) +
                          ";seed=" + std::to_string(options.seed) + ";chamfer=l2-unsquared";
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : key) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  std::size_t with_parts = 0;
  for (const auto& m : samples) {
    nlohmann::json r = {{"scene_id", m.scene_id}, {"sample_id", m.sample_id}, {"fscore", m.fscore},
                        {"chamfer", m.chamfer}};
    r["part_chamfer"] = m.part_chamfer ? nlohmann::json(*m.part_chamfer) : nlohmann::json(nullptr);
    if (m.part_chamfer) ++with_parts;
    rows.push_back(r);
  }
  const auto pc = mean_part_chamfer();
  return {{"version", kVersion},
          {"seed", options.seed},
          {"points", options.points},
          {"tau", options.tau},
          {"config_hash", config_hash()},
          {"count", samples.size()},
          {"part_count", with_parts},
          {"fscore", mean_fscore()},
          {"chamfer", mean_chamfer()},
          {"part_chamfer", pc ? nlohmann::json(*pc) : nlohmann::json(nullptr)},
          {"samples", rows}};
}

std::string EvalReport::table() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %10s %10s %10s\n", "scene", "F-Score", "CD", "Part-CD");
  out += line;
  auto row = [&](const std::string& name, double f, double cd, std::optional<double> pc) {
    char pcs[32] = "n/a";
    if (pc) std::snprintf(pcs, sizeof(pcs), "%.4f", *pc);
    std::snprintf(line, sizeof(line), "%-28s %10.4f %10.4f %10s\n", name.c_str(), f, cd, pcs);
    out += line;
  };
  for (const auto& m : samples) row(m.scene_id, m.fscore, m.chamfer, m.part_chamfer);
  row("mean", mean_fscore(), mean_chamfer(), mean_part_chamfer());
  return out;
}

}  // namespace partgen
