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

// Acceptance suite: one PASS/FAIL line per criterion. The overfit models are
// trained through the partgen executable with configs/overfit.cfg and then
// scored in-process; later criteria reuse those checkpoints.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "partgen/error.hpp"
#include "partgen/eval.hpp"
#include "partgen/geometry.hpp"
#include "partgen/pipeline.hpp"
#include "partgen/scene_io.hpp"
#include "partgen/stages.hpp"
#include "partgen/synthdata.hpp"
#include "partgen/voxel.hpp"
#include "partgen/tools/settings.hpp"
#include "partgen/config.hpp"
#include "test_models.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace partgen;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

// Runs the partgen executable; stdout and stderr go to `log`.
int run_partgen(const std::vector<std::string>& args, const fs::path& log) {
  std::string cmd = quote(PARTGEN_CLI_PATH);
  for (const std::string& a : args) cmd += " " + quote(a);
  cmd += " > " + quote(log.string()) + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

struct Context {
  fs::path work;
  fs::path config = PARTGEN_OVERFIT_CONFIG;
  bool reuse = false;
  // Filled by the overfit criterion.
  std::optional<Models> models;
  std::vector<ObjectSample> samples;
  std::optional<SceneState> edit_base;
  fs::path checkpoints() const { return work / "checkpoints"; }
  fs::path data() const { return work / "data"; }
};

// ---------------------------------------------------------------------------

Outcome attention_oracle(Context&) {
  const Stopwatch sw;
  const testing_util::AttentionCheck r = testing_util::check_attention(50, 20260);
  const double t = sw.seconds();
  const bool ok = r.instances == 50 && r.intra_max_diff <= 1e-5 && r.inter_max_diff <= 1e-5 && t < 10.0;
  return {ok, "instances=" + std::to_string(r.instances) + " intra_max=" + fmt(r.intra_max_diff) +
                  " inter_max=" + fmt(r.inter_max_diff) + " (<=1e-5) time=" + fmt(t, 3) + "s (<10s)"};
}

Outcome cfm_gradient_check(Context&) {
  const Stopwatch sw;
  const testing_util::GradientCheck r = testing_util::check_cfm_gradients(31337);
  const double t = sw.seconds();
  const bool ok = r.checked > 0 && r.worst_relative <= 1e-3 && t < 60.0;
  return {ok, "checked=" + std::to_string(r.checked) + " worst_rel=" + fmt(r.worst_relative) + " at " + r.worst_param +
                  " (<=1e-3) time=" + fmt(t, 3) + "s (<60s)"};
}

Outcome center_corner_identity(Context&) {
  long compared = 0;
  long mismatched = 0;
  for (int n : {1, 2, 4, 16, 64}) {
    for (int z = 0; z < n; ++z) {
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          ++compared;
          if (!(cell_key(Aabb::unit(), {x, y, z}, n) == testing_util::global_grid_key({x, y, z}, n))) ++mismatched;
        }
      }
    }
  }
  const CenterCornerKey k = cell_key(Aabb::unit(), {0, 0, 0}, 64, 2048);
  bool worked = k.center == QuantCoord{16, 16, 16};
  for (int i = 0; i < 8; ++i) {
    worked = worked && k.corners[i] == QuantCoord{static_cast<uint16_t>(i & 1 ? 32 : 0),
                                                  static_cast<uint16_t>(i & 2 ? 32 : 0),
                                                  static_cast<uint16_t>(i & 4 ? 32 : 0)};
  }
  return {mismatched == 0 && worked, "cells=" + std::to_string(compared) + " mismatched=" + std::to_string(mismatched) +
                                         " worked_value=" + (worked ? "exact" : "wrong")};
}

Outcome full_resolution(Context&) {
  const Stopwatch sw;
  const Vec3 c{0.3137, -0.2011, 0.1093};
  const double r = 0.125;
  const Solid sphere(SphereSolid{c, r});
  const Aabb part(c - Vec3{r, r, r}, c + Vec3{r, r, r});
  const int n = 64;
  const VoxelGrid local = voxelize(sphere, part, n);
  const VoxelGrid global = voxelize(sphere, Aabb::unit(), n);
  const double iou_local = testing_util::reconstruction_iou(sphere, local, part, part, 192);
  const double iou_global = testing_util::reconstruction_iou(sphere, global, Aabb::unit(), part, 192);
  const double t = sw.seconds();
  const bool ok = iou_local > iou_global && iou_local >= 0.95 && t < 30.0;
  return {ok, "per_part_iou=" + fmt(iou_local) + " global_iou=" + fmt(iou_global) + " (per_part > global, >=0.95) time=" +
                  fmt(t, 3) + "s (<30s)"};
}

Outcome geometry_oracles(Context&) {
  Rng rng(4242);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Aabb a = testing_util::random_box(rng, -1.0, 1.0, 0.1);
    Aabb b = testing_util::random_box(rng, -1.0, 1.0, 0.1);
    if (i % 2 == 0) {
      const Vec3 shift = (a.center() - b.center()) * rng.uniform(0.3, 1.0);
      b = Aabb(b.min + shift, b.max + shift);
    }
    worst = std::max(worst, std::abs(iou(a, b) - testing_util::voxel_iou(a, b, 64)));
  }
  const bool worked = iou(Aabb({0, 0, 0}, {1, 1, 1}), Aabb({0.5, 0, 0}, {1.5, 1, 1})) == 1.0 / 3.0;

  double max_survivor = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Aabb> boxes;
    const Aabb seed_box = testing_util::random_box(rng, -0.8, 0.8, 0.2);
    for (int k = 0; k < 30; ++k) {
      if (k % 2 == 0) {
        const Vec3 j{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};
        boxes.emplace_back(seed_box.min + j, seed_box.max + j);
      } else {
        boxes.push_back(testing_util::random_box(rng, -1.0, 1.0, 0.05));
      }
    }
    const std::vector<Aabb> kept = nms(boxes, 0.7);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) max_survivor = std::max(max_survivor, iou(kept[i], kept[j]));
    }
  }
  const bool ok = worst <= 0.02 && worked && max_survivor <= 0.7;
  return {ok, "pairs=200 max_oracle_diff=" + fmt(worst) + " (<=0.02) worked_value=" + (worked ? "1/3 exact" : "wrong") +
                  " max_post_nms_iou=" + fmt(max_survivor) + " (<=0.7)"};
}

Outcome patchify_bijection(Context&) {
  Rng rng(16);
  int exact = 0;
  for (int i = 0; i < 500; ++i) {
    VoxelGrid g(16);
    const double density = rng.uniform(0.0, 1.0);
    for (std::size_t k = 0; k < g.size(); ++k) g.set(k, rng.bernoulli(density));
    if (tokens_to_occupancy(occupancy_to_tokens(g, 4), 16, 4) == g) ++exact;
  }
  return {exact == 500, "grids=500 exact_roundtrips=" + std::to_string(exact)};
}

// ---------------------------------------------------------------------------
// Overfit experiment

bool have_checkpoints(const Context& ctx) {
  return fs::exists(ctx.checkpoints() / kLayoutCheckpoint) && fs::exists(ctx.checkpoints() / kCoarseCheckpoint) &&
         fs::exists(ctx.checkpoints() / kRefineCheckpoint) && fs::exists(ctx.data() / "manifest.json");
}

Outcome overfit(Context& ctx) {
  const Stopwatch sw;
  const fs::path logs = ctx.work / "logs";
  fs::create_directories(logs);
  const std::string cfg = ctx.config.string();
  std::string trained = "reused";
  if (!(ctx.reuse && have_checkpoints(ctx))) {
    fs::remove_all(ctx.data());
    fs::remove_all(ctx.checkpoints());
    const std::vector<std::pair<std::string, std::vector<std::string>>> steps = {
        {"synth-data", {"synth-data", "--config", cfg, "--out", ctx.data().string()}},
        {"train-layout", {"train-layout", "--config", cfg, "--data", ctx.data().string(), "--out", ctx.checkpoints().string()}},
        {"train-coarse", {"train-coarse", "--config", cfg, "--data", ctx.data().string(), "--out", ctx.checkpoints().string()}},
        {"train-refine", {"train-refine", "--config", cfg, "--data", ctx.data().string(), "--out", ctx.checkpoints().string()}},
    };
    for (const auto& [name, args] : steps) {
      const Stopwatch step;
      const int rc = run_partgen(args, logs / (name + ".log"));
      std::cerr << "  " << name << " exit " << rc << " in " << fmt(step.seconds(), 4) << "s\n";
      if (rc != 0) return {false, name + " failed with exit " + std::to_string(rc) + "; see " + (logs / (name + ".log")).string()};
    }
    trained = "trained";
  }
  const double train_time = sw.seconds();

  const tools::Settings settings = tools::Settings::from_config(Config::load(ctx.config));
  ctx.models = Models::load(ctx.checkpoints());
  ctx.samples = load_samples(read_manifest(ctx.data()));
  const PipelineOptions popts = settings.pipeline_options();

  double f_sum = 0.0;
  double f_min = 1.0;
  double pcd_sum = 0.0;
  double pcd_max = 0.0;
  int empty_layouts = 0;
  std::ostringstream per;
  for (std::size_t i = 0; i < ctx.samples.size(); ++i) {
    const ObjectSample& o = ctx.samples[i];
    const ConditionRef cond{o.category, o.seed};
    double f = 0.0;
    try {
      SceneState full = run_full(*ctx.models, cond, 7, popts);
      f = evaluate_scene(full, settings.eval).fscore;
      if (!ctx.edit_base) ctx.edit_base = std::move(full);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyLayout) throw;
      ++empty_layouts;
    }
    const SceneState gt = generate_from_boxes(*ctx.models, cond, o.boxes(), 7, popts);
    const double pcd = evaluate_scene(gt, settings.eval, true).part_chamfer.value();
    f_sum += f;
    f_min = std::min(f_min, f);
    pcd_sum += pcd;
    pcd_max = std::max(pcd_max, pcd);
    per << " " << o.category << ":F=" << fmt(f, 3) << ",PCD=" << fmt(pcd, 3);
  }
  const double n = static_cast<double>(ctx.samples.size());
  const double f_mean = f_sum / n;
  const double pcd_mean = pcd_sum / n;
  const double total = sw.seconds();
  const bool ok = ctx.samples.size() == 8 && f_mean >= 0.9 && pcd_mean <= 0.1 && total <= 1800.0;
  std::cerr << "  per-sample:" << per.str() << "\n";
  return {ok, "objects=" + std::to_string(ctx.samples.size()) + " mean_F@0.1=" + fmt(f_mean) + " (>=0.9) min_F=" +
                  fmt(f_min) + " mean_PartCD=" + fmt(pcd_mean) + " (<=0.1) max_PartCD=" + fmt(pcd_max) +
                  " empty_layouts=" + std::to_string(empty_layouts) + " checkpoints=" + trained +
                  " train_time=" + fmt(train_time, 4) + "s total=" + fmt(total, 4) + "s (<=1800s)"};
}

// ---------------------------------------------------------------------------

std::vector<std::string> part_hashes(const SceneState& s) {
  std::vector<std::string> h;
  for (const ScenePart& p : s.parts) h.push_back(testing_util::hash_bytes(encode_pvox(p.grid)));
  return h;
}

Outcome editing_exactness(Context& ctx) {
  if (!ctx.models) return {false, "overfit checkpoints unavailable"};
  const Stopwatch sw;
  SceneState base;
  if (ctx.edit_base) {
    base = *ctx.edit_base;
  } else {
    const ObjectSample& o = ctx.samples.front();
    base = generate_from_boxes(*ctx.models, {o.category, o.seed}, o.boxes(), 7);
  }
  const fs::path root = ctx.work / "edit";
  fs::remove_all(root);
  write_scene(root / "base", base);

  EditRequest freeze;
  for (const ScenePart& p : base.parts) freeze.frozen.push_back(p.part_id);
  freeze.seed = base.seed;
  const SceneState same = edit_scene(*ctx.models, base, freeze);
  const auto h0 = part_hashes(base);
  const auto h1 = part_hashes(same);
  int freeze_changed = static_cast<int>(h0.size() != h1.size());
  for (std::size_t i = 0; i < std::min(h0.size(), h1.size()); ++i) freeze_changed += h0[i] != h1[i];

  // Stretch one box along its longest axis, everything else frozen.
  const ScenePart& target = base.parts.front();
  Aabb stretched = target.box;
  const Vec3 e = stretched.extent();
  const int axis = e.x >= e.y && e.x >= e.z ? 0 : (e.y >= e.z ? 1 : 2);
  stretched.max[axis] = std::min(1.0, stretched.max[axis] + 0.3 * e[axis]);
  stretched.min[axis] = std::max(-1.0, stretched.min[axis] - 0.3 * e[axis]);
  EditRequest one;
  one.ops.push_back({EditOp::Kind::kTransform, target.part_id, stretched});
  for (const ScenePart& p : base.parts) {
    if (p.part_id != target.part_id) one.frozen.push_back(p.part_id);
  }
  one.seed = base.seed + 1;
  const SceneState edited = edit_scene(*ctx.models, base, one);
  const auto h2 = part_hashes(edited);
  int changed = 0;
  bool target_changed = false;
  for (std::size_t i = 0; i < std::min(h0.size(), h2.size()); ++i) {
    if (h0[i] != h2[i]) {
      ++changed;
      target_changed = target_changed || base.parts[i].part_id == target.part_id;
    }
  }
  const double t = sw.seconds();
  const bool ok = freeze_changed == 0 && h2.size() == h0.size() && changed == 1 && target_changed && t < 120.0;
  return {ok, "parts=" + std::to_string(h0.size()) + " freeze_all_changed=" + std::to_string(freeze_changed) +
                  " (0) single_edit_changed=" + std::to_string(changed) + " (1, the edited part: " +
                  (target_changed ? "yes" : "no") + ") time=" + fmt(t, 3) + "s (<120s)"};
}

Outcome sequential_sampling(Context&) {
  Models m = testing_util::tiny_models(35, 30);
  Rng rng(77);
  std::vector<Aabb> boxes;
  for (int i = 0; i < 35; ++i) boxes.push_back(random_box(rng, 0.1));
  const ObjectSample cond_obj = generate_sample(5, "robot");
  const ConditionRef cond{cond_obj.category, cond_obj.seed};
  PipelineOptions popts;
  popts.sampler.steps = 6;
  const SceneState scene = generate_from_boxes(m, cond, boxes, 3, popts);

  // Record the global slot in every round and recompute round >= 2 from the
  // round-1 endpoint and an independently drawn noise stream.
  std::vector<PartRequest> parts;
  for (int i = 0; i < 35; ++i) parts.push_back({i + 1, boxes[i], std::nullopt});
  struct Step {
    int round;
    double t;
    nn::Mat<float> rows;
  };
  std::vector<Step> steps;
  const RoundObserver obs = [&](int round, const nn::Mat<float>& x, double t, std::span<const SlotRange> slots) {
    steps.push_back({round, t, x.middleRows(slots[0].begin, slots[0].end - slots[0].begin)});
  };
  const uint64_t seed = 9;
  const CoarseResult r =
      generate_coarse(m.coarse.dit, m.coarse.opts, parts, std::nullopt, make_condition(cond), seed, popts.sampler, obs);
  std::optional<nn::Mat<float>> x0;
  for (const Step& s : steps) {
    if (s.round == 1 && s.t == 0.0) x0 = s.rows;
  }
  int checked = 0;
  int mismatched = 0;
  if (x0) {
    Rng nr(derive_seed(seed, 0));
    const nn::Mat<float> eps = gaussian<float>(x0->rows(), x0->cols(), nr);
    for (const Step& s : steps) {
      if (s.round < 2) continue;
      ++checked;
      const nn::Mat<float> want = static_cast<float>(1.0 - s.t) * *x0 + static_cast<float>(s.t) * eps;
      if (!(s.rows == want)) ++mismatched;
    }
  }
  const int expected = (r.latents.rounds - 1) * (popts.sampler.steps + 1);
  const bool ok = scene.parts.size() == 35 && r.latents.rounds == 2 && x0 && checked == expected && checked > 0 &&
                  mismatched == 0;
  return {ok, "parts=" + std::to_string(scene.parts.size()) + " (35) rounds=" + std::to_string(r.latents.rounds) +
                  " global_steps_checked=" + std::to_string(checked) + " mismatched=" + std::to_string(mismatched)};
}

Outcome determinism(Context& ctx) {
  if (!have_checkpoints(ctx)) return {false, "overfit checkpoints unavailable"};
  const ObjectSample o = generate_sample(derive_seed(42, 0), category_names()[0]);
  const fs::path root = ctx.work / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  std::vector<std::string> hashes;
  for (const char* run : {"a", "b"}) {
    const int rc = run_partgen({"generate", "--config", ctx.config.string(), "--checkpoint", ctx.checkpoints().string(),
                                "--category", o.category, "--sample-seed", std::to_string(o.seed), "--seed", "7",
                                "--out", (root / run).string()},
                               root / (std::string(run) + ".log"));
    if (rc != 0) return {false, std::string("generate run ") + run + " exited " + std::to_string(rc)};
    hashes.push_back(testing_util::hash_tree(root / run));
  }
  return {hashes[0] == hashes[1], "run_a=" + hashes[0] + " run_b=" + hashes[1]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  Context ctx;
  std::string work = (fs::temp_directory_path() / "partgen_acceptance").string();
  std::vector<std::string> only;
  app.add_option("--work", work, "Working directory for data, checkpoints and scenes");
  app.add_option("--config", ctx.config, "Overfit config");
  app.add_option("--only", only, "Run only these criteria");
  app.add_flag("--reuse", ctx.reuse, "Reuse overfit checkpoints found in the work directory");
  CLI11_PARSE(app, argc, argv);
  ctx.work = work;
  fs::create_directories(ctx.work);

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria = {
      {"attention_oracle", attention_oracle},
      {"cfm_gradient_check", cfm_gradient_check},
      {"center_corner_identity", center_corner_identity},
      {"full_resolution", full_resolution},
      {"geometry_oracles", geometry_oracles},
      {"patchify_bijection", patchify_bijection},
      {"overfit", overfit},
      {"editing_exactness", editing_exactness},
      {"sequential_sampling", sequential_sampling},
      {"determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome o;
    try {
      o = fn(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
