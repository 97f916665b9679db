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

#include "partgen/tools/settings.hpp"

#include "partgen/error.hpp"
#include "partgen/synthdata.hpp"

namespace partgen::tools {

namespace {

constexpr const char* kStages[] = {"layout", "coarse", "refine"};
constexpr const char* kModelKeys[] = {"depth", "width", "heads", "ffn_mult", "time_dim", "seed"};
constexpr const char* kTrainKeys[] = {"iters", "batch", "lr", "warmup", "min_lr_ratio", "drop_prob", "seed"};

[[noreturn]] void out_of_range(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::kConfig, "invalid value for '" + key + "': " + what);
}

int positive(const Config& cfg, const std::string& key, int fallback) {
  const int v = cfg.get_int(key, fallback);
  if (v <= 0) out_of_range(key, "must be positive");
  return v;
}

double unit_interval(const Config& cfg, const std::string& key, double fallback) {
  const double v = cfg.get_double(key, fallback);
  if (v < 0.0 || v > 1.0) out_of_range(key, "must lie in [0, 1]");
  return v;
}

StageSettings read_stage(const Config& cfg, const std::string& stage, uint64_t seed, int index, int kmax) {
  StageSettings s;
  const std::string m = stage + ".";
  s.model.depth = positive(cfg, m + "depth", 8);
  if (s.model.depth % 2 != 0) out_of_range(m + "depth", "must be even");
  s.model.width = positive(cfg, m + "width", 128);
  s.model.heads = positive(cfg, m + "heads", 4);
  if (s.model.width % s.model.heads != 0) out_of_range(m + "heads", "must divide " + m + "width");
  s.model.ffn_mult = positive(cfg, m + "ffn_mult", 4);
  s.model.time_dim = positive(cfg, m + "time_dim", 64);
  if (s.model.time_dim % 2 != 0) out_of_range(m + "time_dim", "must be even");
  s.model.seed = cfg.get_u64(m + "seed", derive_seed(seed, static_cast<uint64_t>(index) + 0x100));
  s.model.kmax = kmax;
  s.model.cond_tokens = kConditionTokens;
  s.model.cond_dim = kConditionDim;

  const std::string t = stage + ".train.";
  s.train.iters = positive(cfg, t + "iters", 1000);
  s.train.batch = positive(cfg, t + "batch", 4);
  s.train.lr = cfg.get_double(t + "lr", 1e-3);
  if (s.train.lr <= 0.0) out_of_range(t + "lr", "must be positive");
  s.train.warmup = cfg.get_int(t + "warmup", 50);
  if (s.train.warmup < 0) out_of_range(t + "warmup", "must be non-negative");
  s.train.min_lr_ratio = unit_interval(cfg, t + "min_lr_ratio", 0.1);
  s.train.drop_prob = unit_interval(cfg, t + "drop_prob", 0.1);
  s.train.seed = cfg.get_u64(t + "seed", derive_seed(seed, static_cast<uint64_t>(index) + 0x200));
  return s;
}

}  // namespace

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k = {"data_dir",  "checkpoint_dir", "store_dir",      "seed",          "grid",
                               "patch",     "refine.budget",  "kmax",           "steps",         "cfg_scale",
                               "nms_iou",   "synth.n",        "synth.seed",     "synth.categories",
                               "layout.tokens", "layout.channels", "codec.steps", "codec.lr", "codec.batch",
                               "coarse.augment", "eval.points", "eval.tau", "eval.seed", "serve.host",
                               "serve.port", "serve.workers"};
    for (const char* s : kStages) {
      for (const char* m : kModelKeys) k.insert(std::string(s) + "." + m);
      for (const char* t : kTrainKeys) k.insert(std::string(s) + ".train." + t);
    }
    return k;
  }();
  return keys;
}

CoarseOptions Settings::coarse_options() const {
  CoarseOptions o;
  o.grid = grid;
  o.patch = resolved_patch();
  return o;
}

RefineOptions Settings::refine_options() const {
  RefineOptions o;
  o.grid = grid;
  o.patch = resolved_patch();
  o.budget = refine_budget;
  return o;
}

PipelineOptions Settings::pipeline_options() const {
  PipelineOptions o;
  o.sampler = sampler;
  o.nms_iou = nms_iou;
  return o;
}

Settings Settings::from_config(const Config& cfg) {
  const auto unknown = cfg.unknown_keys(known_keys());
  if (!unknown.empty()) throw Error(ErrorCode::kConfig, "unknown config key '" + unknown.front() + "'");

  Settings s;
  s.data_dir = partgen::data_dir(cfg);
  s.checkpoint_dir = cfg.get_string("checkpoint_dir", s.checkpoint_dir.string());
  s.store_dir = cfg.get_string("store_dir", s.store_dir.string());
  s.seed = cfg.get_u64("seed", 0);
  s.grid = positive(cfg, "grid", 64);
  s.patch = cfg.get_int("patch", 0);
  if (s.patch < 0) out_of_range("patch", "must be non-negative");
  if (s.grid % s.resolved_patch() != 0) out_of_range("patch", "must divide grid");
  s.refine_budget = positive(cfg, "refine.budget", 64);
  s.kmax = positive(cfg, "kmax", 30);
  s.sampler.steps = positive(cfg, "steps", 50);
  s.sampler.cfg_scale = cfg.get_double("cfg_scale", 3.5);
  s.nms_iou = unit_interval(cfg, "nms_iou", 0.7);

  s.synth_n = positive(cfg, "synth.n", 100);
  s.synth_seed = cfg.get_u64("synth.seed", 0);
  s.synth_categories = cfg.get_list("synth.categories", category_names());
  for (const std::string& c : s.synth_categories) {
    try {
      require_category(c);
    } catch (const Error&) {
      out_of_range("synth.categories", "unknown category '" + c + "'");
    }
  }
  if (s.synth_categories.empty()) out_of_range("synth.categories", "must not be empty");

  s.layout_tokens = positive(cfg, "layout.tokens", 8);
  s.layout_channels = positive(cfg, "layout.channels", 8);
  s.codec.steps = positive(cfg, "codec.steps", s.codec.steps);
  s.codec.batch = positive(cfg, "codec.batch", s.codec.batch);
  s.codec.lr = cfg.get_double("codec.lr", s.codec.lr);
  if (s.codec.lr <= 0.0) out_of_range("codec.lr", "must be positive");
  s.codec.seed = derive_seed(s.seed, 0x300);
  s.augment = cfg.get_bool("coarse.augment", true);
  s.layout = read_stage(cfg, "layout", s.seed, 0, s.kmax);
  s.coarse = read_stage(cfg, "coarse", s.seed, 1, s.kmax);
  s.refine = read_stage(cfg, "refine", s.seed, 2, s.kmax);

  s.eval.points = static_cast<std::size_t>(positive(cfg, "eval.points", 4096));
  s.eval.tau = cfg.get_double("eval.tau", 0.1);
  if (s.eval.tau <= 0.0) out_of_range("eval.tau", "must be positive");
  s.eval.seed = cfg.get_u64("eval.seed", 0);

  s.host = cfg.get_string("serve.host", s.host);
  s.port = cfg.get_int("serve.port", s.port);
  if (s.port < 0 || s.port > 65535) out_of_range("serve.port", "must be a TCP port");
  s.workers = positive(cfg, "serve.workers", 1);
  return s;
}

}  // namespace partgen::tools
