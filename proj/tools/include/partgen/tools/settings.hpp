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
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "partgen/config.hpp"
#include "partgen/eval.hpp"
#include "partgen/stages.hpp"

namespace partgen::tools {

struct StageSettings {
  ModelConfig model;
  TrainOptions train;
};

/// Everything the CLI and server read from the config file. Command-line
/// flags are applied on top by the caller.
struct Settings {
  std::filesystem::path data_dir = "data";
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path store_dir = "scenes";

  uint64_t seed = 0;
  int grid = 64;
  int patch = 0;  // 0: grid / 4
  int refine_budget = 64;
  int kmax = 30;
  SamplerOptions sampler;
  double nms_iou = 0.7;

  int synth_n = 100;
  uint64_t synth_seed = 0;
  std::vector<std::string> synth_categories;

  int layout_tokens = 8;
  int layout_channels = 8;
  BoxCodec::TrainOptions codec;
  bool augment = true;
  StageSettings layout;
  StageSettings coarse;
  StageSettings refine;

  EvalOptions eval;

  std::string host = "127.0.0.1";
  int port = 8080;
  int workers = 1;

  int resolved_patch() const { return patch > 0 ? patch : std::max(1, grid / 4); }
  CoarseOptions coarse_options() const;
  RefineOptions refine_options() const;
  PipelineOptions pipeline_options() const;

  /// Reads every documented key; unknown keys and out-of-range values throw
  /// Error(kConfig) naming the key.
  static Settings from_config(const Config& cfg);
};

const std::set<std::string>& known_keys();

}  // namespace partgen::tools
