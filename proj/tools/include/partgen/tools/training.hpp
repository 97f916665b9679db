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

#include <ostream>
#include <span>

#include "partgen/pipeline.hpp"
#include "partgen/synthdata.hpp"
#include "partgen/tools/settings.hpp"

namespace partgen::tools {

/// Stage trainers over an in-memory corpus. `log` receives one line every
/// `log_every` iterations when non-null.
struct TrainLog {
  std::ostream* out = nullptr;
  int every = 100;
};

LayoutModel train_layout(std::span<const ObjectSample> samples, const Settings& s, const TrainLog& log = {});
CoarseModel train_coarse(std::span<const ObjectSample> samples, const Settings& s, const TrainLog& log = {});
RefineModel train_refine(std::span<const ObjectSample> samples, const Settings& s, const TrainLog& log = {});

/// All three stages, in order.
Models train_all(std::span<const ObjectSample> samples, const Settings& s, const TrainLog& log = {});

}  // namespace partgen::tools
