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

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "partgen/pipeline.hpp"

namespace partgen {

// Scene directories: scene.json, parts/part_XX.{pvox,ply}, global.pvox,
// latents.bin. Written to a temporary sibling and renamed into place.

nlohmann::json scene_to_json(const SceneState& s);
void write_scene(const std::filesystem::path& dir, const SceneState& s);
SceneState read_scene(const std::filesystem::path& dir);
std::string part_file_stem(int part_id);

}  // namespace partgen
