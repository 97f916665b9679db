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
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "partgen/geometry.hpp"
#include "partgen/mesh.hpp"
#include "partgen/nn/tensor.hpp"
#include "partgen/solid.hpp"

namespace partgen {

const std::vector<std::string>& category_names();
/// Throws Error(kInvalidArgument) for an unknown name.
void require_category(std::string_view category);

struct SynthPart {
  int part_id = 0;  // 1-based
  std::string name;
  Aabb box;         // tight bounds of `solid`
  Primitive solid;
  Rgb8 color;
};

/// Three orthographic binary silhouettes. View v looks along axis v; pixel
/// (i, j) covers the next two axes in cyclic order (X: (y, z), Y: (z, x),
/// Z: (x, y)) with i along the first of them.
struct Silhouettes {
  static constexpr int kRes = 32;
  std::array<std::vector<uint8_t>, 3> views;
  bool at(int view, int i, int j) const { return views[view][static_cast<std::size_t>(i * kRes + j)] != 0; }
  friend bool operator==(const Silhouettes&, const Silhouettes&) = default;
};

struct ObjectSample {
  std::string sample_id;
  uint64_t seed = 0;
  std::string category;
  std::vector<SynthPart> parts;
  Silhouettes condition;

  Solid solid() const;
  std::vector<Aabb> boxes() const;
};

ObjectSample generate_sample(uint64_t seed, std::string_view category);

/// Pixel (i, j) is set when the projection of the solid covers the pixel
/// center.
Silhouettes rasterize_condition(const Solid& solid);
Silhouettes rasterize_condition(const ObjectSample& sample);

/// 8x8 pixel patches of every view as condition tokens: 48 x 64, values +-1.
inline constexpr int kConditionTokens = 3 * (Silhouettes::kRes / 8) * (Silhouettes::kRes / 8);
inline constexpr int kConditionDim = 64;
nn::Mat<float> condition_patches(const Silhouettes& s);

/// Synthetic per-voxel color: the part's palette color with a mild
/// height-dependent shading, in [0, 1].
std::array<float, 3> voxel_color(const SynthPart& part, const Vec3& global_point);

nlohmann::json primitive_to_json(const Primitive& p);
Primitive primitive_from_json(const nlohmann::json& j);
nlohmann::json sample_to_json(const ObjectSample& s);

struct ManifestEntry {
  std::string id;
  uint64_t seed = 0;
  std::string category;
  std::vector<std::string> files;
};

struct DatasetManifest {
  static constexpr int kVersion = 1;
  uint64_t base_seed = 0;
  int grid = 16;
  std::vector<std::string> categories;
  std::vector<ManifestEntry> samples;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

/// Sample i uses category categories[i % size] and seed
/// derive_seed(base_seed, i). Writes manifest.json and, per sample, a JSON
/// description plus one PVOX per part (canonical frame) and global.pvox.
DatasetManifest build_dataset(uint64_t base_seed, std::span<const std::string> categories, int n, int grid,
                              const std::filesystem::path& out_dir);
DatasetManifest read_manifest(const std::filesystem::path& dir);
/// Regenerates every sample from the manifest's seeds.
std::vector<ObjectSample> load_samples(const DatasetManifest& manifest);

}  // namespace partgen
