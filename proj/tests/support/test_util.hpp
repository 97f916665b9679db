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
#include <string>

#include "partgen/geometry.hpp"
#include "partgen/rng.hpp"

namespace partgen::testing_util {

inline Aabb random_box(Rng& rng, double lo, double hi, double min_extent) {
  Vec3 a;
  Vec3 b;
  for (int k = 0; k < 3; ++k) {
    const double e = rng.uniform(min_extent, (hi - lo) * 0.6);
    const double m = rng.uniform(lo, hi - e);
    a[k] = m;
    b[k] = m + e;
  }
  return {a, b};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("partgen_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// FNV-1a over every regular file (relative path + bytes), in path order.
std::string hash_tree(const std::filesystem::path& dir);
std::string hash_bytes(const std::vector<uint8_t>& bytes);

}  // namespace partgen::testing_util
