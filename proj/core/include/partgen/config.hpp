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
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace partgen {

/// Flat `key = value` configuration. `#` starts a comment; keys are dotted
/// paths such as `coarse.depth`. Lookups of malformed values throw
/// Error(kConfig) naming the key and the line it came from.
class Config {
 public:
  static Config parse(std::string_view text, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list.
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

  /// Throws Error(kConfig) for the first key that is missing.
  void require(std::initializer_list<const char*> keys) const;
  /// Keys present in the file but not in `known`.
  std::vector<std::string> unknown_keys(const std::set<std::string>& known) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  [[noreturn]] void invalid(const std::string& key, const char* expected) const;

  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  std::string source_;
};

/// Environment variable that overrides the `data_dir` key.
inline constexpr const char* kDataDirEnv = "PARTGEN_DATA_DIR";
std::filesystem::path data_dir(const Config& cfg);

}  // namespace partgen
