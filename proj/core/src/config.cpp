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

#include "partgen/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>

#include "partgen/error.hpp"
#include "partgen/voxel.hpp"

namespace partgen {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig, source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::kConfig, source + ":" + std::to_string(line_no) + ": empty key");
    if (cfg.values_.count(key)) {
      throw Error(ErrorCode::kConfig, source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    cfg.values_[key] = trim(std::string_view(t).substr(eq + 1));
    cfg.lines_[key] = line_no;
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kConfig, path.string() + ": config file not found");
  const std::vector<uint8_t> bytes = read_file(path);
  return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path.string());
}

void Config::invalid(const std::string& key, const char* expected) const {
  std::string where = source_;
  if (auto it = lines_.find(key); it != lines_.end()) where += ":" + std::to_string(it->second);
  throw Error(ErrorCode::kConfig, "invalid value for '" + key + "' (" + where + "): expected " + expected);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(it->second.c_str(), &end, 10);
  if (it->second.empty() || *end != '\0' || errno != 0 || v < INT32_MIN || v > INT32_MAX) invalid(key, "an integer");
  return static_cast<int>(v);
}

uint64_t Config::get_u64(const std::string& key, uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
  if (it->second.empty() || it->second[0] == '-' || *end != '\0' || errno != 0) {
    invalid(key, "a non-negative integer");
  }
  return static_cast<uint64_t>(v);
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(it->second.c_str(), &end);
  if (it->second.empty() || *end != '\0' || errno != 0 || !std::isfinite(v)) invalid(key, "a number");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  invalid(key, "true or false");
}

std::vector<std::string> Config::get_list(const std::string& key, const std::vector<std::string>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::string> out;
  std::size_t pos = 0;
  const std::string& s = it->second;
  while (pos <= s.size()) {
    const std::size_t comma = std::min(s.find(',', pos), s.size());
    const std::string item = trim(std::string_view(s).substr(pos, comma - pos));
    if (!item.empty()) out.push_back(item);
    pos = comma + 1;
  }
  return out;
}

void Config::require(std::initializer_list<const char*> keys) const {
  for (const char* k : keys) {
    if (!has(k)) throw Error(ErrorCode::kConfig, source_ + ": missing key '" + std::string(k) + "'");
  }
}

std::vector<std::string> Config::unknown_keys(const std::set<std::string>& known) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!known.count(k)) out.push_back(k);
  }
  return out;
}

std::filesystem::path data_dir(const Config& cfg) {
  if (const char* env = std::getenv(kDataDirEnv); env != nullptr && *env != '\0') return env;
  return cfg.get_string("data_dir", "data");
}

}  // namespace partgen
