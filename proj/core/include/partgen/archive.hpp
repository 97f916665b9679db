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
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "partgen/nn/tensor.hpp"

namespace partgen {

struct NamedTensor {
  std::string name;
  std::vector<uint32_t> shape;
  std::vector<float> data;
};

/// Versioned container of named f32 tensors plus a JSON metadata block.
/// Used for model checkpoints and for per-part scene latents.
///
/// Layout (little-endian): "PTNS", u32 version, u32 meta length, meta JSON,
/// u32 tensor count, then per tensor: u32 name length, name bytes, u32 rank,
/// rank x u32 dims, prod(dims) x f32.
struct TensorArchive {
  static constexpr uint32_t kVersion = 1;

  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  const NamedTensor& at(const std::string& name) const;

  template <class T>
  void put(const std::string& name, const nn::Mat<T>& m) {
    NamedTensor t{name, {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())}, {}};
    t.data.resize(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
    tensors.push_back(std::move(t));
  }

  template <class T>
  nn::Mat<T> get(const std::string& name) const {
    const NamedTensor& t = at(name);
    const Eigen::Index rows = t.shape.empty() ? 1 : t.shape[0];
    const Eigen::Index cols = t.shape.size() < 2 ? 1 : t.shape[1];
    nn::Mat<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(t.data[static_cast<std::size_t>(i)]);
    return m;
  }
};

std::vector<uint8_t> encode_archive(const TensorArchive& archive);
TensorArchive decode_archive(std::span<const uint8_t> bytes);
void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);

}  // namespace partgen
