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

#include "partgen/archive.hpp"

#include <cstring>

#include "partgen/error.hpp"
#include "partgen/voxel.hpp"

namespace partgen {

const NamedTensor* TensorArchive::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedTensor& TensorArchive::at(const std::string& name) const {
  const NamedTensor* t = find(name);
  if (t == nullptr) throw Error(ErrorCode::kNotFound, "archive has no tensor '" + name + "'");
  return *t;
}

std::vector<uint8_t> encode_archive(const TensorArchive& archive) {
  std::vector<uint8_t> out = {'P', 'T', 'N', 'S'};
  append_u32(out, TensorArchive::kVersion);
  const std::string meta = archive.meta.dump();
  append_u32(out, static_cast<uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());
  append_u32(out, static_cast<uint32_t>(archive.tensors.size()));
  for (const auto& t : archive.tensors) {
    append_u32(out, static_cast<uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    append_u32(out, static_cast<uint32_t>(t.shape.size()));
    std::size_t count = 1;
    for (uint32_t d : t.shape) {
      append_u32(out, d);
      count *= d;
    }
    if (count != t.data.size()) throw Error(ErrorCode::kFormat, "tensor '" + t.name + "' shape/data mismatch");
    for (float f : t.data) {
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      append_u32(out, bits);
    }
  }
  return out;
}

TensorArchive decode_archive(std::span<const uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "PTNS", 4) != 0) {
    throw Error(ErrorCode::kFormat, "not a tensor archive");
  }
  if (read_u32(bytes, 4) != TensorArchive::kVersion) throw Error(ErrorCode::kFormat, "unsupported archive version");
  std::size_t pos = 8;
  auto take = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw Error(ErrorCode::kFormat, "truncated archive");
    const std::size_t at = pos;
    pos += n;
    return at;
  };
  auto u32 = [&] { return read_u32(bytes, take(4)); };

  TensorArchive archive;
  const uint32_t meta_len = u32();
  const std::size_t meta_at = take(meta_len);
  archive.meta = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(meta_at),
                                       bytes.begin() + static_cast<std::ptrdiff_t>(meta_at + meta_len));
  const uint32_t count = u32();
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const uint32_t name_len = u32();
    const std::size_t name_at = take(name_len);
    t.name.assign(reinterpret_cast<const char*>(bytes.data() + name_at), name_len);
    const uint32_t rank = u32();
    std::size_t elems = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(u32());
      elems *= t.shape.back();
    }
    t.data.resize(elems);
    for (std::size_t e = 0; e < elems; ++e) {
      const uint32_t bits = u32();
      std::memcpy(&t.data[e], &bits, 4);
    }
    archive.tensors.push_back(std::move(t));
  }
  return archive;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  write_file(path, encode_archive(archive));
}

TensorArchive read_archive(const std::filesystem::path& path) {
  try {
    return decode_archive(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": bad archive metadata: " + e.what());
  }
}

}  // namespace partgen
