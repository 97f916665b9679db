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

#include "partgen/voxel.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "partgen/error.hpp"

namespace partgen {

VoxelGrid::VoxelGrid(int n) : n_(n) {
  if (n <= 0) throw Error(ErrorCode::kInvalidArgument, "VoxelGrid resolution must be positive");
  words_.assign((size() + 63) / 64, 0);
}

Cell VoxelGrid::cell(std::size_t i) const {
  const std::size_t nn = static_cast<std::size_t>(n_);
  return {static_cast<int>(i % nn), static_cast<int>((i / nn) % nn), static_cast<int>(i / (nn * nn))};
}

void VoxelGrid::set(std::size_t i, bool v) {
  const uint64_t bit = uint64_t{1} << (i & 63);
  if (v) {
    words_[i >> 6] |= bit;
  } else {
    words_[i >> 6] &= ~bit;
  }
}

void VoxelGrid::fill(bool v) {
  std::fill(words_.begin(), words_.end(), v ? ~uint64_t{0} : uint64_t{0});
  const std::size_t tail = size() & 63;
  if (v && tail != 0) words_.back() = (uint64_t{1} << tail) - 1;
}

std::size_t VoxelGrid::count() const {
  std::size_t c = 0;
  for (uint64_t w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

std::vector<std::size_t> VoxelGrid::occupied() const {
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    uint64_t bits = words_[w];
    while (bits) {
      out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
      bits &= bits - 1;
    }
  }
  return out;
}

Vec3 cell_center(const Aabb& frame, int n, const Cell& c) {
  const Vec3 e = frame.extent();
  return {frame.min.x + (c.x + 0.5) * e.x / n, frame.min.y + (c.y + 0.5) * e.y / n,
          frame.min.z + (c.z + 0.5) * e.z / n};
}

VoxelGrid voxelize(const Solid& solid, const Aabb& frame, int n) {
  if (n <= 0) throw Error(ErrorCode::kInvalidArgument, "voxelize: n must be positive");
  VoxelGrid grid(n);
  for (int z = 0; z < n; ++z) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (solid.contains(cell_center(frame, n, {x, y, z}))) grid.set(x, y, z);
      }
    }
  }
  return grid;
}

double grid_iou(const VoxelGrid& a, const VoxelGrid& b) {
  if (a.n() != b.n()) throw Error(ErrorCode::kInvalidArgument, "grid_iou: resolution mismatch");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ga = a.get(i);
    const bool gb = b.get(i);
    inter += ga && gb;
    uni += ga || gb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t read_u32(std::span<const uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw Error(ErrorCode::kFormat, "truncated u32");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

std::vector<uint8_t> encode_pvox(const VoxelGrid& grid) {
  std::vector<uint8_t> out = {'P', 'V', 'O', 'X'};
  append_u32(out, kPvoxVersion);
  append_u32(out, static_cast<uint32_t>(grid.n()));
  const std::size_t header = out.size();
  out.resize(header + (grid.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.get(i)) out[header + (i >> 3)] |= static_cast<uint8_t>(1u << (i & 7));
  }
  return out;
}

VoxelGrid decode_pvox(std::span<const uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "PVOX", 4) != 0) {
    throw Error(ErrorCode::kFormat, "not a PVOX stream");
  }
  if (read_u32(bytes, 4) != kPvoxVersion) throw Error(ErrorCode::kFormat, "unsupported PVOX version");
  const uint32_t n = read_u32(bytes, 8);
  if (n == 0 || n > 4096) throw Error(ErrorCode::kFormat, "PVOX resolution out of range");
  VoxelGrid grid(static_cast<int>(n));
  if (bytes.size() != 12 + (grid.size() + 7) / 8) throw Error(ErrorCode::kFormat, "PVOX payload size mismatch");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if ((bytes[12 + (i >> 3)] >> (i & 7)) & 1u) grid.set(i);
  }
  return grid;
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kNotFound, path.string() + ": no such file");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

void write_pvox(const std::filesystem::path& path, const VoxelGrid& grid) {
  write_file(path, encode_pvox(grid));
}

VoxelGrid read_pvox(const std::filesystem::path& path) {
  try {
    return decode_pvox(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace partgen
