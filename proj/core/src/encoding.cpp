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

#include "partgen/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "partgen/error.hpp"
#include "partgen/rng.hpp"

namespace partgen {

std::array<uint16_t, 27> CenterCornerKey::values() const {
  std::array<uint16_t, 27> v{};
  auto put = [&](int slot, const QuantCoord& q) {
    v[slot * 3 + 0] = q.ix;
    v[slot * 3 + 1] = q.iy;
    v[slot * 3 + 2] = q.iz;
  };
  put(0, center);
  for (int i = 0; i < 8; ++i) put(i + 1, corners[i]);
  return v;
}

std::array<uint8_t, 54> CenterCornerKey::serialize() const {
  std::array<uint8_t, 54> out{};
  const auto v = values();
  for (int i = 0; i < 27; ++i) {
    out[2 * i] = static_cast<uint8_t>(v[i] & 0xff);
    out[2 * i + 1] = static_cast<uint8_t>(v[i] >> 8);
  }
  return out;
}

uint16_t quantize(double g, int lattice) {
  const double q = std::floor((g + 1.0) * 0.5 * lattice);
  return static_cast<uint16_t>(std::clamp(q, 0.0, static_cast<double>(lattice - 1)));
}

QuantCoord quantize(const Vec3& g, int lattice) {
  return {quantize(g.x, lattice), quantize(g.y, lattice), quantize(g.z, lattice)};
}

CenterCornerKey cell_key(const Aabb& part_box, const Cell& cell, int n, int lattice) {
  require_valid(part_box, "cell_key");
  if (cell.x < 0 || cell.y < 0 || cell.z < 0 || cell.x >= n || cell.y >= n || cell.z >= n) {
    throw Error(ErrorCode::kOutOfRange, "cell_key: cell outside the grid");
  }
  if (lattice <= 0 || lattice > 65536) throw Error(ErrorCode::kInvalidArgument, "cell_key: bad lattice");
  const double step = 2.0 / n;
  const Vec3 lo{-1.0 + step * cell.x, -1.0 + step * cell.y, -1.0 + step * cell.z};
  CenterCornerKey key;
  key.center = quantize(to_global(part_box, lo + Vec3{0.5 * step, 0.5 * step, 0.5 * step}), lattice);
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner{lo.x + ((i & 1) ? step : 0.0), lo.y + ((i & 2) ? step : 0.0),
                      lo.z + ((i & 4) ? step : 0.0)};
    key.corners[i] = quantize(to_global(part_box, corner), lattice);
  }
  return key;
}

template <class T>
EmbeddingTable<T>::EmbeddingTable(int lattice, int width, int kmax, uint64_t seed)
    : lattice_(lattice), width_(width), kmax_(kmax) {
  if (lattice <= 0 || width <= 0 || width % 2 != 0 || kmax < 0) {
    throw Error(ErrorCode::kInvalidArgument, "EmbeddingTable: bad shape");
  }
  // Sinusoids with wavelengths from 2*pi up to 2*pi*10^4 lattice units; each
  // axis rotates the frequency assignment so the three tables differ.
  const int pairs = width / 2;
  const T scale = T(1) / T(9);
  const char* names[3] = {"pos.x", "pos.y", "pos.z"};
  for (int a = 0; a < 3; ++a) {
    nn::Param<T>& p = axis[a];
    p.name = names[a];
    p.value.resize(lattice, width);
    for (int j = 0; j < pairs; ++j) {
      const int band = (j + a * pairs / 3) % pairs;
      const double omega = std::pow(10000.0, -static_cast<double>(band) / pairs);
      for (int q = 0; q < lattice; ++q) {
        p.value(q, 2 * j) = static_cast<T>(std::sin(q * omega)) * scale;
        p.value(q, 2 * j + 1) = static_cast<T>(std::cos(q * omega)) * scale;
      }
    }
  }
  ids.name = "pos.id";
  ids.value.resize(kmax + 1, width);
  Rng rng(derive_seed(seed, 0x1d));
  for (Eigen::Index i = 0; i < ids.value.size(); ++i) ids.value.data()[i] = static_cast<T>(0.5 * rng.normal());
}

template <class T>
nn::Mat<T> EmbeddingTable<T>::position(const QuantCoord& q) const {
  return axis[0].value.row(q.ix) + axis[1].value.row(q.iy) + axis[2].value.row(q.iz);
}

template <class T>
nn::Mat<T> EmbeddingTable<T>::id(int part_id) const {
  if (part_id < 0 || part_id > kmax_) {
    throw Error(ErrorCode::kOutOfRange, "part id " + std::to_string(part_id) + " outside [0, kmax]");
  }
  return ids.value.row(part_id);
}

template <class T>
nn::Mat<T> EmbeddingTable<T>::embed(const CenterCornerKey& key, int part_id) const {
  nn::Mat<T> out = id(part_id);
  out += position(key.center);
  for (const QuantCoord& c : key.corners) out += position(c);
  return out;
}

template class EmbeddingTable<float>;
template class EmbeddingTable<double>;

KeyIndices key_indices(std::span<const CenterCornerKey> keys) {
  std::array<std::vector<int32_t>, 3> idx;
  for (auto& v : idx) v.reserve(keys.size() * 9);
  for (const CenterCornerKey& k : keys) {
    auto push = [&](const QuantCoord& q) {
      idx[0].push_back(q.ix);
      idx[1].push_back(q.iy);
      idx[2].push_back(q.iz);
    };
    push(k.center);
    for (const QuantCoord& c : k.corners) push(c);
  }
  KeyIndices out;
  for (int a = 0; a < 3; ++a) out.axis[a] = std::make_shared<const std::vector<int32_t>>(std::move(idx[a]));
  return out;
}

}  // namespace partgen
