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

#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "partgen/archive.hpp"
#include "partgen/dit.hpp"
#include "partgen/encoding.hpp"
#include "partgen/geometry.hpp"
#include "partgen/nn/tensor.hpp"

namespace partgen {

/// Token block of one layout slot (part_id 0 is the global branch).
struct PartTokenSet {
  int part_id = 0;
  nn::Mat<float> tokens;
};

/// [T_0, T_1, ..., T_K'] plus which slots hold real boxes. `source` maps
/// real part slots back to indices of the boxes passed to assemble_layout.
struct LayoutSequence {
  std::vector<PartTokenSet> slots;
  std::vector<bool> mask;
  std::vector<int> source;
  std::size_t size() const { return slots.size(); }
};

/// Box <-> M x C token map standing in for a shape VAE. The encoder is a
/// fixed sinusoidal featurization of (min, max) followed by a trainable
/// affine map; the decoder mean-pools the tokens and applies a bias-free
/// linear map to the 24 corner coordinates, so an all-zero block decodes to
/// eight coincident vertices.
class BoxCodec {
 public:
  static constexpr int kBands = 4;
  static constexpr int kFeatures = 6 * (1 + 2 * kBands);

  BoxCodec(int tokens = 8, int channels = 8, uint64_t seed = 0);

  int tokens() const { return tokens_; }
  int channels() const { return channels_; }
  /// Latents are multiplied by this after encoding (unit RMS over boxes).
  double latent_scale() const { return latent_scale_; }

  static std::array<double, kFeatures> features(const Aabb& box);
  nn::Mat<float> encode(const Aabb& box) const;
  Hexahedron decode(const nn::Mat<float>& tokens) const;

  struct TrainOptions {
    int steps = 3000;
    int batch = 64;
    double lr = 1e-2;
    uint64_t seed = 1;
  };
  /// Corner-reconstruction training on random boxes followed by a
  /// minimum-norm least-squares refit of the decoder; returns the max
  /// corner error measured on a fresh probe set.
  double train(const TrainOptions& opts);
  /// Max corner error of decode(encode(b)) over the given boxes.
  double roundtrip_error(std::span<const Aabb> boxes) const;

  void save(TensorArchive& archive, const std::string& prefix) const;
  void load(const TensorArchive& archive, const std::string& prefix);

 private:
  void refit_decoder(uint64_t seed);
  void update_scale();
  void round_to_storage();

  int tokens_;
  int channels_;
  double latent_scale_ = 1.0;
  nn::Param<double> enc_w_;  // kFeatures x (tokens * channels)
  nn::Param<double> enc_b_;  // 1 x (tokens * channels)
  nn::Param<double> dec_w_;  // channels x 24
};

/// Random valid box inside [-1,1]^3 with every extent >= min_extent.
Aabb random_box(Rng& rng, double min_extent = 0.05);

PartTokenSet encode_box(const BoxCodec& codec, const Aabb& box, int part_id);

/// Adds e_id(part_id) to every row.
PartTokenSet add_box_id(const PartTokenSet& tokens, const EmbeddingTable<float>& table);

/// add_box_id on every real slot; padded slots stay zero.
LayoutSequence apply_box_ids(const LayoutSequence& seq, const EmbeddingTable<float>& table);

/// Indices of the `capacity` largest boxes by volume (ties by index),
/// returned in ascending index order.
std::vector<int> largest_boxes(std::span<const Aabb> boxes, int capacity);

/// Slot 0 holds the encoded AABB of all retained boxes, slots 1..n the
/// retained boxes in input order, the rest zero padding. Length capacity+1.
LayoutSequence assemble_layout(const BoxCodec& codec, std::span<const Aabb> boxes, int capacity = 30);

/// Token stream over the whole sequence, slot ids 0..K'.
TokenStream<float> layout_stream(const LayoutSequence& seq);
/// Splits a sampled ((K'+1) * M) x C matrix back into a sequence whose part
/// slots are all marked as candidates.
LayoutSequence layout_from_tokens(const nn::Mat<float>& tokens, int tokens_per_part);

struct FilterOptions {
  double validity_iou = 0.85;
  double nms_iou = 0.7;
  double min_extent = 0.02;
  int validity_resolution = 64;
};

struct DecodedSlot {
  int slot = 0;
  Hexahedron hex{};
  Aabb box;
  double validity = 0.0;
  bool kept = false;
};

/// Decodes every real part slot, drops flat or non-cuboidal results, and
/// applies NMS. Survivors are reported in slot order; `diagnostics`, when
/// given, receives one entry per real part slot.
std::vector<Aabb> decode_and_filter(const BoxCodec& codec, const LayoutSequence& seq, const FilterOptions& opts = {},
                                    std::vector<DecodedSlot>* diagnostics = nullptr);

/// [{part_id, min, max}, ...]; part ids start at 1.
nlohmann::json layout_to_json(std::span<const Aabb> boxes);
std::vector<Aabb> layout_from_json(const nlohmann::json& j);

}  // namespace partgen
