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

#include "partgen/layout.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "partgen/error.hpp"
#include "partgen/nn/optim.hpp"

namespace partgen {

using nn::Mat;

BoxCodec::BoxCodec(int tokens, int channels, uint64_t seed) : tokens_(tokens), channels_(channels) {
  if (tokens <= 0 || channels <= 0) throw Error(ErrorCode::kConfig, "BoxCodec: tokens and channels must be positive");
  Rng rng(seed);
  enc_w_.name = "codec.enc.w";
  enc_w_.value = Mat<double>::Zero(kFeatures, tokens * channels);
  enc_b_.name = "codec.enc.b";
  enc_b_.value = Mat<double>::Zero(1, tokens * channels);
  dec_w_.name = "codec.dec.w";
  dec_w_.value.resize(channels, 24);
  for (Eigen::Index i = 0; i < dec_w_.value.size(); ++i) {
    dec_w_.value.data()[i] = rng.normal() / std::sqrt(static_cast<double>(channels));
  }
  round_to_storage();
}

void BoxCodec::round_to_storage() {
  // Checkpoints hold f32; keeping the live codec on f32 values makes a
  // reloaded codec behave bit-identically.
  for (Mat<double>* m : {&enc_w_.value, &enc_b_.value, &dec_w_.value}) {
    *m = m->cast<float>().cast<double>();
  }
  latent_scale_ = static_cast<double>(static_cast<float>(latent_scale_));
}

std::array<double, BoxCodec::kFeatures> BoxCodec::features(const Aabb& box) {
  const std::array<double, 6> params = {box.min.x, box.min.y, box.min.z, box.max.x, box.max.y, box.max.z};
  std::array<double, kFeatures> f{};
  std::size_t at = 0;
  for (double p : params) {
    f[at++] = p;
    for (int k = 0; k < kBands; ++k) {
      const double w = std::numbers::pi * static_cast<double>(1 << k);
      f[at++] = std::sin(w * p);
      f[at++] = std::cos(w * p);
    }
  }
  return f;
}

Mat<float> BoxCodec::encode(const Aabb& box) const {
  require_valid(box, "encode_box");
  const auto f = features(box);
  const Eigen::Map<const Eigen::Matrix<double, 1, kFeatures>> fv(f.data());
  const Mat<double> flat = (fv * enc_w_.value + enc_b_.value) * latent_scale_;
  Mat<float> out(tokens_, channels_);
  for (int m = 0; m < tokens_; ++m) {
    for (int c = 0; c < channels_; ++c) out(m, c) = static_cast<float>(flat(0, m * channels_ + c));
  }
  return out;
}

Hexahedron BoxCodec::decode(const Mat<float>& tokens) const {
  if (tokens.rows() != tokens_ || tokens.cols() != channels_) {
    throw Error(ErrorCode::kInvalidArgument, "BoxCodec::decode: token block has the wrong shape");
  }
  const Mat<double> pooled = tokens.cast<double>().colwise().mean() / latent_scale_;
  const Mat<double> corners = pooled * dec_w_.value;
  Hexahedron hex;
  for (int i = 0; i < 8; ++i) hex[i] = Vec3{corners(0, 3 * i), corners(0, 3 * i + 1), corners(0, 3 * i + 2)};
  return hex;
}

Aabb random_box(Rng& rng, double min_extent) {
  Vec3 lo, hi;
  for (int a = 0; a < 3; ++a) {
    const double e = rng.uniform(min_extent, 2.0);
    const double start = rng.uniform(-1.0, 1.0 - e);
    lo[a] = start;
    hi[a] = start + e;
  }
  return {lo, hi};
}

namespace {

std::array<double, 24> corner_coords(const Aabb& box) {
  const CuboidMesh mesh = box_to_cuboid_mesh(box);
  std::array<double, 24> c{};
  for (int i = 0; i < 8; ++i) {
    for (int a = 0; a < 3; ++a) c[3 * i + a] = mesh.vertices[i][a];
  }
  return c;
}

}  // namespace

double BoxCodec::train(const TrainOptions& opts) {
  nn::AdamWOptions ao;
  ao.lr = opts.lr;
  ao.grad_clip = 0.0;
  nn::AdamW<double> adam({&enc_w_, &enc_b_, &dec_w_}, ao);
  Rng rng(opts.seed);
  latent_scale_ = 1.0;
  Mat<double> phi(opts.batch, kFeatures);
  Mat<double> target(opts.batch, 24);
  for (int step = 0; step < opts.steps; ++step) {
    for (int b = 0; b < opts.batch; ++b) {
      const Aabb box = random_box(rng, 0.02);
      const auto f = features(box);
      const auto c = corner_coords(box);
      for (int j = 0; j < kFeatures; ++j) phi(b, j) = f[j];
      for (int j = 0; j < 24; ++j) target(b, j) = c[j];
    }
    // pooled = phi * mean_m(W_m) + mean_m(b_m); corners = pooled * D.
    Mat<double> w_bar = Mat<double>::Zero(kFeatures, channels_);
    Mat<double> b_bar = Mat<double>::Zero(1, channels_);
    for (int m = 0; m < tokens_; ++m) {
      w_bar += enc_w_.value.middleCols(m * channels_, channels_);
      b_bar += enc_b_.value.middleCols(m * channels_, channels_);
    }
    w_bar /= tokens_;
    b_bar /= tokens_;
    const Mat<double> pooled = (phi * w_bar).rowwise() + b_bar.row(0);
    const Mat<double> pred = pooled * dec_w_.value;
    const Mat<double> d_pred = 2.0 * (pred - target) / static_cast<double>(opts.batch * 24);
    adam.zero_grad();
    dec_w_.grad = pooled.transpose() * d_pred;
    const Mat<double> d_pooled = d_pred * dec_w_.value.transpose();
    const Mat<double> d_wbar = phi.transpose() * d_pooled / static_cast<double>(tokens_);
    const Mat<double> d_bbar = d_pooled.colwise().sum() / static_cast<double>(tokens_);
    for (int m = 0; m < tokens_; ++m) {
      enc_w_.grad.middleCols(m * channels_, channels_) = d_wbar;
      enc_b_.grad.middleCols(m * channels_, channels_) = d_bbar;
    }
    // Linear decay to zero makes the final iterates settle.
    adam.set_lr(opts.lr * (1.0 - static_cast<double>(step) / opts.steps));
    adam.step();
  }
  refit_decoder(derive_seed(opts.seed, 98));
  round_to_storage();
  update_scale();
  round_to_storage();
  Rng probe(derive_seed(opts.seed, 99));
  std::vector<Aabb> boxes;
  for (int i = 0; i < 256; ++i) boxes.push_back(random_box(probe, 0.02));
  return roundtrip_error(boxes);
}

void BoxCodec::refit_decoder(uint64_t seed) {
  // Minimum-norm least squares over fresh boxes. Latent directions the
  // encoder never produces get zero decoder gain, so sampler noise along
  // them cannot shear the decoded box.
  constexpr int kBoxes = 4096;
  Rng rng(seed);
  Mat<double> phi(kBoxes, kFeatures);
  Mat<double> target(kBoxes, 24);
  for (int b = 0; b < kBoxes; ++b) {
    const Aabb box = random_box(rng, 0.02);
    const auto f = features(box);
    const auto c = corner_coords(box);
    for (int j = 0; j < kFeatures; ++j) phi(b, j) = f[j];
    for (int j = 0; j < 24; ++j) target(b, j) = c[j];
  }
  Mat<double> w_bar = Mat<double>::Zero(kFeatures, channels_);
  Mat<double> b_bar = Mat<double>::Zero(1, channels_);
  for (int m = 0; m < tokens_; ++m) {
    w_bar += enc_w_.value.middleCols(m * channels_, channels_);
    b_bar += enc_b_.value.middleCols(m * channels_, channels_);
  }
  const Mat<double> pooled = ((phi * (w_bar / tokens_)).rowwise() + (b_bar / tokens_).row(0)).eval();
  // The rank cutoff must be set before compute(); it shapes the Z factor.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-4);
  cod.compute(pooled);
  dec_w_.value = cod.solve(Eigen::MatrixXd(target));
}

void BoxCodec::update_scale() {
  Rng rng(0x5ca1e);
  latent_scale_ = 1.0;
  double sq = 0.0;
  std::size_t count = 0;
  for (int i = 0; i < 512; ++i) {
    const Mat<float> t = encode(random_box(rng, 0.02));
    sq += static_cast<double>(t.cast<double>().squaredNorm());
    count += static_cast<std::size_t>(t.size());
  }
  const double rms = std::sqrt(sq / static_cast<double>(count));
  latent_scale_ = rms > 0.0 ? 1.0 / rms : 1.0;
}

double BoxCodec::roundtrip_error(std::span<const Aabb> boxes) const {
  double worst = 0.0;
  for (const Aabb& box : boxes) {
    const Hexahedron hex = decode(encode(box));
    const CuboidMesh mesh = box_to_cuboid_mesh(box);
    for (int i = 0; i < 8; ++i) {
      for (int a = 0; a < 3; ++a) worst = std::max(worst, std::abs(hex[i][a] - mesh.vertices[i][a]));
    }
  }
  return worst;
}

void BoxCodec::save(TensorArchive& archive, const std::string& prefix) const {
  archive.put(prefix + enc_w_.name, enc_w_.value);
  archive.put(prefix + enc_b_.name, enc_b_.value);
  archive.put(prefix + dec_w_.name, dec_w_.value);
  archive.put(prefix + "codec.scale", Mat<double>(Mat<double>::Constant(1, 1, latent_scale_)));
}

void BoxCodec::load(const TensorArchive& archive, const std::string& prefix) {
  Mat<double> w = archive.get<double>(prefix + enc_w_.name);
  Mat<double> b = archive.get<double>(prefix + enc_b_.name);
  Mat<double> d = archive.get<double>(prefix + dec_w_.name);
  if (w.rows() != kFeatures || d.cols() != 24 || d.rows() <= 0 || b.cols() != w.cols() ||
      w.cols() % d.rows() != 0) {
    throw Error(ErrorCode::kFormat, "BoxCodec: checkpoint tensors have inconsistent shapes");
  }
  channels_ = static_cast<int>(d.rows());
  tokens_ = static_cast<int>(w.cols() / d.rows());
  enc_w_.value = std::move(w);
  enc_b_.value = std::move(b);
  dec_w_.value = std::move(d);
  latent_scale_ = archive.get<double>(prefix + "codec.scale")(0, 0);
}

PartTokenSet encode_box(const BoxCodec& codec, const Aabb& box, int part_id) {
  return {part_id, codec.encode(box)};
}

PartTokenSet add_box_id(const PartTokenSet& tokens, const EmbeddingTable<float>& table) {
  const Mat<float> e = table.id(tokens.part_id);
  if (e.cols() != tokens.tokens.cols()) throw Error(ErrorCode::kInvalidArgument, "add_box_id: width mismatch");
  PartTokenSet out = tokens;
  out.tokens.rowwise() += e.row(0);
  return out;
}

LayoutSequence apply_box_ids(const LayoutSequence& seq, const EmbeddingTable<float>& table) {
  LayoutSequence out = seq;
  for (std::size_t s = 0; s < seq.size(); ++s) {
    if (seq.mask[s]) out.slots[s] = add_box_id(seq.slots[s], table);
  }
  return out;
}

std::vector<int> largest_boxes(std::span<const Aabb> boxes, int capacity) {
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return boxes[a].volume() > boxes[b].volume(); });
  if (static_cast<int>(order.size()) > capacity) order.resize(static_cast<std::size_t>(std::max(capacity, 0)));
  std::sort(order.begin(), order.end());
  return order;
}

LayoutSequence assemble_layout(const BoxCodec& codec, std::span<const Aabb> boxes, int capacity) {
  if (boxes.empty()) throw Error(ErrorCode::kEmptyInput, "assemble_layout: no boxes");
  if (capacity <= 0) throw Error(ErrorCode::kInvalidArgument, "assemble_layout: capacity must be positive");
  for (const Aabb& b : boxes) require_valid(b, "assemble_layout");
  const std::vector<int> keep = largest_boxes(boxes, capacity);

  LayoutSequence seq;
  Aabb whole = boxes[static_cast<std::size_t>(keep.front())];
  for (int i : keep) whole = Aabb(min(whole.min, boxes[i].min), max(whole.max, boxes[i].max));
  seq.slots.push_back(encode_box(codec, whole, 0));
  seq.mask.push_back(true);
  seq.source.push_back(-1);
  for (int i : keep) {
    seq.slots.push_back(encode_box(codec, boxes[i], static_cast<int>(seq.slots.size())));
    seq.mask.push_back(true);
    seq.source.push_back(i);
  }
  while (static_cast<int>(seq.slots.size()) < capacity + 1) {
    seq.slots.push_back({static_cast<int>(seq.slots.size()), Mat<float>::Zero(codec.tokens(), codec.channels())});
    seq.mask.push_back(false);
    seq.source.push_back(-1);
  }
  return seq;
}

TokenStream<float> layout_stream(const LayoutSequence& seq) {
  TokenStream<float> s;
  if (seq.slots.empty()) return s;
  const Eigen::Index m = seq.slots.front().tokens.rows();
  const Eigen::Index c = seq.slots.front().tokens.cols();
  s.tokens.resize(m * static_cast<Eigen::Index>(seq.size()), c);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const int begin = static_cast<int>(i * m);
    s.tokens.middleRows(begin, m) = seq.slots[i].tokens;
    s.slots.push_back({begin, begin + static_cast<int>(m), static_cast<int>(i), static_cast<bool>(seq.mask[i])});
  }
  return s;
}

LayoutSequence layout_from_tokens(const Mat<float>& tokens, int tokens_per_part) {
  if (tokens_per_part <= 0 || tokens.rows() % tokens_per_part != 0) {
    throw Error(ErrorCode::kInvalidArgument, "layout_from_tokens: rows are not a multiple of the slot size");
  }
  LayoutSequence seq;
  const int slots = static_cast<int>(tokens.rows()) / tokens_per_part;
  for (int s = 0; s < slots; ++s) {
    seq.slots.push_back({s, tokens.middleRows(s * tokens_per_part, tokens_per_part)});
    seq.mask.push_back(true);
    seq.source.push_back(-1);
  }
  return seq;
}

std::vector<Aabb> decode_and_filter(const BoxCodec& codec, const LayoutSequence& seq, const FilterOptions& opts,
                                    std::vector<DecodedSlot>* diagnostics) {
  std::vector<DecodedSlot> slots;
  for (std::size_t s = 1; s < seq.size(); ++s) {
    if (!seq.mask[s]) continue;
    DecodedSlot d;
    d.slot = static_cast<int>(s);
    d.hex = codec.decode(seq.slots[s].tokens);
    const Aabb raw = aabb_of_points(d.hex);
    const Vec3 lo = max(raw.min, Vec3{-1, -1, -1});
    const Vec3 hi = min(raw.max, Vec3{1, 1, 1});
    const Vec3 e = hi - lo;
    if (e.x >= opts.min_extent && e.y >= opts.min_extent && e.z >= opts.min_extent) {
      d.box = Aabb(lo, hi);
      const Vec3 re = raw.extent();
      if (std::abs(hexahedron_volume(d.hex)) > 1e-9 * re.x * re.y * re.z) {
        d.validity = hexahedron_aabb_iou(d.hex, opts.validity_resolution);
      }
      d.kept = d.validity >= opts.validity_iou;
    }
    slots.push_back(d);
  }
  std::vector<Aabb> candidates;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].kept) continue;
    candidates.push_back(slots[i].box);
    owner.push_back(i);
  }
  const std::vector<std::size_t> survivors = nms_indices(candidates, opts.nms_iou);
  std::vector<bool> alive(slots.size(), false);
  std::vector<Aabb> out;
  for (std::size_t k : survivors) {
    alive[owner[k]] = true;
    out.push_back(candidates[k]);
  }
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i].kept = alive[i];
  if (diagnostics) *diagnostics = std::move(slots);
  return out;
}

nlohmann::json layout_to_json(std::span<const Aabb> boxes) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Aabb& b = boxes[i];
    arr.push_back({{"part_id", i + 1}, {"min", {b.min.x, b.min.y, b.min.z}}, {"max", {b.max.x, b.max.y, b.max.z}}});
  }
  return arr;
}

std::vector<Aabb> layout_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kFormat, "layout: expected a JSON array");
  std::vector<Aabb> boxes;
  for (const auto& e : j) {
    const auto lo = e.at("min").get<std::array<double, 3>>();
    const auto hi = e.at("max").get<std::array<double, 3>>();
    Aabb b({lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]});
    require_valid(b, "layout entry");
    boxes.push_back(b);
  }
  return boxes;
}

}  // namespace partgen
