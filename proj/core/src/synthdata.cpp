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

#include "partgen/synthdata.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <variant>

#include "partgen/error.hpp"
#include "partgen/rng.hpp"
#include "partgen/voxel.hpp"

namespace partgen {

namespace fs = std::filesystem;

const std::vector<std::string>& category_names() {
  static const std::vector<std::string> names = {"table", "chair", "robot", "lamp", "barbell"};
  return names;
}

void require_category(std::string_view category) {
  const auto& names = category_names();
  if (std::find(names.begin(), names.end(), category) == names.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown category '" + std::string(category) + "'");
  }
}

Solid ObjectSample::solid() const {
  Solid s;
  for (const SynthPart& p : parts) s.parts.push_back(p.solid);
  return s;
}

std::vector<Aabb> ObjectSample::boxes() const {
  std::vector<Aabb> out;
  for (const SynthPart& p : parts) out.push_back(p.box);
  return out;
}

namespace {

constexpr std::array<Rgb8, 8> kPalette = {{{200, 60, 50},
                                          {60, 140, 200},
                                          {230, 180, 60},
                                          {90, 170, 90},
                                          {150, 90, 170},
                                          {220, 120, 40},
                                          {120, 120, 130},
                                          {170, 120, 80}}};

class Builder {
 public:
  explicit Builder(uint64_t seed) : rng(seed), color_base_(static_cast<int>(rng.below(kPalette.size()))) {}

  void box(const std::string& name, Vec3 lo, Vec3 hi) { add(name, BoxSolid{Aabb(lo, hi)}); }
  void sphere(const std::string& name, Vec3 c, double r) { add(name, SphereSolid{c, r}); }
  void cylinder(const std::string& name, Vec3 c, int axis, double r, double half) {
    add(name, CylinderSolid{c, axis, r, half});
  }

  Rng rng;
  std::vector<SynthPart> parts;

 private:
  void add(const std::string& name, Primitive prim) {
    SynthPart p;
    p.part_id = static_cast<int>(parts.size()) + 1;
    p.name = name;
    p.box = *bounds(prim);
    p.solid = std::move(prim);
    p.color = kPalette[static_cast<std::size_t>(color_base_ + static_cast<int>(parts.size())) % kPalette.size()];
    parts.push_back(std::move(p));
  }
  int color_base_;
};

void build_table(Builder& b) {
  Rng& r = b.rng;
  const double w = r.uniform(1.2, 1.8), d = r.uniform(0.8, 1.4), t = r.uniform(0.08, 0.15);
  const double h = r.uniform(0.8, 1.4), s = r.uniform(0.08, 0.15), inset = r.uniform(0.0, 0.1);
  const bool round_legs = r.bernoulli(0.5);
  const double top = h / 2;
  b.box("top", {-w / 2, top - t, -d / 2}, {w / 2, top, d / 2});
  const double leg_len = h - t;
  for (int k = 0; k < 4; ++k) {
    const double sx = (k & 1) ? 1.0 : -1.0;
    const double sz = (k & 2) ? 1.0 : -1.0;
    const double cx = sx * (w / 2 - inset - s / 2);
    const double cz = sz * (d / 2 - inset - s / 2);
    const std::string name = "leg" + std::to_string(k);
    if (round_legs) {
      b.cylinder(name, {cx, -h / 2 + leg_len / 2, cz}, 1, s / 2, leg_len / 2);
    } else {
      b.box(name, {cx - s / 2, -h / 2, cz - s / 2}, {cx + s / 2, -h / 2 + leg_len, cz + s / 2});
    }
  }
}

void build_chair(Builder& b) {
  Rng& r = b.rng;
  const double w = r.uniform(0.8, 1.2), d = r.uniform(0.8, 1.2), t = r.uniform(0.08, 0.12);
  const double legs = r.uniform(0.6, 0.8), back = r.uniform(0.6, 0.9), bt = r.uniform(0.08, 0.12);
  const double s = r.uniform(0.07, 0.12);
  const double y0 = -(legs + t + back) / 2;
  const double seat_top = y0 + legs + t;
  b.box("seat", {-w / 2, y0 + legs, -d / 2}, {w / 2, seat_top, d / 2});
  for (int k = 0; k < 4; ++k) {
    const double cx = ((k & 1) ? 1.0 : -1.0) * (w / 2 - s / 2);
    const double cz = ((k & 2) ? 1.0 : -1.0) * (d / 2 - s / 2);
    b.box("leg" + std::to_string(k), {cx - s / 2, y0, cz - s / 2}, {cx + s / 2, y0 + legs, cz + s / 2});
  }
  b.box("back", {-w / 2, seat_top, d / 2 - bt}, {w / 2, seat_top + back, d / 2});
}

void build_robot(Builder& b) {
  Rng& r = b.rng;
  const double tw = r.uniform(0.5, 0.7), th = r.uniform(0.5, 0.7), td = r.uniform(0.3, 0.45);
  const double leg = r.uniform(0.4, 0.6), head = r.uniform(0.12, 0.18);
  const double arm_w = r.uniform(0.12, 0.18), arm_len = r.uniform(0.35, 0.55);
  const double leg_w = r.uniform(0.14, 0.2);
  const bool antenna = r.bernoulli(0.5);
  const double ant = r.uniform(0.08, 0.15);
  const double total = leg + th + 2 * head + (antenna ? ant : 0.0);
  const double y0 = -total / 2;
  const double torso_lo = y0 + leg, torso_hi = torso_lo + th;
  b.box("torso", {-tw / 2, torso_lo, -td / 2}, {tw / 2, torso_hi, td / 2});
  b.sphere("head", {0, torso_hi + head, 0}, head);
  for (int side = 0; side < 2; ++side) {
    const double sx = side ? 1.0 : -1.0;
    const double inner = sx * tw / 2, outer = sx * (tw / 2 + arm_w);
    b.box(side ? "arm_r" : "arm_l", {std::min(inner, outer), torso_hi - arm_len, -arm_w / 2},
          {std::max(inner, outer), torso_hi, arm_w / 2});
  }
  for (int side = 0; side < 2; ++side) {
    const double cx = (side ? 1.0 : -1.0) * (tw / 2 - leg_w / 2);
    b.box(side ? "leg_r" : "leg_l", {cx - leg_w / 2, y0, -leg_w / 2}, {cx + leg_w / 2, torso_lo, leg_w / 2});
  }
  if (antenna) b.cylinder("antenna", {0, torso_hi + 2 * head + ant / 2, 0}, 1, 0.03, ant / 2);
}

void build_lamp(Builder& b) {
  Rng& r = b.rng;
  const double base_r = r.uniform(0.3, 0.45), base_h = r.uniform(0.04, 0.07);
  const double pole_r = r.uniform(0.03, 0.05), pole = r.uniform(0.8, 1.1);
  const bool round_shade = r.bernoulli(0.5);
  const double shade_r = round_shade ? r.uniform(0.15, 0.25) : r.uniform(0.2, 0.35);
  const double shade_h = round_shade ? 2 * shade_r : r.uniform(0.2, 0.35);
  const double total = 2 * base_h + pole + shade_h;
  const double y0 = -total / 2;
  b.cylinder("base", {0, y0 + base_h, 0}, 1, base_r, base_h);
  const double pole_lo = y0 + 2 * base_h;
  b.cylinder("pole", {0, pole_lo + pole / 2, 0}, 1, pole_r, pole / 2);
  const double shade_c = pole_lo + pole + shade_h / 2;
  if (round_shade) {
    b.sphere("shade", {0, shade_c, 0}, shade_r);
  } else {
    b.cylinder("shade", {0, shade_c, 0}, 1, shade_r, shade_h / 2);
  }
}

void build_barbell(Builder& b) {
  Rng& r = b.rng;
  const double bar_r = r.uniform(0.03, 0.05), plate_r = r.uniform(0.25, 0.4);
  const double plate_t = r.uniform(0.04, 0.08), plate_c = r.uniform(0.45, 0.6);
  const bool stubs = r.bernoulli(0.6);
  const double stub = r.uniform(0.1, std::min(0.25, 0.95 - plate_c - plate_t));
  const double inner = plate_c - plate_t;
  b.cylinder("bar", {0, 0, 0}, 0, bar_r, inner);
  b.cylinder("plate_l", {-plate_c, 0, 0}, 0, plate_r, plate_t);
  b.cylinder("plate_r", {plate_c, 0, 0}, 0, plate_r, plate_t);
  if (stubs) {
    const double outer = plate_c + plate_t;
    b.cylinder("stub_l", {-(outer + stub / 2), 0, 0}, 0, bar_r, stub / 2);
    b.cylinder("stub_r", {outer + stub / 2, 0, 0}, 0, bar_r, stub / 2);
  }
}

std::string hex_id(std::string_view category, uint64_t seed) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(seed));
  return std::string(category) + "-" + buf;
}

nlohmann::json vec_json(const Vec3& v) { return {v.x, v.y, v.z}; }

Vec3 json_vec(const nlohmann::json& j) {
  const auto a = j.get<std::array<double, 3>>();
  return {a[0], a[1], a[2]};
}

}  // namespace

ObjectSample generate_sample(uint64_t seed, std::string_view category) {
  require_category(category);
  Builder b(derive_seed(seed, 0x5a3e));
  if (category == "table") build_table(b);
  if (category == "chair") build_chair(b);
  if (category == "robot") build_robot(b);
  if (category == "lamp") build_lamp(b);
  if (category == "barbell") build_barbell(b);
  ObjectSample s;
  s.sample_id = hex_id(category, seed);
  s.seed = seed;
  s.category = std::string(category);
  s.parts = std::move(b.parts);
  s.condition = rasterize_condition(s.solid());
  return s;
}

Silhouettes rasterize_condition(const Solid& solid) {
  constexpr int n = Silhouettes::kRes;
  Silhouettes s;
  for (int view = 0; view < 3; ++view) {
    auto& img = s.views[view];
    img.assign(static_cast<std::size_t>(n * n), 0);
    for (int i = 0; i < n; ++i) {
      const double a = -1.0 + (i + 0.5) * 2.0 / n;
      for (int j = 0; j < n; ++j) {
        const double bcoord = -1.0 + (j + 0.5) * 2.0 / n;
        for (const Primitive& p : solid.parts) {
          if (projection_covers(p, view, a, bcoord)) {
            img[static_cast<std::size_t>(i * n + j)] = 1;
            break;
          }
        }
      }
    }
  }
  return s;
}

Silhouettes rasterize_condition(const ObjectSample& sample) { return rasterize_condition(sample.solid()); }

nn::Mat<float> condition_patches(const Silhouettes& s) {
  constexpr int n = Silhouettes::kRes;
  constexpr int per = n / 8;
  nn::Mat<float> out(kConditionTokens, kConditionDim);
  int row = 0;
  for (int view = 0; view < 3; ++view) {
    for (int pi = 0; pi < per; ++pi) {
      for (int pj = 0; pj < per; ++pj, ++row) {
        for (int u = 0; u < 8; ++u) {
          for (int v = 0; v < 8; ++v) out(row, u * 8 + v) = s.at(view, pi * 8 + u, pj * 8 + v) ? 1.0f : -1.0f;
        }
      }
    }
  }
  return out;
}

std::array<float, 3> voxel_color(const SynthPart& part, const Vec3& global_point) {
  const double shade = 1.0 + 0.08 * std::clamp(global_point.y, -1.0, 1.0);
  const std::array<uint8_t, 3> base = {part.color.r, part.color.g, part.color.b};
  std::array<float, 3> out{};
  for (int c = 0; c < 3; ++c) out[c] = static_cast<float>(std::clamp(base[c] / 255.0 * shade, 0.0, 1.0));
  return out;
}

nlohmann::json primitive_to_json(const Primitive& p) {
  if (const auto* b = std::get_if<BoxSolid>(&p)) {
    return {{"type", "box"}, {"min", vec_json(b->box.min)}, {"max", vec_json(b->box.max)}};
  }
  if (const auto* s = std::get_if<SphereSolid>(&p)) {
    return {{"type", "sphere"}, {"center", vec_json(s->center)}, {"radius", s->radius}};
  }
  if (const auto* c = std::get_if<CylinderSolid>(&p)) {
    return {{"type", "cylinder"},
            {"center", vec_json(c->center)},
            {"axis", c->axis},
            {"radius", c->radius},
            {"half_length", c->half_length}};
  }
  const auto& h = std::get<HalfSpaceSolid>(p);
  return {{"type", "halfspace"}, {"axis", h.axis}, {"offset", h.offset}, {"positive", h.positive}};
}

Primitive primitive_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "box") return BoxSolid{Aabb(json_vec(j.at("min")), json_vec(j.at("max")))};
  if (type == "sphere") return SphereSolid{json_vec(j.at("center")), j.at("radius").get<double>()};
  if (type == "cylinder") {
    return CylinderSolid{json_vec(j.at("center")), j.at("axis").get<int>(), j.at("radius").get<double>(),
                         j.at("half_length").get<double>()};
  }
  if (type == "halfspace") {
    return HalfSpaceSolid{j.at("axis").get<int>(), j.at("offset").get<double>(), j.at("positive").get<bool>()};
  }
  throw Error(ErrorCode::kFormat, "unknown primitive type '" + type + "'");
}

nlohmann::json sample_to_json(const ObjectSample& s) {
  nlohmann::json parts = nlohmann::json::array();
  for (const SynthPart& p : s.parts) {
    parts.push_back({{"part_id", p.part_id},
                     {"name", p.name},
                     {"min", vec_json(p.box.min)},
                     {"max", vec_json(p.box.max)},
                     {"solid", primitive_to_json(p.solid)},
                     {"color", {p.color.r, p.color.g, p.color.b}}});
  }
  return {{"version", 1}, {"id", s.sample_id}, {"seed", s.seed}, {"category", s.category}, {"parts", parts}};
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const ManifestEntry& e : samples) {
    arr.push_back({{"id", e.id}, {"seed", e.seed}, {"category", e.category}, {"files", e.files}});
  }
  return {{"version", kVersion}, {"base_seed", base_seed}, {"grid", grid}, {"categories", categories},
          {"samples", arr}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kVersion) throw Error(ErrorCode::kFormat, "manifest: unsupported version");
    DatasetManifest m;
    m.base_seed = j.at("base_seed").get<uint64_t>();
    m.grid = j.at("grid").get<int>();
    m.categories = j.at("categories").get<std::vector<std::string>>();
    for (const auto& e : j.at("samples")) {
      m.samples.push_back({e.at("id").get<std::string>(), e.at("seed").get<uint64_t>(),
                           e.at("category").get<std::string>(), e.at("files").get<std::vector<std::string>>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("manifest: ") + e.what());
  }
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  const std::vector<uint8_t> bytes(text.begin(), text.end());
  write_file(path, bytes);
}

}  // namespace

DatasetManifest build_dataset(uint64_t base_seed, std::span<const std::string> categories, int n, int grid,
                              const fs::path& out_dir) {
  if (n < 0) throw Error(ErrorCode::kInvalidArgument, "build_dataset: negative sample count");
  if (n > 0 && categories.empty()) throw Error(ErrorCode::kInvalidArgument, "build_dataset: no categories");
  if (grid <= 0) throw Error(ErrorCode::kInvalidArgument, "build_dataset: grid must be positive");
  for (const std::string& c : categories) require_category(c);
  DatasetManifest m;
  m.base_seed = base_seed;
  m.grid = grid;
  m.categories.assign(categories.begin(), categories.end());
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, out_dir.string() + ": " + ec.message());
  for (int i = 0; i < n; ++i) {
    const std::string& cat = categories[static_cast<std::size_t>(i) % categories.size()];
    const uint64_t seed = derive_seed(base_seed, static_cast<uint64_t>(i));
    const ObjectSample s = generate_sample(seed, cat);
    ManifestEntry e{s.sample_id, seed, cat, {}};
    const fs::path rel = fs::path("samples") / s.sample_id;
    fs::create_directories(out_dir / rel, ec);
    if (ec) throw Error(ErrorCode::kIo, (out_dir / rel).string() + ": " + ec.message());
    const fs::path json_rel = rel / "sample.json";
    write_text(out_dir / json_rel, sample_to_json(s).dump(2) + "\n");
    e.files.push_back(json_rel.generic_string());
    for (const SynthPart& p : s.parts) {
      char name[32];
      std::snprintf(name, sizeof(name), "part_%02d.pvox", p.part_id);
      const fs::path pr = rel / name;
      write_pvox(out_dir / pr, voxelize(Solid(p.solid), p.box, grid));
      e.files.push_back(pr.generic_string());
    }
    const fs::path gr = rel / "global.pvox";
    write_pvox(out_dir / gr, voxelize(s.solid(), Aabb::unit(), grid));
    e.files.push_back(gr.generic_string());
    m.samples.push_back(std::move(e));
  }
  write_text(out_dir / "manifest.json", m.to_json().dump(2) + "\n");
  return m;
}

DatasetManifest read_manifest(const fs::path& dir) {
  const std::vector<uint8_t> bytes = read_file(dir / "manifest.json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, (dir / "manifest.json").string() + ": " + e.what());
  }
  return DatasetManifest::from_json(j);
}

std::vector<ObjectSample> load_samples(const DatasetManifest& manifest) {
  std::vector<ObjectSample> out;
  for (const ManifestEntry& e : manifest.samples) out.push_back(generate_sample(e.seed, e.category));
  return out;
}

}  // namespace partgen
