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

#include "partgen/scene_io.hpp"

#include <cstdio>

#include "partgen/archive.hpp"
#include "partgen/error.hpp"
#include "partgen/mesh.hpp"

namespace partgen {

namespace fs = std::filesystem;

namespace {

nlohmann::json vec_json(const Vec3& v) { return {v.x, v.y, v.z}; }

Vec3 json_vec(const nlohmann::json& j) {
  const auto a = j.get<std::array<double, 3>>();
  return {a[0], a[1], a[2]};
}

std::string part_prefix(int part_id) { return "part." + std::to_string(part_id) + "."; }

nn::Mat<float> colors_matrix(const std::vector<std::array<float, 3>>& colors) {
  nn::Mat<float> m(static_cast<Eigen::Index>(colors.size()), 3);
  for (std::size_t i = 0; i < colors.size(); ++i) {
    for (int c = 0; c < 3; ++c) m(static_cast<Eigen::Index>(i), c) = colors[i][c];
  }
  return m;
}

void put_latent(TensorArchive& a, const std::string& prefix, const SlotLatent& l) {
  a.put(prefix + "x0", l.x0);
  a.put(prefix + "eps", l.eps);
}

SlotLatent get_latent(const TensorArchive& a, const std::string& prefix) {
  return {a.get<float>(prefix + "x0"), a.get<float>(prefix + "eps")};
}

void write_text(const fs::path& path, const std::string& text) {
  const std::vector<uint8_t> bytes(text.begin(), text.end());
  write_file(path, bytes);
}

}  // namespace

std::string part_file_stem(int part_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "part_%02d", part_id);
  return buf;
}

nlohmann::json scene_to_json(const SceneState& s) {
  nlohmann::json parts = nlohmann::json::array();
  for (const ScenePart& p : s.parts) {
    const std::string stem = "parts/" + part_file_stem(p.part_id);
    parts.push_back({{"part_id", p.part_id},
                     {"min", vec_json(p.box.min)},
                     {"max", vec_json(p.box.max)},
                     {"voxels", p.grid.count()},
                     {"empty", p.grid.empty()},
                     {"coarse_seed", p.coarse_seed},
                     {"refine_seed", p.refine_seed},
                     {"pvox", stem + ".pvox"},
                     {"ply", stem + ".ply"}});
  }
  return {{"version", SceneState::kVersion},
          {"scene_id", s.scene_id},
          {"condition", {{"category", s.condition.category}, {"seed", s.condition.seed}}},
          {"seed", s.seed},
          {"layout_source", s.layout_source},
          {"grid", s.grid},
          {"parts", parts},
          {"global", "global.pvox"},
          {"latents", "latents.bin"}};
}

void write_scene(const fs::path& dir, const SceneState& s) {
  const fs::path target = fs::absolute(dir).lexically_normal();
  const fs::path parent = target.parent_path();
  const fs::path tmp = parent / (target.filename().string() + ".tmp");
  const fs::path old = parent / (target.filename().string() + ".old");
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp / "parts", ec);
  if (ec) throw Error(ErrorCode::kIo, (tmp / "parts").string() + ": " + ec.message());

  TensorArchive lat;
  nlohmann::json seeds = nlohmann::json::array();
  for (const ScenePart& p : s.parts) {
    const std::string stem = part_file_stem(p.part_id);
    write_pvox(tmp / "parts" / (stem + ".pvox"), p.grid);
    const PartMesh pm = make_part_mesh({p.part_id, p.box, p.grid}, p.colors);
    write_ply(tmp / "parts" / (stem + ".ply"), pm.mesh, pm.vertex_colors);
    const std::string pre = part_prefix(p.part_id);
    put_latent(lat, pre + "coarse.", p.coarse);
    put_latent(lat, pre + "refine.", p.refine);
    lat.put(pre + "colors", colors_matrix(p.colors));
    seeds.push_back({{"part_id", p.part_id}, {"coarse_seed", p.coarse_seed}, {"refine_seed", p.refine_seed}});
  }
  put_latent(lat, "global.coarse.", s.coarse_global);
  put_latent(lat, "global.refine.", s.refine_global);
  lat.meta = {{"version", SceneState::kVersion}, {"scene_id", s.scene_id}, {"parts", seeds}};
  write_archive(tmp / "latents.bin", lat);
  write_pvox(tmp / "global.pvox", s.global);
  write_text(tmp / "scene.json", scene_to_json(s).dump(2) + "\n");

  fs::remove_all(old, ec);
  if (fs::exists(target)) {
    fs::rename(target, old, ec);
    if (ec) throw Error(ErrorCode::kIo, target.string() + ": " + ec.message());
  }
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::kIo, target.string() + ": " + ec.message());
  fs::remove_all(old, ec);
}

SceneState read_scene(const fs::path& dir) {
  const fs::path json_path = dir / "scene.json";
  if (!fs::exists(json_path)) throw Error(ErrorCode::kNotFound, json_path.string() + ": no such scene");
  const std::vector<uint8_t> bytes = read_file(json_path);
  try {
    const nlohmann::json j = nlohmann::json::parse(bytes.begin(), bytes.end());
    if (j.at("version").get<int>() != SceneState::kVersion) {
      throw Error(ErrorCode::kFormat, json_path.string() + ": unsupported scene version");
    }
    SceneState s;
    s.scene_id = j.at("scene_id").get<std::string>();
    s.condition.category = j.at("condition").at("category").get<std::string>();
    s.condition.seed = j.at("condition").at("seed").get<uint64_t>();
    s.seed = j.at("seed").get<uint64_t>();
    s.layout_source = j.at("layout_source").get<std::string>();
    s.grid = j.at("grid").get<int>();
    const TensorArchive lat = read_archive(dir / j.at("latents").get<std::string>());
    for (const auto& pj : j.at("parts")) {
      ScenePart p;
      p.part_id = pj.at("part_id").get<int>();
      p.box = Aabb(json_vec(pj.at("min")), json_vec(pj.at("max")));
      p.grid = read_pvox(dir / pj.at("pvox").get<std::string>());
      p.coarse_seed = pj.at("coarse_seed").get<uint64_t>();
      p.refine_seed = pj.at("refine_seed").get<uint64_t>();
      const std::string pre = part_prefix(p.part_id);
      p.coarse = get_latent(lat, pre + "coarse.");
      p.refine = get_latent(lat, pre + "refine.");
      const nn::Mat<float> colors = lat.get<float>(pre + "colors");
      if (colors.rows() > 0 && static_cast<std::size_t>(colors.rows()) != p.grid.count()) {
        throw Error(ErrorCode::kFormat, "scene part " + std::to_string(p.part_id) + ": color count mismatch");
      }
      for (Eigen::Index r = 0; r < colors.rows() && colors.cols() == 3; ++r) {
        p.colors.push_back({colors(r, 0), colors(r, 1), colors(r, 2)});
      }
      s.parts.push_back(std::move(p));
    }
    s.global = read_pvox(dir / j.at("global").get<std::string>());
    s.coarse_global = get_latent(lat, "global.coarse.");
    s.refine_global = get_latent(lat, "global.refine.");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, json_path.string() + ": " + e.what());
  }
}

}  // namespace partgen
