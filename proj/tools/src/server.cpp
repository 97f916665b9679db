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

#include "partgen/tools/server.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>

#include "partgen/error.hpp"
#include "partgen/scene_io.hpp"
#include "partgen/synthdata.hpp"
#include "partgen/voxel.hpp"

namespace partgen::tools {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kApiVersion = 1;

void send_json(httplib::Response& res, int status, json body) {
  body["version"] = kApiVersion;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, ErrorCode code, const std::string& message,
                std::optional<int> op_index = std::nullopt) {
  json body = {{"error", message}, {"code", std::string(to_string(code))}};
  if (op_index) body["op_index"] = *op_index;
  send_json(res, status, std::move(body));
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kIo: return 500;
    default: return 422;
  }
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kFormat, std::string("request body is not JSON: ") + e.what());
  }
}

}  // namespace

bool valid_scene_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id[0] == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

ApiServer::ApiServer(ServerOptions opts, const ModelFactory& factory) : opts_(std::move(opts)) {
  opts_.workers = std::max(1, opts_.workers);
  for (int i = 0; i < opts_.workers; ++i) models_.push_back(factory());
  fs::create_directories(opts_.store_dir);
  http_ = std::make_unique<httplib::Server>();
  jobs_ = std::make_unique<JobQueue>(opts_.workers);
  routes();
}

ApiServer::~ApiServer() {
  stop();
  jobs_.reset();
}

int ApiServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return bound;
}

void ApiServer::run(const std::string& host, int port) {
  if (!http_->listen(host, port)) throw Error(ErrorCode::kIo, "cannot listen on " + host + ":" + std::to_string(port));
}

void ApiServer::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

void ApiServer::routes() {
  auto& s = *http_;
  if (!opts_.static_dir.empty()) s.set_mount_point("/", opts_.static_dir.string());

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const EditError& e) {
      send_error(res, 422, e.code(), e.what(), e.op_index());
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), e.code(), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, ErrorCode::kIo, e.what());
    }
  });

  s.Post("/api/generate", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    ConditionRef cond;
    uint64_t seed = 0;
    bool gt_boxes = false;
    std::string scene_id;
    try {
      if (body.contains("condition")) {
        cond.category = body["condition"].at("category").get<std::string>();
        cond.seed = body["condition"].value("seed", uint64_t{0});
      } else {
        cond.category = body.at("category").get<std::string>();
        cond.seed = body.value("sample_seed", uint64_t{0});
      }
      seed = body.value("seed", uint64_t{0});
      gt_boxes = body.value("gt_boxes", false);
      scene_id = body.value("scene_id", std::string());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat, std::string("invalid generate request: ") + e.what());
    }
    require_category(cond.category);
    if (scene_id.empty()) scene_id = default_scene_id(cond, seed);
    if (!valid_scene_id(scene_id)) throw Error(ErrorCode::kInvalidArgument, "invalid scene id '" + scene_id + "'");

    const fs::path dir = opts_.store_dir / scene_id;
    auto task = [this, cond, seed, gt_boxes, scene_id, dir](int worker, const JobQueue::Progress& progress) {
      PipelineOptions po = opts_.pipeline;
      po.progress = progress;
      Models& m = models_[static_cast<std::size_t>(worker)];
      SceneState state;
      if (gt_boxes) {
        const auto boxes = generate_sample(cond.seed, cond.category).boxes();
        state = generate_from_boxes(m, cond, boxes, seed, po, scene_id);
      } else {
        state = run_full(m, cond, seed, po, scene_id);
      }
      write_scene(dir, state);
    };
    const auto job = jobs_->submit("generate", scene_id, task);
    if (!job) throw Error(ErrorCode::kConflict, "scene '" + scene_id + "' has a job in progress");
    send_json(res, 202, {{"job_id", *job}, {"scene_id", scene_id}, {"status", "queued"}});
  });

  s.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto rec = jobs_->get(req.matches[1]);
    if (!rec) throw Error(ErrorCode::kNotFound, "unknown job '" + std::string(req.matches[1]) + "'");
    send_json(res, 200, rec->to_json());
  });

  auto scene_dir = [this](const std::string& id) {
    if (!valid_scene_id(id) || !fs::exists(opts_.store_dir / id / "scene.json")) {
      throw Error(ErrorCode::kNotFound, "unknown scene '" + id + "'");
    }
    return opts_.store_dir / id;
  };

  s.Get(R"(/api/scenes/([^/]+))", [scene_dir](const httplib::Request& req, httplib::Response& res) {
    const fs::path dir = scene_dir(req.matches[1]);
    const std::vector<uint8_t> bytes = read_file(dir / "scene.json");
    res.status = 200;
    res.set_content(std::string(bytes.begin(), bytes.end()), "application/json");
  });

  s.Get(R"(/api/scenes/([^/]+)/parts/(\d+)/mesh)", [scene_dir](const httplib::Request& req, httplib::Response& res) {
    const fs::path dir = scene_dir(req.matches[1]);
    const int part = std::stoi(req.matches[2]);
    const json scene = json::parse(read_file(dir / "scene.json"));
    for (const json& p : scene.at("parts")) {
      if (p.at("part_id").get<int>() != part) continue;
      const std::vector<uint8_t> bytes = read_file(dir / p.at("ply").get<std::string>());
      res.status = 200;
      res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
      return;
    }
    throw Error(ErrorCode::kNotFound, "scene has no part " + std::to_string(part));
  });

  s.Post(R"(/api/scenes/([^/]+)/edit)", [this, scene_dir](const httplib::Request& req, httplib::Response& res) {
    const std::string scene_id = req.matches[1];
    const fs::path dir = scene_dir(scene_id);
    if (jobs_->scene_busy(scene_id)) throw Error(ErrorCode::kConflict, "scene '" + scene_id + "' has a job in progress");
    const EditRequest edit = parse_edit(parse_body(req));
    auto state = std::make_shared<SceneState>(read_scene(dir));
    validate_edit(*state, edit);
    auto task = [this, edit, state, dir](int worker, const JobQueue::Progress& progress) {
      PipelineOptions po = opts_.pipeline;
      po.progress = progress;
      write_scene(dir, edit_scene(models_[static_cast<std::size_t>(worker)], *state, edit, po));
    };
    const auto job = jobs_->submit("edit", scene_id, task);
    if (!job) throw Error(ErrorCode::kConflict, "scene '" + scene_id + "' has a job in progress");
    send_json(res, 202, {{"job_id", *job}, {"scene_id", scene_id}, {"status", "queued"}});
  });

  s.Get("/api/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"ok", true}}); });
}

}  // namespace partgen::tools
