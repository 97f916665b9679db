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

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "partgen/pipeline.hpp"
#include "partgen/tools/jobs.hpp"

namespace httplib {
class Server;
}

namespace partgen::tools {

struct ServerOptions {
  std::filesystem::path store_dir = "scenes";
  std::filesystem::path static_dir;  // optional editor assets, mounted at /
  int workers = 1;
  PipelineOptions pipeline;
};

/// Loads one model set per worker.
using ModelFactory = std::function<Models()>;

/// HTTP job API over a scene store directory:
///   POST /api/generate, GET /api/jobs/{id}, GET /api/scenes/{id},
///   GET /api/scenes/{id}/parts/{k}/mesh, POST /api/scenes/{id}/edit.
class ApiServer {
 public:
  ApiServer(ServerOptions opts, const ModelFactory& factory);
  ~ApiServer();

  /// Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

  JobQueue& jobs() { return *jobs_; }

 private:
  void routes();

  ServerOptions opts_;
  std::vector<Models> models_;
  std::unique_ptr<httplib::Server> http_;
  std::unique_ptr<JobQueue> jobs_;
  std::thread thread_;
};

/// Scene ids are path components: [A-Za-z0-9._-], not starting with a dot.
bool valid_scene_id(const std::string& id);

}  // namespace partgen::tools
