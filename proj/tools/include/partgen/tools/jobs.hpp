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

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace partgen::tools {

enum class JobStatus { kQueued, kRunning, kDone, kFailed };
const char* to_string(JobStatus s);

struct JobRecord {
  std::string job_id;
  std::string kind;  // "generate" or "edit"
  JobStatus status = JobStatus::kQueued;
  std::string scene_id;
  double progress = 0.0;
  std::string error;

  nlohmann::json to_json() const;
};

/// FIFO of sampling jobs served by a fixed number of worker threads. A task
/// receives its worker index and a progress callback; throwing marks the job
/// failed with the exception text.
class JobQueue {
 public:
  using Progress = std::function<void(double)>;
  using Task = std::function<void(int worker, const Progress& progress)>;

  explicit JobQueue(int workers = 1);
  ~JobQueue();
  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  /// Enqueues unless a queued or running job already holds `scene_id`;
  /// returns nullopt in that case.
  std::optional<std::string> submit(const std::string& kind, const std::string& scene_id, Task task);
  std::optional<JobRecord> get(const std::string& job_id) const;
  bool scene_busy(const std::string& scene_id) const;
  /// Blocks until no job is queued or running.
  void wait_idle();

 private:
  struct Pending {
    std::string job_id;
    Task task;
  };
  void worker_loop(int index);
  void set_progress(const std::string& job_id, double p);
  void finish(const std::string& job_id, bool ok, const std::string& error);

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<Pending> queue_;
  std::map<std::string, JobRecord> records_;
  std::map<std::string, std::string> busy_;  // scene_id -> job_id
  uint64_t next_id_ = 1;
  int active_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

}  // namespace partgen::tools
