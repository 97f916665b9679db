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

#include "partgen/tools/jobs.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>

namespace partgen::tools {

const char* to_string(JobStatus s) {
  switch (s) {
    case JobStatus::kQueued: return "queued";
    case JobStatus::kRunning: return "running";
    case JobStatus::kDone: return "done";
    case JobStatus::kFailed: return "failed";
  }
  return "unknown";
}

nlohmann::json JobRecord::to_json() const {
  nlohmann::json j = {{"version", 1},          {"job_id", job_id},     {"kind", kind},
                      {"status", to_string(status)}, {"scene_id", scene_id}, {"progress", progress}};
  j["error"] = error.empty() ? nlohmann::json(nullptr) : nlohmann::json(error);
  return j;
}

JobQueue::JobQueue(int workers) {
  for (int i = 0; i < std::max(1, workers); ++i) threads_.emplace_back([this, i] { worker_loop(i); });
}

JobQueue::~JobQueue() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

std::optional<std::string> JobQueue::submit(const std::string& kind, const std::string& scene_id, Task task) {
  std::string id;
  {
    std::lock_guard lock(mu_);
    if (busy_.count(scene_id)) return std::nullopt;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "job-%06llu", static_cast<unsigned long long>(next_id_++));
    id = buf;
    JobRecord r;
    r.job_id = id;
    r.kind = kind;
    r.scene_id = scene_id;
    records_[id] = r;
    busy_[scene_id] = id;
    queue_.push_back({id, std::move(task)});
  }
  cv_.notify_one();
  return id;
}

std::optional<JobRecord> JobQueue::get(const std::string& job_id) const {
  std::lock_guard lock(mu_);
  const auto it = records_.find(job_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

bool JobQueue::scene_busy(const std::string& scene_id) const {
  std::lock_guard lock(mu_);
  return busy_.count(scene_id) != 0;
}

void JobQueue::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && active_ == 0; });
}

void JobQueue::set_progress(const std::string& job_id, double p) {
  std::lock_guard lock(mu_);
  JobRecord& r = records_.at(job_id);
  if (r.status == JobStatus::kRunning) r.progress = std::clamp(std::max(r.progress, p), 0.0, 1.0);
}

void JobQueue::finish(const std::string& job_id, bool ok, const std::string& error) {
  std::lock_guard lock(mu_);
  JobRecord& r = records_.at(job_id);
  r.status = ok ? JobStatus::kDone : JobStatus::kFailed;
  if (ok) r.progress = 1.0;
  r.error = error;
  busy_.erase(r.scene_id);
  --active_;
}

void JobQueue::worker_loop(int index) {
  for (;;) {
    Pending job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = std::move(queue_.front());
      queue_.pop_front();
      records_.at(job.job_id).status = JobStatus::kRunning;
      ++active_;
    }
    bool ok = true;
    std::string error;
    try {
      job.task(index, [this, &job](double p) { set_progress(job.job_id, p); });
    } catch (const std::exception& e) {
      ok = false;
      error = e.what();
    } catch (...) {
      ok = false;
      error = "unknown failure";
    }
    finish(job.job_id, ok, error);
    idle_cv_.notify_all();
  }
}

}  // namespace partgen::tools
