// Copyright 2026 The acwm Authors
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

// Interactive stepping and adjudication over JSON. Service::handle is the
// whole API and knows nothing about sockets; serve() puts it behind HTTP.
//
//   POST /sessions                {backend, task, views}   -> {session_id}
//   POST /sessions/{id}/step      {actions: K x 7}         -> {frames, chunk_index, terminated}
//   GET  /sessions/{id}                                    -> state summary
//   POST /rollouts/{id}/verdicts  {evaluator, label}       -> stored verdict
//   GET  /reports/summary                                  -> SR table
//
// Each session is also a rollout: <root>/rollouts/<id>/record.json, frame
// PNGs under frames/<view>/, and verdicts.jsonl. The summary is rebuilt from
// that store alone, so a restarted service reports the same thing.

#ifndef ACWM_SERVICE_HPP_
#define ACWM_SERVICE_HPP_

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "acwm/eval.hpp"
#include "acwm/io.hpp"
#include "acwm/world.hpp"

namespace acwm {

struct HttpResponse {
  int status = 200;
  Json body;
};

// What a session asks for; backends are built from this.
struct SessionSpec {
  std::string backend;  // "oracle" or "learned"
  std::string task;     // "default" or "random:<seed>"
  CameraRig rig;
  Scenario scenario;
};

using SessionBackendFactory = std::function<std::unique_ptr<WorldModelBackend>(const SessionSpec&)>;

struct ServiceOptions {
  std::filesystem::path root = "store";
  int chunk_size = 16;
  int max_chunks = 30;
  double eps_term = 1e-3;
  SessionBackendFactory backends;  // must be set
};

// Resolves a task id; throws ValidationError for unknown ids.
Scenario scenario_for_task(const std::string& task);

class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();

  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body);

  // Rebuilt from the rollout store.
  Json summary() const;

 private:
  struct Session;

  HttpResponse create_session(const Json& body);
  HttpResponse step(const std::string& id, const Json& body);
  HttpResponse describe(const std::string& id);
  HttpResponse add_verdict(const std::string& rollout, const Json& body);
  std::shared_ptr<Session> find(const std::string& id);
  std::filesystem::path rollout_dir(const std::string& id) const;

  ServiceOptions options_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int next_id_ = 1;
  std::mutex verdict_mutex_;
  VerdictBook verdicts_;
};

// Blocks serving on host:port until the process is stopped.
void serve(Service& service, const std::string& host, int port);

}  // namespace acwm

#endif  // ACWM_SERVICE_HPP_
