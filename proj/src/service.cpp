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

#include "acwm/service.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <httplib.h>

namespace acwm {
namespace fs = std::filesystem;

namespace {

HttpResponse error_response(int status, const std::string& what) {
  return {status, Json{{"error", what}}};
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '/'))
    if (!part.empty()) parts.push_back(part);
  return parts;
}

bool valid_id(const std::string& id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

}  // namespace

Scenario scenario_for_task(const std::string& task) {
  if (task == "default") return default_scenario();
  const std::string prefix = "random:";
  if (task.rfind(prefix, 0) == 0) {
    std::uint64_t seed = 0;
    try {
      std::size_t used = 0;
      seed = std::stoull(task.substr(prefix.size()), &used);
      require(used == task.size() - prefix.size(), "trailing characters");
    } catch (const std::exception&) {
      throw ValidationError("bad task seed in '" + task + "'");
    }
    std::mt19937_64 rng(seed);
    return random_scenario(rng);
  }
  throw ValidationError("unknown task '" + task + "'");
}

struct Service::Session {
  std::string id;
  SessionSpec spec;
  std::unique_ptr<WorldModelBackend> backend;
  std::vector<Image> condition;
  ArmFrame arms;
  SparseMemory memory;
  RolloutRecord record;
  bool terminated = false;
  std::mutex step_mutex;  // one in-flight step
};

Service::Service(ServiceOptions options) : options_(std::move(options)) {
  require(static_cast<bool>(options_.backends), "service needs a backend factory");
  require(options_.chunk_size >= 1 && options_.max_chunks >= 1 && options_.eps_term > 0.0,
          "bad service limits");
  const fs::path rollouts = options_.root / "rollouts";
  if (!fs::exists(rollouts)) return;
  for (const auto& entry : fs::directory_iterator(rollouts)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 1 && name[0] == 's') {
      try {
        next_id_ = std::max(next_id_, std::stoi(name.substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
    std::ifstream in(entry.path() / "verdicts.jsonl");
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) verdicts_.add(Verdict::from_json(Json::parse(line)));
  }
}

Service::~Service() = default;

fs::path Service::rollout_dir(const std::string& id) const { return options_.root / "rollouts" / id; }

std::shared_ptr<Service::Session> Service::find(const std::string& id) {
  std::lock_guard<std::mutex> lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

HttpResponse Service::handle(const std::string& method, const std::string& path,
                             const std::string& body) {
  const std::vector<std::string> parts = split_path(path);
  try {
    Json j;
    if (method == "POST") {
      try {
        j = body.empty() ? Json::object() : Json::parse(body);
      } catch (const Json::exception& e) {
        return error_response(422, std::string("malformed JSON: ") + e.what());
      }
      if (!j.is_object()) return error_response(422, "request body must be a JSON object");
    }
    if (method == "POST" && parts.size() == 1 && parts[0] == "sessions") return create_session(j);
    if (method == "POST" && parts.size() == 3 && parts[0] == "sessions" && parts[2] == "step")
      return step(parts[1], j);
    if (method == "GET" && parts.size() == 2 && parts[0] == "sessions") return describe(parts[1]);
    if (method == "POST" && parts.size() == 3 && parts[0] == "rollouts" && parts[2] == "verdicts")
      return add_verdict(parts[1], j);
    if (method == "GET" && parts.size() == 2 && parts[0] == "reports" && parts[1] == "summary")
      return {200, summary()};
    return error_response(404, "no route for " + method + " " + path);
  } catch (const ValidationError& e) {
    return error_response(422, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse Service::create_session(const Json& body) {
  SessionSpec spec;
  try {
    spec.backend = body.value("backend", "oracle");
    spec.task = body.value("task", "default");
    std::vector<std::string> views = body.value("views", std::vector<std::string>{"head"});
    require(!views.empty(), "at least one view is required");
    const CameraRig all = default_rig(true);
    for (const std::string& v : views) {
      try {
        spec.rig.views.push_back(all.at(v));
      } catch (const std::exception&) {
        throw ValidationError("unknown view '" + v + "'");
      }
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed session request: ") + e.what());
  }
  spec.scenario = scenario_for_task(spec.task);

  auto s = std::make_shared<Session>();
  s->backend = options_.backends(spec);
  s->condition = render_views(spec.scenario.world, spec.rig);
  s->arms = {spec.scenario.world.gripper};
  s->memory = SparseMemory();
  {
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    char id[16];
    do {
      std::snprintf(id, sizeof(id), "s%04d", next_id_++);
    } while (fs::exists(rollout_dir(id)));
    s->id = id;
  }
  s->spec = std::move(spec);
  s->record.episode_id = s->id;
  s->record.task_id = s->spec.task;
  s->record.backend_id = s->backend->id();
  Json record = s->record.to_json();
  record["terminated"] = false;
  write_json(rollout_dir(s->id) / "record.json", record);
  {
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    sessions_[s->id] = s;
  }
  return {200, Json{{"session_id", s->id}}};
}

HttpResponse Service::step(const std::string& id, const Json& body) {
  const std::shared_ptr<Session> s = find(id);
  if (!s) return error_response(404, "unknown session " + id);
  std::unique_lock<std::mutex> busy(s->step_mutex, std::try_to_lock);
  if (!busy.owns_lock()) return error_response(409, "a step is already running for " + id);
  if (s->terminated) return error_response(409, "session " + id + " has terminated");
  if (!body.contains("actions")) return error_response(422, "missing 'actions'");
  const std::vector<ArmFrame> actions =
      actions_from_json(body.at("actions"), ArmId::kRight, static_cast<std::size_t>(options_.chunk_size));

  const int chunk = s->record.chunks();
  FrameGrid frames;
  try {
    frames = s->backend->generate({s->condition, s->arms, &s->memory, actions, chunk});
  } catch (const std::exception& e) {
    s->terminated = true;
    s->record.termination = Termination::kBackendError;
    s->record.error = e.what();
    Json record = s->record.to_json();
    record["terminated"] = true;
    write_json(rollout_dir(id) / "record.json", record);
    return error_response(500, std::string("backend failed: ") + e.what());
  }

  const double norm = mean_delta_norm(s->arms, actions);
  s->record.chunk_actions.push_back(actions);
  s->record.chunk_norms.push_back(norm);
  s->memory.update(frames, actions);
  s->condition = frames.back();
  s->arms = actions.back();
  if (norm < options_.eps_term) {
    s->terminated = true;
    s->record.termination = Termination::kThreshold;
  } else if (s->record.chunks() >= options_.max_chunks) {
    s->terminated = true;
    s->record.termination = Termination::kMaxChunks;
  }

  Json per_view = Json::object();
  for (std::size_t v = 0; v < s->spec.rig.size(); ++v) {
    Json list = Json::array();
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const std::vector<std::uint8_t> png = encode_png(frames[k][v]);
      char name[32];
      std::snprintf(name, sizeof(name), "%04zu.png", static_cast<std::size_t>(chunk) * frames.size() + k);
      write_file(rollout_dir(id) / "frames" / s->spec.rig.views[v].name / name, png);
      list.push_back(base64_encode(png));
    }
    per_view[s->spec.rig.views[v].name] = std::move(list);
  }
  s->record.frames.insert(s->record.frames.end(), frames.begin(), frames.end());
  Json record = s->record.to_json();
  record["terminated"] = s->terminated;
  write_json(rollout_dir(id) / "record.json", record);
  return {200, Json{{"frames", per_view}, {"chunk_index", chunk}, {"terminated", s->terminated}}};
}

HttpResponse Service::describe(const std::string& id) {
  const std::shared_ptr<Session> s = find(id);
  if (!s) return error_response(404, "unknown session " + id);
  std::lock_guard<std::mutex> busy(s->step_mutex);
  Json views = Json::array();
  for (const CameraView& v : s->spec.rig.views) views.push_back(v.name);
  const ActionState& a = s->arms.front();
  return {200, Json{{"session_id", s->id},
                    {"backend", s->backend->id()},
                    {"task", s->spec.task},
                    {"description", s->spec.scenario.task.description},
                    {"views", views},
                    {"chunk_index", s->record.chunks()},
                    {"chunk_size", options_.chunk_size},
                    {"max_chunks", options_.max_chunks},
                    {"memory_frames", s->memory.size()},
                    {"terminated", s->terminated},
                    {"termination", s->terminated ? to_string(s->record.termination) : ""},
                    {"arm", {a.pose.position.x(), a.pose.position.y(), a.pose.position.z(),
                             a.pose.rpy.x(), a.pose.rpy.y(), a.pose.rpy.z(), a.openness}}}};
}

HttpResponse Service::add_verdict(const std::string& rollout, const Json& body) {
  if (!valid_id(rollout) || !fs::exists(rollout_dir(rollout) / "record.json"))
    return error_response(404, "unknown rollout " + rollout);
  Verdict v;
  try {
    v.rollout_id = rollout;
    v.evaluator = body.at("evaluator").get<std::string>();
    v.label = label_from_string(body.at("label").get<std::string>());
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed verdict: ") + e.what());
  }
  require(!v.evaluator.empty(), "evaluator must be non-empty");
  v.timestamp = utc_timestamp();
  std::lock_guard<std::mutex> lock(verdict_mutex_);
  try {
    verdicts_.add(v);
  } catch (const DuplicateVerdictError& e) {
    return error_response(409, e.what());
  }
  std::ofstream out(rollout_dir(rollout) / "verdicts.jsonl", std::ios::app);
  out << v.to_json().dump() << '\n';
  if (!out) throw IoError(rollout_dir(rollout) / "verdicts.jsonl", "append failed");
  return {200, v.to_json()};
}

Json Service::summary() const {
  std::vector<fs::path> dirs;
  const fs::path rollouts = options_.root / "rollouts";
  if (fs::exists(rollouts))
    for (const auto& entry : fs::directory_iterator(rollouts))
      if (fs::exists(entry.path() / "record.json")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());

  struct Cell {
    int episodes = 0;
    int successes = 0;
  };
  std::map<std::pair<std::string, std::string>, Cell> cells;
  Json rows = Json::array();
  for (const fs::path& dir : dirs) {
    const Json record = read_json(dir / "record.json");
    std::vector<Verdict> verdicts;
    std::ifstream in(dir / "verdicts.jsonl");
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) verdicts.push_back(Verdict::from_json(Json::parse(line)));
    Json row{{"rollout_id", dir.filename().string()},
             {"task_id", record.value("task_id", "")},
             {"backend_id", record.value("backend_id", "")},
             {"chunks", record.value("chunks", 0)},
             {"verdicts", verdicts.size()}};
    if (!verdicts.empty()) {
      const Label m = majority(verdicts);
      row["majority"] = to_string(m);
      Cell& c = cells[{row["task_id"].get<std::string>(), row["backend_id"].get<std::string>()}];
      ++c.episodes;
      if (m == Label::kSuccess) ++c.successes;
    }
    rows.push_back(std::move(row));
  }
  Json table = Json::array();
  int episodes = 0, successes = 0;
  for (const auto& [key, c] : cells) {
    table.push_back({{"task_id", key.first},
                     {"backend_id", key.second},
                     {"episodes", c.episodes},
                     {"successes", c.successes},
                     {"rate", static_cast<double>(c.successes) / c.episodes}});
    episodes += c.episodes;
    successes += c.successes;
  }
  return Json{{"rollouts", rows},
              {"table", table},
              {"episodes", episodes},
              {"successes", successes},
              {"rate", episodes > 0 ? static_cast<double>(successes) / episodes : 0.0}};
}

void serve(Service& service, const std::string& host, int port) {
  httplib::Server server;
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(".*", forward);
  server.Post(".*", forward);
  log(LogLevel::kInfo, "listening on " + host + ":" + std::to_string(port));
  if (!server.listen(host, port)) throw Error("could not listen on " + host + ":" + std::to_string(port));
}

}  // namespace acwm
