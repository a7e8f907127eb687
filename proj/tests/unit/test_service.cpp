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

#include <doctest.h>

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <future>
#include <thread>

#include "acwm/service.hpp"

using namespace acwm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("acwm_test_service_" + name);
  fs::remove_all(p);
  return p;
}

std::unique_ptr<WorldModelBackend> oracle_factory(const SessionSpec& spec) {
  if (spec.backend != "oracle") throw ValidationError("unknown backend '" + spec.backend + "'");
  return std::make_unique<OracleBackend>(spec.scenario.world, spec.rig);
}

ServiceOptions options(const fs::path& root) {
  ServiceOptions o;
  o.root = root;
  o.backends = oracle_factory;
  return o;
}

Json hold_actions(const ActionState& s, int rows = 16, double dx = 0.0) {
  Json a = Json::array();
  for (int i = 0; i < rows; ++i)
    a.push_back({s.pose.position.x() + dx * (i + 1), s.pose.position.y(), s.pose.position.z(), s.pose.rpy.x(),
                 s.pose.rpy.y(), s.pose.rpy.z(), s.openness});
  return a;
}

Json step_body(const Json& actions) { return Json{{"actions", actions}}; }

std::string open_session(Service& svc, const Json& body = Json::object()) {
  const HttpResponse r = svc.handle("POST", "/sessions", body.dump());
  REQUIRE(r.status == 200);
  return r.body.at("session_id").get<std::string>();
}

// Blocks in generate() until released.
class GatedBackend : public WorldModelBackend {
 public:
  GatedBackend(OracleBackend inner, std::promise<void>* entered, std::shared_future<void> gate)
      : inner_(std::move(inner)), entered_(entered), gate_(std::move(gate)) {}
  std::string id() const override { return "gated"; }
  const CameraRig& rig() const override { return inner_.rig(); }
  FrameGrid generate(const GenerationRequest& request) override {
    if (entered_) {
      entered_->set_value();
      entered_ = nullptr;
    }
    gate_.wait();
    return inner_.generate(request);
  }

 private:
  OracleBackend inner_;
  std::promise<void>* entered_;
  std::shared_future<void> gate_;
};

}  // namespace

TEST_CASE("routes and validation") {
  Service svc(options(scratch("routes")));
  CHECK(svc.handle("GET", "/nowhere", "").status == 404);
  CHECK(svc.handle("POST", "/sessions/s9999/step", step_body(Json::array()).dump()).status == 404);
  CHECK(svc.handle("GET", "/sessions/s9999", "").status == 404);
  CHECK(svc.handle("POST", "/rollouts/s9999/verdicts", R"({"evaluator":"a","label":"success"})").status == 404);
  CHECK(svc.handle("POST", "/sessions", "{not json").status == 422);
  CHECK(svc.handle("POST", "/sessions", R"({"task":"nowhere"})").status == 422);
  CHECK(svc.handle("POST", "/sessions", R"({"views":["nose"]})").status == 422);
  CHECK(svc.handle("POST", "/sessions", R"({"backend":"magic"})").status == 422);

  const std::string id = open_session(svc);
  const ActionState start = default_scenario().world.gripper;
  CHECK(svc.handle("POST", "/sessions/" + id + "/step", step_body(hold_actions(start, 15)).dump()).status ==
        422);
  CHECK(svc.handle("POST", "/sessions/" + id + "/step", "{}").status == 422);
  Json nan_rows = hold_actions(start);
  nan_rows[3][1] = "north";
  CHECK(svc.handle("POST", "/sessions/" + id + "/step", step_body(nan_rows).dump()).status == 422);
  // Rejected requests leave the session untouched.
  CHECK(svc.handle("GET", "/sessions/" + id, "").body["chunk_index"] == 0);
}

TEST_CASE("stepping a session") {
  const fs::path root = scratch("step");
  Service svc(options(root));
  const std::string id = open_session(svc, Json{{"views", {"head", "wrist"}}});
  const ActionState start = default_scenario().world.gripper;

  HttpResponse r = svc.handle("POST", "/sessions/" + id + "/step", step_body(hold_actions(start, 16, 0.002)).dump());
  REQUIRE(r.status == 200);
  CHECK(r.body["chunk_index"] == 0);
  CHECK(r.body["terminated"] == false);
  CHECK(r.body["frames"]["head"].size() == 16);
  CHECK(r.body["frames"]["wrist"].size() == 16);
  const Image first = decode_png(base64_decode(r.body["frames"]["head"][0].get<std::string>()));
  CHECK(first.width() == 128);
  CHECK(fs::exists(root / "rollouts" / id / "frames" / "wrist" / "0015.png"));

  ActionState moved = start;
  moved.pose.position.x() += 0.032;
  r = svc.handle("POST", "/sessions/" + id + "/step", step_body(hold_actions(moved)).dump());
  REQUIRE(r.status == 200);
  CHECK(r.body["chunk_index"] == 1);
  CHECK(r.body["terminated"] == true);

  const Json state = svc.handle("GET", "/sessions/" + id, "").body;
  CHECK(state["chunk_index"] == 2);
  CHECK(state["termination"] == "threshold");
  CHECK(state["memory_frames"].get<int>() > 0);
  CHECK(state["arm"][0].get<double>() == doctest::Approx(moved.pose.position.x()));
  CHECK(svc.handle("POST", "/sessions/" + id + "/step", step_body(hold_actions(moved)).dump()).status == 409);

  const Json record = read_json(root / "rollouts" / id / "record.json");
  CHECK(record["chunks"] == 2);
  CHECK(record["termination"] == "threshold");
}

TEST_CASE("max chunks ends a session") {
  ServiceOptions o = options(scratch("max"));
  o.max_chunks = 2;
  Service svc(o);
  const std::string id = open_session(svc);
  ActionState s = default_scenario().world.gripper;
  for (int c = 0; c < 2; ++c) {
    const HttpResponse r = svc.handle("POST", "/sessions/" + id + "/step", step_body(hold_actions(s, 16, 0.002)).dump());
    REQUIRE(r.status == 200);
    CHECK(r.body["terminated"] == (c == 1));
    s.pose.position.x() += 0.032;
  }
  CHECK(svc.handle("GET", "/sessions/" + id, "").body["termination"] == "max_chunks");
}

TEST_CASE("verdicts and the summary survive a restart") {
  const fs::path root = scratch("verdicts");
  Json before;
  {
    Service svc(options(root));
    const std::string a = open_session(svc);
    const std::string b = open_session(svc, Json{{"task", "random:3"}});
    auto verdict = [&](const std::string& id, const std::string& who, const std::string& label) {
      return svc.handle("POST", "/rollouts/" + id + "/verdicts", Json{{"evaluator", who}, {"label", label}}.dump());
    };
    CHECK(verdict(a, "ann", "success").status == 200);
    CHECK(verdict(a, "bo", "success").status == 200);
    CHECK(verdict(a, "cy", "failure").status == 200);
    CHECK(verdict(a, "ann", "failure").status == 409);
    CHECK(verdict(a, "dee", "meh").status == 422);
    CHECK(verdict(a, "", "success").status == 422);
    CHECK(verdict(b, "ann", "success").status == 200);
    CHECK(verdict(b, "bo", "failure").status == 200);
    CHECK(verdict("../etc", "ann", "success").status == 404);

    before = svc.handle("GET", "/reports/summary", "").body;
    CHECK(before["episodes"] == 2);
    CHECK(before["successes"] == 1);
    CHECK(before["rate"] == 0.5);
    CHECK(before["rollouts"][0]["majority"] == "success");
    CHECK(before["rollouts"][1]["majority"] == "failure");
  }
  Service again(options(root));
  CHECK(again.handle("GET", "/reports/summary", "").body == before);
  // Duplicates are still caught from the persisted verdicts.
  CHECK(again.handle("POST", "/rollouts/s0001/verdicts", R"({"evaluator":"ann","label":"success"})").status == 409);
  // New sessions do not reuse ids.
  CHECK(open_session(again) == "s0003");
}

TEST_CASE("concurrent steps on one session") {
  std::promise<void> entered;
  std::promise<void> release;
  std::shared_future<void> gate = release.get_future().share();
  ServiceOptions o;
  o.root = scratch("concurrent");
  o.backends = [&](const SessionSpec& spec) -> std::unique_ptr<WorldModelBackend> {
    return std::make_unique<GatedBackend>(OracleBackend(spec.scenario.world, spec.rig), &entered, gate);
  };
  Service svc(o);
  const std::string id = open_session(svc);
  const std::string body = step_body(hold_actions(default_scenario().world.gripper, 16, 0.002)).dump();

  auto first = std::async(std::launch::async, [&] { return svc.handle("POST", "/sessions/" + id + "/step", body); });
  entered.get_future().wait();
  const HttpResponse second = svc.handle("POST", "/sessions/" + id + "/step", body);
  release.set_value();
  const HttpResponse r1 = first.get();
  CHECK(r1.status == 200);
  CHECK(second.status == 409);
  CHECK(svc.handle("GET", "/sessions/" + id, "").body["chunk_index"] == 1);
}

TEST_CASE("backend failure ends the session") {
  const fs::path root = scratch("failing");
  ServiceOptions o = options(root);
  o.backends = [](const SessionSpec& spec) -> std::unique_ptr<WorldModelBackend> {
    WorldState other = spec.scenario.world;
    other.objects.front().position.x() += 0.1;
    return std::make_unique<OracleBackend>(other, spec.rig);
  };
  Service svc(o);
  const std::string id = open_session(svc);
  const std::string body = step_body(hold_actions(default_scenario().world.gripper, 16, 0.002)).dump();
  CHECK(svc.handle("POST", "/sessions/" + id + "/step", body).status == 500);
  CHECK(svc.handle("POST", "/sessions/" + id + "/step", body).status == 409);
  CHECK(read_json(root / "rollouts" / id / "record.json")["termination"] == "backend_error");

  ServiceOptions bad = options(scratch("broken"));
  bad.backends = [](const SessionSpec&) -> std::unique_ptr<WorldModelBackend> { throw Error("no weights"); };
  Service broken(bad);
  CHECK(broken.handle("POST", "/sessions", "{}").status == 500);
}
