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

// Kinematic tabletop world: one floating gripper, attachable objects, a
// checkered table and flat-shaded rendering. Everything is deterministic, so
// the simulator doubles as an exact ground-truth backend.

#ifndef ACWM_WORLD_HPP_
#define ACWM_WORLD_HPP_

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "acwm/backend.hpp"
#include "acwm/geometry.hpp"
#include "acwm/image.hpp"

namespace acwm {

enum class ObjectShape : std::uint8_t { kSphere, kBox };

struct Aabb {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();

  bool empty() const { return !(lo.array() < hi.array()).all(); }
  // Strict interior.
  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() > lo.array()).all() && (p.array() < hi.array()).all();
  }
  Eigen::Vector3d center() const { return 0.5 * (lo + hi); }
};

struct WorldObject {
  int id = 0;
  ObjectShape shape = ObjectShape::kSphere;
  double half_extent = 0.02;  // radius for spheres
  Rgb color{200, 40, 40};
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  bool attached = false;
  // Pose relative to the gripper while attached.
  Eigen::Vector3d grip_offset = Eigen::Vector3d::Zero();
  double grip_yaw = 0.0;
};

struct WorldParams {
  double grip_threshold = 0.5;
  double grasp_radius = 0.02;  // rho
  Aabb workspace{{-0.45, -0.45, 0.0}, {0.45, 0.45, 0.6}};
};

struct WorldState {
  ActionState gripper;
  std::vector<WorldObject> objects;
  double table_height = 0.0;
  std::optional<Aabb> goal_marker;  // painted on the table when set

  double support_height(const WorldObject& o) const { return table_height + o.half_extent; }
  const WorldObject& object(int id) const;
  WorldObject& object(int id);
  std::uint64_t hash() const;
};

struct TaskSpec {
  int target_id = 0;
  Aabb goal;
  std::string description;

  void validate() const;
};

struct Scenario {
  WorldState world;
  TaskSpec task;
};

// Release (opening through the threshold), then move, then grasp (closing
// through the threshold with an object center within rho).
WorldState step(const WorldState& state, const ActionState& action, const WorldParams& params = {});

bool success(const WorldState& state, const TaskSpec& task);

struct SceneStyle {
  Rgb background{28, 30, 36};
  Rgb tile_light{168, 150, 120};
  Rgb tile_dark{140, 124, 98};
  double tile_size = 0.1;
  double table_half_size = 0.5;
  Rgb goal_light{96, 168, 96};
  Rgb goal_dark{80, 142, 80};
  Rgb palm{225, 225, 230};
  Rgb finger{150, 150, 160};
};

Image render(const WorldState& state, const CameraView& view, const SceneStyle& style = {});
std::vector<Image> render_views(const WorldState& state, const CameraRig& rig,
                                const SceneStyle& style = {});

// Static head pinhole plus a wrist camera 8 cm up the gripper's z axis,
// looking along the approach axis (-z). With fisheye, adds two static
// equidistant side views.
CameraRig default_rig(bool with_fisheye = false);
CameraModel default_camera();

Scenario default_scenario();
// Random target/distractor/goal layout; the gripper starts open and high.
Scenario random_scenario(std::mt19937_64& rng);

// Scripted pick-and-place -----------------------------------------------------

class PlanningError : public Error {
 public:
  using Error::Error;
};

struct PolicyNoise {
  double sigma = 0.0;        // std of Gaussian waypoint jitter, meters
  bool empty_grasp = false;  // grasp beside the target instead of at it
  double empty_grasp_offset = 0.08;
};

struct PlanOptions {
  double max_step = 0.02;    // meters per frame
  double hover_height = 0.12;
  int gripper_frames = 4;    // frames to close or open
};

// Open-loop waypoint plan, one ActionState per frame, starting after the
// current gripper state: above target, descend, close, lift, above goal,
// descend, open, retreat.
std::vector<ActionState> plan_pick_place(const WorldState& state, const TaskSpec& task,
                                         const PolicyNoise& noise, std::mt19937_64& rng,
                                         const PlanOptions& options = {});

// Emits the plan in chunks of K, holding the final pose once it runs out.
class ScriptedPolicy : public Policy {
 public:
  ScriptedPolicy(const WorldState& initial, const TaskSpec& task, const PolicyNoise& noise,
                 std::uint64_t seed, int chunk_size = 16, const PlanOptions& options = {});

  std::vector<ArmFrame> next_chunk(const Observation& obs) override;
  const std::vector<ActionState>& plan() const { return plan_; }

 private:
  std::vector<ActionState> plan_;
  std::size_t cursor_ = 0;
  int chunk_size_;
};

// The K-frame chunk a fresh scripted policy emits first.
std::vector<ArmFrame> scripted_policy(const WorldState& state, const TaskSpec& task,
                                      const PolicyNoise& noise, std::uint64_t seed,
                                      int chunk_size = 16);

// Ground-truth backend --------------------------------------------------------

class DesyncError : public Error {
 public:
  using Error::Error;
};

class OracleBackend : public WorldModelBackend {
 public:
  OracleBackend(WorldState initial, CameraRig rig, WorldParams params = {}, SceneStyle style = {});

  std::string id() const override { return "oracle"; }
  const CameraRig& rig() const override { return rig_; }
  // Throws DesyncError when the condition frames are not renders of the
  // current true state.
  FrameGrid generate(const GenerationRequest& request) override;

  const WorldState& state() const { return state_; }
  void reset(WorldState state) { state_ = std::move(state); }

 private:
  WorldState state_;
  CameraRig rig_;
  WorldParams params_;
  SceneStyle style_;
};

// Steps the world through `actions` and renders every frame.
FrameGrid simulate(WorldState& state, std::span<const ArmFrame> actions, const CameraRig& rig,
                   const WorldParams& params = {}, const SceneStyle& style = {});

}  // namespace acwm

#endif  // ACWM_WORLD_HPP_
