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

#include "acwm/world.hpp"

#include <algorithm>
#include <cmath>

namespace acwm {
namespace {

std::uint64_t hash_vec(const Eigen::Vector3d& v, std::uint64_t h) {
  for (int i = 0; i < 3; ++i) h = fnv1a_pod(v[i], h);
  return h;
}

Eigen::Vector3d clamp_to(const Aabb& box, const Eigen::Vector3d& p) {
  return p.cwiseMax(box.lo).cwiseMin(box.hi);
}

Eigen::Matrix3d yaw_matrix(double yaw) {
  return Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

}  // namespace

const WorldObject& WorldState::object(int id) const {
  for (const WorldObject& o : objects)
    if (o.id == id) return o;
  throw ValidationError("unknown object id " + std::to_string(id));
}

WorldObject& WorldState::object(int id) {
  return const_cast<WorldObject&>(static_cast<const WorldState&>(*this).object(id));
}

std::uint64_t WorldState::hash() const {
  std::uint64_t h = fnv1a("acwm.world.v1");
  h = hash_vec(gripper.pose.position, h);
  h = hash_vec(gripper.pose.rpy, h);
  h = fnv1a_pod(gripper.openness, h);
  h = fnv1a_pod(gripper.arm, h);
  for (const WorldObject& o : objects) {
    h = fnv1a_pod(o.id, h);
    h = fnv1a_pod(o.shape, h);
    h = fnv1a_pod(o.half_extent, h);
    h = fnv1a_pod(o.color, h);
    h = hash_vec(o.position, h);
    h = fnv1a_pod(o.yaw, h);
    h = fnv1a_pod(o.attached, h);
    h = hash_vec(o.grip_offset, h);
    h = fnv1a_pod(o.grip_yaw, h);
  }
  h = fnv1a_pod(table_height, h);
  if (goal_marker) h = hash_vec(goal_marker->hi, hash_vec(goal_marker->lo, h));
  return h;
}

void TaskSpec::validate() const {
  require(!goal.empty(), "goal region is empty");
}

WorldState step(const WorldState& state, const ActionState& action, const WorldParams& params) {
  require(action.pose.is_finite() && std::isfinite(action.openness), "action is not finite");
  WorldState next = state;
  ActionState a = action;
  a.pose.position = clamp_to(params.workspace, a.pose.position);
  a.openness = std::clamp(a.openness, 0.0, 1.0);
  const double before = state.gripper.openness;
  const bool opening = before < params.grip_threshold && a.openness >= params.grip_threshold;
  const bool closing = before >= params.grip_threshold && a.openness < params.grip_threshold;

  if (opening) {
    for (WorldObject& o : next.objects) {
      if (!o.attached) continue;
      o.attached = false;
      o.position.z() = next.support_height(o);
    }
  }

  // Attached objects only move when the gripper does, so holding still is
  // exactly a no-op.
  const bool moved = !(a.pose == state.gripper.pose);
  next.gripper = a;
  const Eigen::Isometry3d eef = to_isometry(a.pose);
  if (moved) {
    for (WorldObject& o : next.objects) {
      if (!o.attached) continue;
      o.position = eef * o.grip_offset;
      o.yaw = wrap_angle(a.pose.rpy.z() + o.grip_yaw);
    }
  }

  if (closing && std::none_of(next.objects.begin(), next.objects.end(),
                              [](const WorldObject& o) { return o.attached; })) {
    WorldObject* nearest = nullptr;
    double best = params.grasp_radius;
    for (WorldObject& o : next.objects) {
      const double d = (o.position - a.pose.position).norm();
      if (d <= best) {
        best = d;
        nearest = &o;
      }
    }
    if (nearest != nullptr) {
      nearest->attached = true;
      nearest->grip_offset = eef.inverse() * nearest->position;
      nearest->grip_yaw = wrap_angle(nearest->yaw - a.pose.rpy.z());
    }
  }
  return next;
}

bool success(const WorldState& state, const TaskSpec& task) {
  const WorldObject& o = state.object(task.target_id);
  return !o.attached && task.goal.contains(o.position);
}

// Rendering -------------------------------------------------------------------

namespace {

struct Primitive {
  double depth;
  int order;
  enum class Kind { kDisk, kBox } kind;
  Eigen::Vector3d center;
  double size;
  double yaw;
  Rgb color;
};

Rgb brighten(Rgb c) {
  auto f = [](std::uint8_t v) { return static_cast<std::uint8_t>(std::min(255, v + v / 5 + 12)); };
  return {f(c.r), f(c.g), f(c.b)};
}

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 1 ? k - 1 : k);
  return hull;
}

void draw_disk(Image& img, const Primitive& p, const CameraModel& cam, const Eigen::Isometry3d& wc) {
  const auto proj = try_project(p.center, cam, wc);
  if (!proj) return;
  const double r = cam.fx * p.size / proj->depth;
  const int radius = std::clamp(static_cast<int>(std::lround(r)), 1, 200);
  fill_circle(img, static_cast<int>(std::floor(proj->u)), static_cast<int>(std::floor(proj->v)),
              radius, p.color);
}

void draw_box(Image& img, const Primitive& p, const CameraModel& cam, const Eigen::Isometry3d& wc) {
  const Eigen::Matrix3d R = yaw_matrix(p.yaw);
  std::vector<Eigen::Vector2d> all, top;
  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector3d local((i & 1) ? p.size : -p.size, (i & 2) ? p.size : -p.size,
                                (i & 4) ? p.size : -p.size);
    const auto proj = try_project(p.center + R * local, cam, wc);
    if (!proj) return;
    all.emplace_back(proj->u, proj->v);
    if (i & 4) top.emplace_back(proj->u, proj->v);
  }
  fill_convex_polygon(img, convex_hull(all), p.color);
  if (wc.translation().z() > p.center.z() + p.size)
    fill_convex_polygon(img, convex_hull(top), brighten(p.color));
}

}  // namespace

Image render(const WorldState& state, const CameraView& view, const SceneStyle& style) {
  const CameraModel& cam = view.model;
  const Eigen::Isometry3d wc = view.extrinsics.resolve({state.gripper});
  const Eigen::Vector3d origin = wc.translation();
  const Eigen::Matrix3d R = wc.linear();
  Image img(cam.width, cam.height, style.background);

  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      const Eigen::Vector3d d = R * back_project(c + 0.5, r + 0.5, cam);
      if (!(d.z() < -1e-12)) continue;
      const double s = (state.table_height - origin.z()) / d.z();
      if (s <= 0.0) continue;
      const Eigen::Vector3d p = origin + s * d;
      if (std::abs(p.x()) > style.table_half_size || std::abs(p.y()) > style.table_half_size)
        continue;
      const long tx = static_cast<long>(std::floor(p.x() / style.tile_size));
      const long ty = static_cast<long>(std::floor(p.y() / style.tile_size));
      const bool light = ((tx + ty) & 1) == 0;
      const bool in_goal = state.goal_marker && p.x() > state.goal_marker->lo.x() &&
                           p.x() < state.goal_marker->hi.x() && p.y() > state.goal_marker->lo.y() &&
                           p.y() < state.goal_marker->hi.y();
      const Rgb color = in_goal ? (light ? style.goal_light : style.goal_dark)
                                : (light ? style.tile_light : style.tile_dark);
      img.set(r, c, color);
    }
  }

  std::vector<Primitive> prims;
  int order = 0;
  for (const WorldObject& o : state.objects) {
    prims.push_back({(o.position - origin).norm(), order++,
                     o.shape == ObjectShape::kSphere ? Primitive::Kind::kDisk : Primitive::Kind::kBox,
                     o.position, o.half_extent, o.yaw, o.color});
  }
  const bool own_wrist = view.extrinsics.attachment && view.extrinsics.attachment->arm == state.gripper.arm;
  if (!own_wrist) {
    const Eigen::Isometry3d eef = to_isometry(state.gripper.pose);
    const double spread = 0.008 + 0.022 * std::clamp(state.gripper.openness, 0.0, 1.0);
    const Eigen::Vector3d palm = eef * Eigen::Vector3d(0, 0, 0.03);
    prims.push_back({(palm - origin).norm(), order++, Primitive::Kind::kDisk, palm, 0.012, 0.0, style.palm});
    for (double side : {-1.0, 1.0}) {
      const Eigen::Vector3d f = eef * Eigen::Vector3d(0, side * spread, 0.005);
      prims.push_back({(f - origin).norm(), order++, Primitive::Kind::kDisk, f, 0.007, 0.0, style.finger});
    }
  }
  std::sort(prims.begin(), prims.end(), [](const Primitive& a, const Primitive& b) {
    return a.depth > b.depth || (a.depth == b.depth && a.order < b.order);
  });
  for (const Primitive& p : prims) {
    if (p.kind == Primitive::Kind::kDisk)
      draw_disk(img, p, cam, wc);
    else
      draw_box(img, p, cam, wc);
  }
  return img;
}

std::vector<Image> render_views(const WorldState& state, const CameraRig& rig, const SceneStyle& style) {
  std::vector<Image> out;
  out.reserve(rig.size());
  for (const CameraView& v : rig.views) out.push_back(render(state, v, style));
  return out;
}

CameraModel default_camera() { return CameraModel{}; }

CameraRig default_rig(bool with_fisheye) {
  CameraRig rig;
  CameraView head{"head", default_camera(), {}};
  head.extrinsics.world_from_camera =
      look_at(Eigen::Vector3d(0.0, -0.42, 0.5), Eigen::Vector3d(0.0, 0.02, 0.0));
  rig.views.push_back(head);

  CameraView wrist{"wrist", default_camera(), {}};
  CameraAttachment mount;
  mount.arm = ArmId::kRight;
  mount.eef_from_camera.translation() = Eigen::Vector3d(0.0, 0.0, 0.08);
  mount.eef_from_camera.linear() = Eigen::AngleAxisd(kPi, Eigen::Vector3d::UnitX()).toRotationMatrix();
  wrist.extrinsics.attachment = mount;
  rig.views.push_back(wrist);

  if (with_fisheye) {
    CameraModel fish = default_camera();
    fish.kind = CameraKind::kEquidistantFisheye;
    fish.fx = fish.fy = 40.0;
    for (double side : {-1.0, 1.0}) {
      CameraView v{side < 0 ? "head_left" : "head_right", fish, {}};
      v.extrinsics.world_from_camera =
          look_at(Eigen::Vector3d(side * 0.45, -0.35, 0.45), Eigen::Vector3d(0.0, 0.05, 0.03));
      rig.views.push_back(v);
    }
  }
  return rig;
}

Scenario default_scenario() {
  Scenario s;
  s.world.gripper.pose.position = Eigen::Vector3d(0.0, -0.15, 0.25);
  s.world.gripper.openness = 1.0;
  WorldObject target{1, ObjectShape::kSphere, 0.03, Rgb{210, 50, 50}, {0.0, 0.06, 0.03}};
  WorldObject distractor{2, ObjectShape::kBox, 0.03, Rgb{60, 90, 210}, {-0.16, 0.12, 0.03}, 0.3};
  s.world.objects = {target, distractor};
  s.task.target_id = 1;
  s.task.goal = Aabb{{0.10, -0.12, 0.0}, {0.20, -0.02, 0.10}};
  s.task.description = "put the red ball in the green square";
  s.world.goal_marker = s.task.goal;
  return s;
}

Scenario random_scenario(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  static const Rgb kPalette[] = {{210, 50, 50}, {60, 90, 210}, {230, 200, 40}, {160, 60, 190}, {40, 190, 200}};
  Scenario s;
  s.world.gripper.pose.position = Eigen::Vector3d(uni(-0.1, 0.1), uni(-0.2, -0.1), uni(0.2, 0.28));
  s.world.gripper.openness = 1.0;

  const int c0 = static_cast<int>(u(rng) * 5) % 5;
  const int c1 = (c0 + 1 + static_cast<int>(u(rng) * 4) % 4) % 5;
  const double half = uni(0.025, 0.035);
  WorldObject target{1, u(rng) < 0.5 ? ObjectShape::kSphere : ObjectShape::kBox, half, kPalette[c0],
                     {uni(-0.15, 0.15), uni(-0.02, 0.15), half}, uni(-kPi / 4, kPi / 4)};
  Eigen::Vector2d goal;
  do {
    goal = {uni(-0.15, 0.15), uni(-0.2, 0.0)};
  } while ((goal - target.position.head<2>()).norm() < 0.12);
  Eigen::Vector2d other;
  do {
    other = {uni(-0.2, 0.2), uni(-0.2, 0.18)};
  } while ((other - target.position.head<2>()).norm() < 0.12 || (other - goal).norm() < 0.1);
  const double dhalf = uni(0.025, 0.035);
  WorldObject distractor{2, u(rng) < 0.5 ? ObjectShape::kSphere : ObjectShape::kBox, dhalf,
                         kPalette[c1], {other.x(), other.y(), dhalf}, uni(-kPi / 4, kPi / 4)};
  s.world.objects = {target, distractor};
  s.task.target_id = 1;
  s.task.goal = Aabb{{goal.x() - 0.05, goal.y() - 0.05, 0.0}, {goal.x() + 0.05, goal.y() + 0.05, 0.1}};
  s.task.description = "place the target in the goal square";
  s.world.goal_marker = s.task.goal;
  return s;
}

// Scripted policy -------------------------------------------------------------

std::vector<ActionState> plan_pick_place(const WorldState& state, const TaskSpec& task,
                                         const PolicyNoise& noise, std::mt19937_64& rng,
                                         const PlanOptions& options) {
  task.validate();
  require(noise.sigma >= 0.0, "noise sigma must be non-negative");
  const WorldParams params;
  const WorldObject& target = state.object(task.target_id);
  auto inside_xy = [&](const Eigen::Vector3d& p) {
    return p.x() > params.workspace.lo.x() && p.x() < params.workspace.hi.x() &&
           p.y() > params.workspace.lo.y() && p.y() < params.workspace.hi.y();
  };
  if (!inside_xy(target.position) || target.position.z() > params.workspace.hi.z())
    throw PlanningError("target lies outside the workspace");
  const Eigen::Vector3d goal_center = task.goal.center();
  if (!inside_xy(goal_center)) throw PlanningError("goal lies outside the workspace");

  std::normal_distribution<double> normal(0.0, 1.0);
  auto jitter = [&]() -> Eigen::Vector3d {
    if (noise.sigma == 0.0) return Eigen::Vector3d::Zero();
    Eigen::Vector3d j;
    for (int i = 0; i < 3; ++i) j[i] = noise.sigma * normal(rng);
    return j;
  };

  Eigen::Vector3d grasp_offset = Eigen::Vector3d::Zero();
  if (noise.empty_grasp) {
    // Beside the target, on the side away from every other object.
    double best = -1.0;
    for (double angle = 0.0; angle < 2 * kPi - 1e-9; angle += kPi / 4) {
      const Eigen::Vector3d off(noise.empty_grasp_offset * std::cos(angle),
                                noise.empty_grasp_offset * std::sin(angle), 0.0);
      const Eigen::Vector3d p = target.position + off;
      if (!inside_xy(p)) continue;
      double clearance = 1e9;
      for (const WorldObject& o : state.objects)
        if (o.id != target.id) clearance = std::min(clearance, (o.position - p).norm());
      if (clearance > best) {
        best = clearance;
        grasp_offset = off;
      }
    }
  }

  const Eigen::Vector3d up(0, 0, options.hover_height);
  const Eigen::Vector3d grasp = target.position + grasp_offset;
  const Eigen::Vector3d place(goal_center.x(), goal_center.y(), state.support_height(target) + 0.005);
  auto wp = [&](const Eigen::Vector3d& p) { return clamp_to(params.workspace, p + jitter()); };

  std::vector<ActionState> plan;
  ActionState cur = state.gripper;
  auto move_to = [&](const Eigen::Vector3d& q) {
    const Eigen::Vector3d p = cur.pose.position;
    const int n = std::max(1, static_cast<int>(std::ceil((q - p).norm() / options.max_step - 1e-9)));
    for (int i = 1; i <= n; ++i) {
      cur.pose.position = i == n ? q : Eigen::Vector3d(p + (static_cast<double>(i) / n) * (q - p));
      plan.push_back(cur);
    }
  };
  auto set_gripper = [&](double target_openness) {
    const double from = cur.openness;
    for (int i = 1; i <= options.gripper_frames; ++i) {
      cur.openness = from + (target_openness - from) * i / options.gripper_frames;
      plan.push_back(cur);
    }
  };

  move_to(wp(grasp + up));
  move_to(wp(grasp));
  set_gripper(0.0);
  move_to(wp(grasp + up));
  move_to(wp(place + up));
  move_to(wp(place));
  set_gripper(1.0);
  move_to(wp(place + up));
  return plan;
}

ScriptedPolicy::ScriptedPolicy(const WorldState& initial, const TaskSpec& task,
                               const PolicyNoise& noise, std::uint64_t seed, int chunk_size,
                               const PlanOptions& options)
    : chunk_size_(chunk_size) {
  require(chunk_size >= 1, "chunk size must be positive");
  std::mt19937_64 rng(seed);
  plan_ = plan_pick_place(initial, task, noise, rng, options);
  if (plan_.empty()) plan_.push_back(initial.gripper);
}

std::vector<ArmFrame> ScriptedPolicy::next_chunk(const Observation&) {
  std::vector<ArmFrame> chunk;
  chunk.reserve(chunk_size_);
  for (int i = 0; i < chunk_size_; ++i) {
    const std::size_t k = std::min(cursor_, plan_.size() - 1);
    chunk.push_back({plan_[k]});
    ++cursor_;
  }
  return chunk;
}

std::vector<ArmFrame> scripted_policy(const WorldState& state, const TaskSpec& task,
                                      const PolicyNoise& noise, std::uint64_t seed, int chunk_size) {
  ScriptedPolicy policy(state, task, noise, seed, chunk_size);
  return policy.next_chunk({});
}

// Oracle backend ----------------------------------------------------------------

FrameGrid simulate(WorldState& state, std::span<const ArmFrame> actions, const CameraRig& rig,
                   const WorldParams& params, const SceneStyle& style) {
  FrameGrid frames;
  frames.reserve(actions.size());
  for (const ArmFrame& a : actions) {
    const ActionState* s = find_arm(a, state.gripper.arm);
    require(s != nullptr, "action frame has no state for the simulated arm");
    state = step(state, *s, params);
    frames.push_back(render_views(state, rig, style));
  }
  return frames;
}

OracleBackend::OracleBackend(WorldState initial, CameraRig rig, WorldParams params, SceneStyle style)
    : state_(std::move(initial)), rig_(std::move(rig)), params_(params), style_(style) {}

FrameGrid OracleBackend::generate(const GenerationRequest& request) {
  require(!request.actions.empty(), "empty action chunk");
  const std::vector<Image> truth = render_views(state_, rig_, style_);
  if (request.condition.size() != truth.size())
    throw DesyncError("condition frames do not cover the rig");
  for (std::size_t v = 0; v < truth.size(); ++v) {
    if (!(request.condition[v] == truth[v])) {
      throw DesyncError("condition frame of view '" + rig_.views[v].name +
                        "' does not match the true state (state hash " +
                        std::to_string(state_.hash()) + ")");
    }
  }
  return simulate(state_, request.actions, rig_, params_, style_);
}

}  // namespace acwm
