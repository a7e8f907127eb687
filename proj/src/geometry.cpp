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

#include "acwm/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace acwm {

const char* to_string(ArmId arm) { return arm == ArmId::kLeft ? "left" : "right"; }

ArmId arm_from_string(std::string_view name) {
  if (name == "left") return ArmId::kLeft;
  if (name == "right") return ArmId::kRight;
  throw ValidationError("unknown arm '" + std::string(name) + "'");
}

void ActionTrajectory::validate() const {
  require(!frames.empty(), "trajectory is empty");
  require(timestamps.size() == frames.size(), "timestamp count differs from frame count");
  const std::size_t arms = frames.front().size();
  require(arms == 1 || arms == 2, "trajectory must carry one or two arms");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    require(frames[i].size() == arms, "arm count changes along the trajectory");
    for (const ActionState& a : frames[i]) {
      require(a.pose.is_finite(), "non-finite pose");
      require(a.openness >= 0.0 && a.openness <= 1.0, "openness outside [0, 1]");
    }
    if (i > 0) require(timestamps[i] > timestamps[i - 1], "timestamps not strictly increasing");
  }
}

Eigen::Matrix<double, 7, 1> DeltaAction::as_vector() const {
  Eigen::Matrix<double, 7, 1> v;
  v << d_position, d_rpy, d_openness;
  return v;
}

void CameraModel::validate() const {
  require(width > 0 && height > 0, "camera resolution must be positive");
  require(fx > 0.0 && fy > 0.0, "focal lengths must be positive");
  require(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height,
          "principal point outside the image");
}

Eigen::Isometry3d CameraExtrinsics::resolve(const ArmFrame& arms) const {
  if (!attachment) return world_from_camera;
  const ActionState* eef = find_arm(arms, attachment->arm);
  if (eef == nullptr) throw ValidationError("camera attached to an arm missing from the frame");
  return to_isometry(eef->pose) * attachment->eef_from_camera;
}

const CameraView& CameraRig::at(std::string_view name) const {
  for (const CameraView& v : views)
    if (v.name == name) return v;
  throw ValidationError("unknown view '" + std::string(name) + "'");
}

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

Eigen::Vector3d wrap_angles(const Eigen::Vector3d& a) {
  return {wrap_angle(a.x()), wrap_angle(a.y()), wrap_angle(a.z())};
}

Eigen::Matrix3d rpy_to_matrix(const Eigen::Vector3d& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

RpyResult matrix_to_rpy(const Eigen::Matrix3d& R) {
  RpyResult out;
  const double s = std::clamp(-R(2, 0), -1.0, 1.0);
  if (std::abs(s) > 1.0 - 1e-12) {
    // Only yaw - roll (or yaw + roll) is observable; pin roll to zero.
    out.gimbal_degenerate = true;
    const double pitch = s > 0 ? kPi / 2 : -kPi / 2;
    out.rpy = {0.0, pitch, wrap_angle(std::atan2(-R(0, 1), R(1, 1)))};
    return out;
  }
  out.rpy = {wrap_angle(std::atan2(R(2, 1), R(2, 2))), std::asin(s),
             wrap_angle(std::atan2(R(1, 0), R(0, 0)))};
  return out;
}

Eigen::Isometry3d to_isometry(const Pose6D& pose) {
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  T.linear() = rpy_to_matrix(pose.rpy);
  T.translation() = pose.position;
  return T;
}

Pose6D to_pose(const Eigen::Isometry3d& T) {
  return {T.translation(), matrix_to_rpy(T.linear()).rpy};
}

Eigen::Isometry3d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                          const Eigen::Vector3d& up) {
  const Eigen::Vector3d z = (target - eye).normalized();
  const Eigen::Vector3d x = z.cross(up).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  T.linear().col(0) = x;
  T.linear().col(1) = y;
  T.linear().col(2) = z;
  T.translation() = eye;
  return T;
}

namespace {

enum class ProjectStatus { kOk, kBehind, kOutOfField };

ProjectStatus project_impl(const Eigen::Vector3d& point_world, const CameraModel& camera,
                           const Eigen::Isometry3d& world_from_camera, PixelProjection& out) {
  const Eigen::Vector3d p = world_from_camera.inverse(Eigen::Isometry) * point_world;
  if (camera.kind == CameraKind::kPinhole) {
    if (p.z() <= 1e-6) return ProjectStatus::kBehind;
    out = {camera.fx * p.x() / p.z() + camera.cx, camera.fy * p.y() / p.z() + camera.cy, p.z()};
    return ProjectStatus::kOk;
  }
  const double rho = std::hypot(p.x(), p.y());
  const double theta = std::atan2(rho, p.z());
  if (theta >= camera.max_theta) return ProjectStatus::kOutOfField;
  const double range = p.norm();
  if (rho == 0.0) {
    out = {camera.cx, camera.cy, range};
  } else {
    out = {camera.fx * theta * p.x() / rho + camera.cx, camera.fy * theta * p.y() / rho + camera.cy,
           range};
  }
  return ProjectStatus::kOk;
}

}  // namespace

std::optional<PixelProjection> try_project(const Eigen::Vector3d& point_world,
                                           const CameraModel& camera,
                                           const Eigen::Isometry3d& world_from_camera) {
  PixelProjection out;
  if (project_impl(point_world, camera, world_from_camera, out) != ProjectStatus::kOk)
    return std::nullopt;
  return out;
}

PixelProjection project(const Eigen::Vector3d& point_world, const CameraModel& camera,
                        const Eigen::Isometry3d& world_from_camera) {
  require(point_world.allFinite(), "cannot project a non-finite point");
  PixelProjection out;
  switch (project_impl(point_world, camera, world_from_camera, out)) {
    case ProjectStatus::kOk:
      return out;
    case ProjectStatus::kBehind:
      throw ProjectionError(ProjectionError::Kind::kBehindCamera, "point is behind the camera");
    case ProjectStatus::kOutOfField:
      break;
  }
  throw ProjectionError(ProjectionError::Kind::kOutOfField, "point is outside the fisheye field");
}

Eigen::Vector3d back_project(double u, double v, const CameraModel& camera) {
  const double mx = (u - camera.cx) / camera.fx;
  const double my = (v - camera.cy) / camera.fy;
  if (camera.kind == CameraKind::kPinhole) return Eigen::Vector3d(mx, my, 1.0).normalized();
  const double theta = std::hypot(mx, my);
  if (theta == 0.0) return Eigen::Vector3d::UnitZ();
  const double s = std::sin(theta) / theta;
  return Eigen::Vector3d(s * mx, s * my, std::cos(theta)).normalized();
}

RayMap compute_ray_map(const CameraModel& camera, const Eigen::Isometry3d& world_from_camera,
                       const Eigen::Isometry3d& world_from_anchor, int grid_h, int grid_w) {
  require(grid_h > 0 && grid_w > 0, "ray map grid must be non-empty");
  const Eigen::Isometry3d anchor_from_camera =
      world_from_anchor.inverse(Eigen::Isometry) * world_from_camera;
  const double sx = static_cast<double>(camera.width) / grid_w;
  const double sy = static_cast<double>(camera.height) / grid_h;

  RayMap map;
  map.height = grid_h;
  map.width = grid_w;
  map.origins.resize(3, grid_h * grid_w);
  map.directions.resize(3, grid_h * grid_w);
  const Eigen::Vector3d origin = anchor_from_camera.translation();
  for (int r = 0; r < grid_h; ++r) {
    for (int c = 0; c < grid_w; ++c) {
      const Eigen::Vector3d d = back_project((c + 0.5) * sx, (r + 0.5) * sy, camera);
      const int i = r * grid_w + c;
      map.origins.col(i) = origin;
      map.directions.col(i) = (anchor_from_camera.linear() * d).normalized();
    }
  }
  return map;
}

ActionState interpolate_action(const ActionState& a0, const ActionState& a1, double s) {
  require(s >= 0.0 && s <= 1.0, "interpolation parameter outside [0, 1]");
  require(a0.arm == a1.arm, "cannot interpolate between different arms");
  if (s == 0.0) return a0;
  if (s == 1.0) return a1;
  ActionState out;
  out.arm = a0.arm;
  out.pose.position = (1.0 - s) * a0.pose.position + s * a1.pose.position;
  out.openness = (1.0 - s) * a0.openness + s * a1.openness;
  out.pose.rpy = wrap_angles(a0.pose.rpy + s * wrap_angles(a1.pose.rpy - a0.pose.rpy));
  return out;
}

DeltaAction delta_action(const ActionState& current, const ActionState& previous) {
  require(current.arm == previous.arm, "delta between different arms");
  DeltaAction d;
  d.d_position = current.pose.position - previous.pose.position;
  d.d_rpy = wrap_angles(current.pose.rpy - previous.pose.rpy);
  d.d_openness = current.openness - previous.openness;
  return d;
}

Eigen::MatrixXd delta_matrix(std::span<const ArmFrame> frames) {
  require(frames.size() >= 2, "need at least two frames for deltas");
  const std::size_t arms = frames.front().size();
  Eigen::MatrixXd out(7 * arms, frames.size() - 1);
  for (std::size_t k = 1; k < frames.size(); ++k) {
    require(frames[k].size() == arms, "arm count changes along the segment");
    for (std::size_t a = 0; a < arms; ++a)
      out.block<7, 1>(7 * a, k - 1) = delta_action(frames[k][a], frames[k - 1][a]).as_vector();
  }
  return out;
}

const ActionState* find_arm(const ArmFrame& frame, ArmId arm) {
  for (const ActionState& a : frame)
    if (a.arm == arm) return &a;
  return nullptr;
}

}  // namespace acwm
