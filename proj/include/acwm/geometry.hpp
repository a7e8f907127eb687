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

// End-effector poses, camera models, projection and ray maps.
//
// Conventions used throughout the library:
//   * roll/pitch/yaw is intrinsic Z-Y-X: R = Rz(yaw) * Ry(pitch) * Rx(roll).
//   * Camera frames follow the usual vision convention: +x right, +y down,
//     +z along the optical axis.
//   * Pixel coordinates are continuous; pixel (row r, col c) covers
//     [c, c+1) x [r, r+1) and its center is (c + 0.5, r + 0.5).
//   * The EEF approach axis is -z of the EEF frame, so rpy = (0, 0, yaw) is a
//     top-down grasp.

#ifndef ACWM_GEOMETRY_HPP_
#define ACWM_GEOMETRY_HPP_

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "acwm/common.hpp"

namespace acwm {

inline constexpr double kPi = std::numbers::pi;

enum class ArmId : std::uint8_t { kLeft = 0, kRight = 1 };

const char* to_string(ArmId arm);
ArmId arm_from_string(std::string_view name);

struct Pose6D {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();  // roll, pitch, yaw

  bool is_finite() const { return position.allFinite() && rpy.allFinite(); }
  bool operator==(const Pose6D& o) const { return position == o.position && rpy == o.rpy; }
};

struct ActionState {
  Pose6D pose;
  double openness = 1.0;  // 1 = fully open
  ArmId arm = ArmId::kRight;

  bool operator==(const ActionState&) const = default;
};

// One control frame: a single arm (d = 7) or both arms (d = 14), always
// ordered left before right when both are present.
using ArmFrame = std::vector<ActionState>;

struct ActionTrajectory {
  std::vector<ArmFrame> frames;
  std::vector<double> timestamps;  // seconds

  std::size_t size() const { return frames.size(); }
  std::size_t arm_count() const { return frames.empty() ? 0 : frames.front().size(); }
  // Throws ValidationError unless non-empty, constant arm count, strictly
  // increasing timestamps and openness in [0, 1].
  void validate() const;
};

struct DeltaAction {
  Eigen::Vector3d d_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_rpy = Eigen::Vector3d::Zero();
  double d_openness = 0.0;

  Eigen::Matrix<double, 7, 1> as_vector() const;
};

enum class CameraKind : std::uint8_t { kPinhole, kEquidistantFisheye };

struct CameraModel {
  int width = 128;
  int height = 80;
  double fx = 100.0;
  double fy = 100.0;
  double cx = 64.0;
  double cy = 40.0;
  CameraKind kind = CameraKind::kPinhole;
  double max_theta = 1.7;  // fisheye field limit, radians from the axis

  void validate() const;
};

struct CameraAttachment {
  ArmId arm = ArmId::kRight;
  Eigen::Isometry3d eef_from_camera = Eigen::Isometry3d::Identity();
};

struct CameraExtrinsics {
  // Used as-is for static cameras; ignored when attached.
  Eigen::Isometry3d world_from_camera = Eigen::Isometry3d::Identity();
  std::optional<CameraAttachment> attachment;

  // Camera pose for the given arm configuration.
  Eigen::Isometry3d resolve(const ArmFrame& arms) const;
};

struct CameraView {
  std::string name;
  CameraModel model;
  CameraExtrinsics extrinsics;
};

struct CameraRig {
  std::vector<CameraView> views;

  std::size_t size() const { return views.size(); }
  const CameraView& at(std::string_view name) const;
};

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // z in the camera frame (pinhole) or range (fisheye)
};

class ProjectionError : public Error {
 public:
  enum class Kind { kBehindCamera, kOutOfField };
  ProjectionError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct RayMap {
  int height = 0;
  int width = 0;
  Eigen::Matrix3Xd origins;     // column index = row * width + col
  Eigen::Matrix3Xd directions;  // unit vectors
};

// Rotation utilities --------------------------------------------------------

// Wraps into (-pi, pi].
double wrap_angle(double a);
Eigen::Vector3d wrap_angles(const Eigen::Vector3d& a);

Eigen::Matrix3d rpy_to_matrix(const Eigen::Vector3d& rpy);

struct RpyResult {
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
  bool gimbal_degenerate = false;  // pitch = +-pi/2; roll fixed to 0
};
RpyResult matrix_to_rpy(const Eigen::Matrix3d& R);

Eigen::Isometry3d to_isometry(const Pose6D& pose);
Pose6D to_pose(const Eigen::Isometry3d& T);

// World-from-camera pose of a camera at `eye` looking at `target`.
Eigen::Isometry3d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                          const Eigen::Vector3d& up = Eigen::Vector3d::UnitZ());

// Projection ----------------------------------------------------------------

std::optional<PixelProjection> try_project(const Eigen::Vector3d& point_world,
                                           const CameraModel& camera,
                                           const Eigen::Isometry3d& world_from_camera);

// Throws ProjectionError when the point is behind a pinhole camera or outside
// the fisheye field.
PixelProjection project(const Eigen::Vector3d& point_world, const CameraModel& camera,
                        const Eigen::Isometry3d& world_from_camera);

// Unit ray direction, in the camera frame, through continuous pixel (u, v).
Eigen::Vector3d back_project(double u, double v, const CameraModel& camera);

// Per-pixel rays sampled at the centers of a grid_h x grid_w grid spanning the
// image, expressed in the anchor frame.
RayMap compute_ray_map(const CameraModel& camera, const Eigen::Isometry3d& world_from_camera,
                       const Eigen::Isometry3d& world_from_anchor, int grid_h, int grid_w);

// Actions -------------------------------------------------------------------

// Linear in position/openness, shortest arc per rpy component. s = 0 and
// s = 1 return the endpoints exactly.
ActionState interpolate_action(const ActionState& a0, const ActionState& a1, double s);

DeltaAction delta_action(const ActionState& current, const ActionState& previous);

// Per-frame deltas of every arm, flattened to (7 * arms) x (frames - 1).
Eigen::MatrixXd delta_matrix(std::span<const ArmFrame> frames);

const ActionState* find_arm(const ArmFrame& frame, ArmId arm);

}  // namespace acwm

#endif  // ACWM_GEOMETRY_HPP_
