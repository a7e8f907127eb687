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

#include <cmath>
#include <random>

#include "acwm/geometry.hpp"

using namespace acwm;

namespace {

// Elementary rotations written out by hand, independent of Eigen's AngleAxis.
Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

ActionState state_at(Eigen::Vector3d p, Eigen::Vector3d rpy, double open) {
  ActionState s;
  s.pose.position = p;
  s.pose.rpy = rpy;
  s.openness = open;
  return s;
}

}  // namespace

TEST_CASE("rpy_to_matrix known cases") {
  CHECK(rpy_to_matrix(Eigen::Vector3d::Zero()).isApprox(Eigen::Matrix3d::Identity(), 0.0));
  const Eigen::Matrix3d R = rpy_to_matrix(Eigen::Vector3d(0, 0, kPi / 2));
  CHECK((R * Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitY()).norm() < 1e-15);

  const Eigen::Vector3d rpy(0.1, 0.2, 0.3);
  const Eigen::Matrix3d oracle = rot_z(0.3) * rot_y(0.2) * rot_x(0.1);
  CHECK((rpy_to_matrix(rpy) - oracle).cwiseAbs().maxCoeff() < 1e-15);
  const RpyResult back = matrix_to_rpy(oracle);
  CHECK_FALSE(back.gimbal_degenerate);
  CHECK((back.rpy - rpy).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rpy round trip on random angles and gimbal lock") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-kPi, kPi), pitch(-1.5, 1.5);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d rpy(ang(rng), pitch(rng), ang(rng));
    const RpyResult r = matrix_to_rpy(rpy_to_matrix(rpy));
    CHECK((wrap_angles(r.rpy - rpy)).cwiseAbs().maxCoeff() < 1e-9);
  }
  const Eigen::Matrix3d R = rpy_to_matrix(Eigen::Vector3d(0.4, kPi / 2, 0.9));
  const RpyResult r = matrix_to_rpy(R);
  CHECK(r.gimbal_degenerate);
  CHECK(r.rpy.x() == 0.0);
  CHECK((rpy_to_matrix(r.rpy) - R).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("pinhole projection examples") {
  CameraModel cam;  // fx = fy = 100, cx = 64, cy = 40
  const Eigen::Isometry3d I = Eigen::Isometry3d::Identity();
  PixelProjection p = project({0, 0, 1}, cam, I);
  CHECK(p.u == 64.0);
  CHECK(p.v == 40.0);
  CHECK(p.depth == 1.0);
  p = project({0.1, 0, 1.0}, cam, I);
  CHECK(p.u == doctest::Approx(74.0).epsilon(1e-14));
  CHECK(p.v == 40.0);
  CHECK_THROWS_AS(project({0, 0, -0.5}, cam, I), ProjectionError);
  try {
    project({0, 0, -0.5}, cam, I);
  } catch (const ProjectionError& e) {
    CHECK(e.kind() == ProjectionError::Kind::kBehindCamera);
  }
  CHECK_FALSE(try_project({0, 0, 1e-7}, cam, I).has_value());
}

TEST_CASE("fisheye field limit and round trip") {
  CameraModel cam;
  cam.kind = CameraKind::kEquidistantFisheye;
  cam.fx = cam.fy = 40.0;
  const Eigen::Isometry3d I = Eigen::Isometry3d::Identity();
  // Points beside and slightly behind the camera are still in the field.
  const Eigen::Vector3d side(1.0, 0.0, -0.05);
  REQUIRE(try_project(side, cam, I).has_value());
  const Eigen::Vector3d behind(0.1, 0.0, -1.0);
  try {
    project(behind, cam, I);
    FAIL("expected an out-of-field error");
  } catch (const ProjectionError& e) {
    CHECK(e.kind() == ProjectionError::Kind::kOutOfField);
  }
  // Equidistant oracle: r = f * theta.
  const Eigen::Vector3d q(0.3, 0.4, 1.0);
  const double theta = std::atan2(0.5, 1.0);
  const PixelProjection pq = project(q, cam, I);
  CHECK(pq.u == doctest::Approx(64.0 + 40.0 * theta * 0.6).epsilon(1e-13));
  CHECK(pq.v == doctest::Approx(40.0 + 40.0 * theta * 0.8).epsilon(1e-13));
}

TEST_CASE("back_project inverts project (property)") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uu(0.0, 128.0), vv(0.0, 80.0), dd(0.2, 3.0);
  const Eigen::Isometry3d pose = look_at({0.2, -0.4, 0.5}, {0, 0, 0});
  for (CameraKind kind : {CameraKind::kPinhole, CameraKind::kEquidistantFisheye}) {
    CameraModel cam;
    cam.kind = kind;
    if (kind == CameraKind::kEquidistantFisheye) cam.fx = cam.fy = 60.0;
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const double u = uu(rng), v = vv(rng);
      const Eigen::Vector3d ray = back_project(u, v, cam);
      CHECK(std::abs(ray.norm() - 1.0) < 1e-12);
      const PixelProjection p = project(pose * (dd(rng) * ray), cam, pose);
      worst = std::max(worst, std::hypot(p.u - u, p.v - v));
    }
    CHECK(worst < (kind == CameraKind::kPinhole ? 1e-6 : 1e-4));
  }
}

TEST_CASE("ray map anchor cases") {
  CameraModel cam;
  const Eigen::Isometry3d I = Eigen::Isometry3d::Identity();
  // A grid the size of the image puts a pixel center at (64.5, 40.5); use a
  // 1x1 grid on a 1x1 camera to hit the principal point exactly.
  CameraModel tiny = cam;
  tiny.width = 1;
  tiny.height = 1;
  tiny.cx = 0.5;
  tiny.cy = 0.5;
  RayMap r = compute_ray_map(tiny, I, I, 1, 1);
  CHECK(r.origins.col(0).isZero(0.0));
  CHECK((r.directions.col(0) - Eigen::Vector3d::UnitZ()).norm() < 1e-15);

  Eigen::Isometry3d moved = I;
  moved.translation() = Eigen::Vector3d(1, 0, 0);
  r = compute_ray_map(cam, moved, I, 10, 16);
  for (Eigen::Index i = 0; i < r.origins.cols(); ++i)
    CHECK((r.origins.col(i) - Eigen::Vector3d(1, 0, 0)).norm() == 0.0);
  CHECK_THROWS_AS(compute_ray_map(cam, I, I, 0, 16), ValidationError);
}

TEST_CASE("ray map reprojects every pixel") {
  const Eigen::Isometry3d anchor = look_at({0.0, -0.4, 0.5}, {0, 0, 0});
  const Eigen::Isometry3d camera = look_at({0.3, -0.3, 0.45}, {0, 0.05, 0});
  for (CameraKind kind : {CameraKind::kPinhole, CameraKind::kEquidistantFisheye}) {
    CameraModel cam;
    cam.kind = kind;
    if (kind == CameraKind::kEquidistantFisheye) cam.fx = cam.fy = 60.0;
    const RayMap r = compute_ray_map(cam, camera, anchor, cam.height, cam.width);
    double worst = 0.0;
    for (int row = 0; row < r.height; ++row)
      for (int col = 0; col < r.width; ++col) {
        const int i = row * r.width + col;
        const Eigen::Vector3d p_anchor = r.origins.col(i) + 0.7 * r.directions.col(i);
        const PixelProjection p = project(anchor * p_anchor, cam, camera);
        worst = std::max(worst, std::hypot(p.u - (col + 0.5), p.v - (row + 0.5)));
      }
    CHECK(worst < 0.5);
  }
}

TEST_CASE("interpolate_action examples") {
  const ActionState a0 = state_at({0, 0, 0}, {0, 0, 3.1}, 1.0);
  const ActionState a1 = state_at({0.2, 0, 0}, {0, 0, -3.1}, 0.0);
  const ActionState mid = interpolate_action(a0, a1, 0.5);
  CHECK(mid.pose.position.isApprox(Eigen::Vector3d(0.1, 0, 0), 1e-15));
  CHECK(mid.openness == 0.5);
  // Shortest arc passes through pi: the midpoint sits on the +-pi boundary.
  CHECK(std::abs(std::abs(mid.pose.rpy.z()) - kPi) < 1e-12);
  CHECK(interpolate_action(a0, a1, 1.0) == a1);
  CHECK(interpolate_action(a0, a1, 0.0) == a0);
  CHECK_THROWS_AS(interpolate_action(a0, a1, 1.5), ValidationError);
  ActionState other = a1;
  other.arm = ArmId::kLeft;
  CHECK_THROWS_AS(interpolate_action(a0, other, 0.5), ValidationError);
}

TEST_CASE("delta_action examples") {
  const ActionState a = state_at({0, 0, 0}, {0, 0, 0}, 1.0);
  CHECK(delta_action(a, a).as_vector().isZero(0.0));
  const ActionState b = state_at({0.01, 0, 0}, {0, 0, 0.1}, 0.8);
  Eigen::Matrix<double, 7, 1> expect;
  expect << 0.01, 0, 0, 0, 0, 0.1, -0.2;
  CHECK((delta_action(b, a).as_vector() - expect).cwiseAbs().maxCoeff() < 1e-15);
  const ActionState y0 = state_at({0, 0, 0}, {0, 0, 3.1}, 1.0);
  const ActionState y1 = state_at({0, 0, 0}, {0, 0, -3.1}, 1.0);
  // Wrap oracle: 2 pi - 6.2.
  CHECK(delta_action(y1, y0).d_rpy.z() == doctest::Approx(2 * kPi - 6.2).epsilon(1e-12));
  CHECK(delta_action(y1, y0).d_rpy.z() == doctest::Approx(0.0831853).epsilon(1e-6));
}

TEST_CASE("delta_matrix stacks arms") {
  std::vector<ArmFrame> frames(3);
  for (int k = 0; k < 3; ++k) {
    ActionState r = state_at({0.01 * k, 0, 0}, {0, 0, 0}, 1.0);
    ActionState l = state_at({0, 0.02 * k, 0}, {0, 0, 0}, 1.0);
    l.arm = ArmId::kLeft;
    frames[k] = {r, l};
  }
  const Eigen::MatrixXd d = delta_matrix(frames);
  CHECK(d.rows() == 14);
  CHECK(d.cols() == 2);
  CHECK(d(0, 1) == doctest::Approx(0.01));
  CHECK(d(8, 0) == doctest::Approx(0.02));
  CHECK_THROWS_AS(delta_matrix(std::span<const ArmFrame>(frames.data(), 1)), ValidationError);
}

TEST_CASE("wrist extrinsics follow the arm") {
  CameraExtrinsics ex;
  CameraAttachment at;
  at.eef_from_camera.translation() = Eigen::Vector3d(0, 0, 0.08);
  ex.attachment = at;
  const ArmFrame arms{state_at({0.1, 0.2, 0.3}, {0, 0, kPi / 2}, 1.0)};
  const Eigen::Isometry3d T = ex.resolve(arms);
  CHECK((T.translation() - Eigen::Vector3d(0.1, 0.2, 0.38)).norm() < 1e-15);
  ActionState left = arms[0];
  left.arm = ArmId::kLeft;
  CHECK_THROWS_AS(ex.resolve(ArmFrame{left}), ValidationError);
}
