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

#include "acwm/action_map.hpp"

#include <algorithm>
#include <cmath>

namespace acwm {

void GlyphStyle::validate() const {
  require(!(arm_base_colors[0] == arm_base_colors[1]), "arm base colors must differ");
  require(min_shade >= 16 && max_shade <= 255 && min_shade <= max_shade,
          "shade range must lie within [16, 255]");
  require(circle_radius_m > 0 && axis_length_m > 0, "glyph sizes must be positive");
  require(min_radius_px >= 1 && min_radius_px <= max_radius_px, "bad radius clamp");
}

std::optional<std::array<int, 2>> glyph_center(const Eigen::Vector3d& position,
                                               const CameraModel& camera,
                                               const Eigen::Isometry3d& world_from_camera) {
  const auto p = try_project(position, camera, world_from_camera);
  if (!p) return std::nullopt;
  return std::array<int, 2>{static_cast<int>(std::floor(p->u)),
                            static_cast<int>(std::floor(p->v))};
}

Image render_action_map(const ArmFrame& states, const CameraModel& camera,
                        const Eigen::Isometry3d& world_from_camera, const GlyphStyle& style) {
  Image img(camera.width, camera.height);
  int drawn = 0;
  for (const ActionState& s : states) {
    const auto center = try_project(s.pose.position, camera, world_from_camera);
    if (!center) continue;
    ++drawn;
    const int arm = static_cast<int>(s.arm);
    const int cu = static_cast<int>(std::floor(center->u));
    const int cv = static_cast<int>(std::floor(center->v));

    const double radius = camera.fx * style.circle_radius_m / center->depth;
    const int radius_px = std::clamp(static_cast<int>(std::lround(radius)), style.min_radius_px,
                                     style.max_radius_px);
    const double openness = std::clamp(s.openness, 0.0, 1.0);
    const int shade = static_cast<int>(
        std::lround(style.min_shade + openness * (style.max_shade - style.min_shade)));
    fill_circle(img, cu, cv, radius_px, scale(style.arm_base_colors[arm], shade));

    const Eigen::Matrix3d R = rpy_to_matrix(s.pose.rpy);
    for (int axis = 0; axis < 3; ++axis) {
      const Eigen::Vector3d tip = s.pose.position + style.axis_length_m * R.col(axis);
      const auto end = try_project(tip, camera, world_from_camera);
      if (!end || !std::isfinite(end->u) || !std::isfinite(end->v)) continue;
      // Keep Bresenham in int range when the tip projects far off-screen.
      const double lim = 8.0 * (camera.width + camera.height);
      const int eu = static_cast<int>(std::floor(std::clamp(end->u, -lim, lim)));
      const int ev = static_cast<int>(std::floor(std::clamp(end->v, -lim, lim)));
      draw_line(img, cu, cv, eu, ev, style.axis_colors[arm][axis]);
    }
  }
  if (drawn == 0 && !states.empty())
    log(LogLevel::kDebug, "action map: every arm is behind the camera, map left black");
  return img;
}

std::vector<std::vector<Image>> render_action_map_sequence(const ActionTrajectory& traj,
                                                           const CameraRig& rig,
                                                           const GlyphStyle& style) {
  std::vector<std::vector<Image>> out(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out[k].reserve(rig.size());
    for (const CameraView& view : rig.views)
      out[k].push_back(render_action_map(traj.frames[k], view.model,
                                         view.extrinsics.resolve(traj.frames[k]), style));
  }
  return out;
}

}  // namespace acwm
