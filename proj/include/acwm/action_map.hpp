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

// Spatial action maps: the end-effector drawn into each camera view as an
// openness-shaded disk with three orientation axes, on black.

#ifndef ACWM_ACTION_MAP_HPP_
#define ACWM_ACTION_MAP_HPP_

#include <array>
#include <vector>

#include "acwm/geometry.hpp"
#include "acwm/image.hpp"

namespace acwm {

struct GlyphStyle {
  // axis_colors[arm][axis], arm indexed by ArmId.
  std::array<std::array<Rgb, 3>, 2> axis_colors{{
      {Rgb{255, 0, 0}, Rgb{0, 255, 0}, Rgb{0, 0, 255}},
      {Rgb{128, 80, 128}, Rgb{0, 208, 128}, Rgb{0, 80, 255}},
  }};
  std::array<Rgb, 2> arm_base_colors{Rgb{255, 160, 0}, Rgb{0, 160, 255}};
  double circle_radius_m = 0.03;
  double axis_length_m = 0.10;
  int min_shade = 40;
  int max_shade = 255;
  int min_radius_px = 2;
  int max_radius_px = 12;

  void validate() const;
};

// Pixel the glyph of `position` is centred on, or nullopt when not visible.
std::optional<std::array<int, 2>> glyph_center(const Eigen::Vector3d& position,
                                               const CameraModel& camera,
                                               const Eigen::Isometry3d& world_from_camera);

Image render_action_map(const ArmFrame& states, const CameraModel& camera,
                        const Eigen::Isometry3d& world_from_camera,
                        const GlyphStyle& style = {});

// Indexed [frame][view].
std::vector<std::vector<Image>> render_action_map_sequence(const ActionTrajectory& traj,
                                                           const CameraRig& rig,
                                                           const GlyphStyle& style = {});

}  // namespace acwm

#endif  // ACWM_ACTION_MAP_HPP_
