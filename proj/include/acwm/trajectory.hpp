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

// Data engine: contact-phase detection from gripper openness, phase
// segmentation, fetch-phase spatial augmentation, reversed generation and
// dataset emission.

#ifndef ACWM_TRAJECTORY_HPP_
#define ACWM_TRAJECTORY_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "acwm/backend.hpp"
#include "acwm/io.hpp"
#include "acwm/world.hpp"

namespace acwm {

struct ContactPhase {
  int t_b = 0;  // first closed frame
  int t_e = 0;  // first re-opened frame
  bool open_ended = false;  // never re-opened; t_e is the last frame
};

class NoContactError : public Error {
 public:
  using Error::Error;
};

// Hysteresis scan: armed once openness >= theta_open, contact begins at the
// first armed frame below theta_close (one frame suffices) and ends at the
// first later frame back at or above theta_open.
ContactPhase detect_contact_phase(std::span<const double> openness, double theta_close = 0.5,
                                  double theta_open = 0.9);
ContactPhase detect_contact_phase(const ActionTrajectory& traj, ArmId arm = ArmId::kRight,
                                  double theta_close = 0.5, double theta_open = 0.9);

struct Phases {
  ActionTrajectory fetch;  // [0, t_b]
  ActionTrajectory grasp;  // [t_b, t_e]
  ActionTrajectory home;   // [t_e, end]
};

ActionTrajectory slice(const ActionTrajectory& traj, std::size_t begin, std::size_t end);
Phases segment_phases(const ActionTrajectory& traj, const ContactPhase& phase);

struct AugmentationSpec {
  int look_back = 8;  // N
  Eigen::Vector3d position_bound{0.05, 0.05, 0.05};
  Eigen::Vector3d rpy_bound{0.0, 0.0, 0.1};
  int samples = 3;
  std::uint64_t seed = 0;
  Aabb workspace{{-0.45, -0.45, 0.0}, {0.45, 0.45, 0.6}};
  double max_step = 0.04;  // kinematic bound on per-frame translation
  int max_retries = 100;

  void validate() const;
  Json to_json() const;
};

// Per-frame translation never exceeds max_step and every pose lies in the
// workspace.
bool kinematically_valid(const ActionTrajectory& traj, const AugmentationSpec& spec);

// Each sample covers frames t_b - N .. t_b: the first pose is perturbed
// uniformly within the bounds, the last is a_{t_b} bit-exactly, poses in
// between interpolate with s = i / N, and openness is copied from the seed.
std::vector<ActionTrajectory> augment_fetch(const ActionTrajectory& traj, const ContactPhase& phase,
                                            const AugmentationSpec& spec);

struct FrameSequence {
  FrameGrid frames;
  std::vector<double> timestamps;
};

// Drives the backend from the contact frame back to the augmented start with
// the time-reversed actions, then restores forward order. Frame i shows
// window[i]; the last frame is `contact_frames` itself.
FrameSequence generate_reversed(const std::vector<Image>& contact_frames,
                                const ActionTrajectory& window, WorldModelBackend& backend,
                                int chunk_size = 16);

struct SeedRecord {
  std::string id;
  ActionTrajectory trajectory;
  FrameGrid frames;  // one per trajectory frame
};

struct AugmentedRecord {
  std::string seed_id;
  ActionTrajectory trajectory;
  FrameGrid frames;
};

struct DatasetSummary {
  Json manifest;
  std::uint64_t manifest_hash = 0;
};

// <root>/trajectories/<id>.json, <root>/frames/<id>/<view>/<idx>.png,
// <root>/manifest.json. The manifest carries no timestamps so identical runs
// produce identical bytes.
DatasetSummary emit_dataset(const std::vector<SeedRecord>& seeds,
                            const std::vector<AugmentedRecord>& augmented,
                            const AugmentationSpec& spec, const CameraRig& rig,
                            const std::filesystem::path& root);

}  // namespace acwm

#endif  // ACWM_TRAJECTORY_HPP_
