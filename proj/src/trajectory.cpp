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

#include "acwm/trajectory.hpp"

#include <algorithm>
#include <cstdio>

namespace acwm {
namespace fs = std::filesystem;

ContactPhase detect_contact_phase(std::span<const double> openness, double theta_close,
                                  double theta_open) {
  require(openness.size() >= 3, "openness series needs at least 3 samples");
  require(theta_close < theta_open, "need theta_close < theta_open");
  const int n = static_cast<int>(openness.size());
  bool armed = false;
  int t_b = -1;
  for (int i = 0; i < n; ++i) {
    if (armed && openness[i] < theta_close) {
      t_b = i;
      break;
    }
    if (openness[i] >= theta_open) armed = true;
  }
  if (t_b < 0) throw NoContactError("gripper never closes after being open");
  for (int i = t_b + 1; i < n; ++i)
    if (openness[i] >= theta_open) return {t_b, i, false};
  if (t_b == n - 1) throw NoContactError("gripper closes only on the final frame");
  log(LogLevel::kInfo, "contact phase never released; marking it open-ended");
  return {t_b, n - 1, true};
}

ContactPhase detect_contact_phase(const ActionTrajectory& traj, ArmId arm, double theta_close,
                                  double theta_open) {
  std::vector<double> series;
  series.reserve(traj.size());
  for (const ArmFrame& f : traj.frames) {
    const ActionState* s = find_arm(f, arm);
    require(s != nullptr, "trajectory lacks the requested arm");
    series.push_back(s->openness);
  }
  return detect_contact_phase(series, theta_close, theta_open);
}

ActionTrajectory slice(const ActionTrajectory& traj, std::size_t begin, std::size_t end) {
  require(begin < end && end <= traj.size(), "slice out of range");
  ActionTrajectory out;
  out.frames.assign(traj.frames.begin() + begin, traj.frames.begin() + end);
  out.timestamps.assign(traj.timestamps.begin() + begin, traj.timestamps.begin() + end);
  return out;
}

Phases segment_phases(const ActionTrajectory& traj, const ContactPhase& phase) {
  const int n = static_cast<int>(traj.size());
  require(0 < phase.t_b && phase.t_b < phase.t_e && phase.t_e < n, "invalid contact phase");
  return {slice(traj, 0, phase.t_b + 1), slice(traj, phase.t_b, phase.t_e + 1),
          slice(traj, phase.t_e, n)};
}

void AugmentationSpec::validate() const {
  require(look_back >= 2, "look-back N must be at least 2");
  require((position_bound.array() >= 0).all() && (rpy_bound.array() >= 0).all(),
          "perturbation bounds must be non-negative");
  require(samples >= 1, "need at least one sample");
  require(max_step > 0 && max_retries >= 1, "bad kinematic bound or retry count");
}

Json AugmentationSpec::to_json() const {
  return Json{{"look_back", look_back},
              {"position_bound", {position_bound.x(), position_bound.y(), position_bound.z()}},
              {"rpy_bound", {rpy_bound.x(), rpy_bound.y(), rpy_bound.z()}},
              {"samples", samples},
              {"seed", seed},
              {"max_step", max_step}};
}

bool kinematically_valid(const ActionTrajectory& traj, const AugmentationSpec& spec) {
  for (std::size_t k = 0; k < traj.size(); ++k) {
    for (std::size_t a = 0; a < traj.frames[k].size(); ++a) {
      const Eigen::Vector3d& p = traj.frames[k][a].pose.position;
      if ((p.array() < spec.workspace.lo.array()).any() || (p.array() > spec.workspace.hi.array()).any())
        return false;
      if (k > 0 && (p - traj.frames[k - 1][a].pose.position).norm() > spec.max_step) return false;
    }
  }
  return true;
}

std::vector<ActionTrajectory> augment_fetch(const ActionTrajectory& traj, const ContactPhase& phase,
                                            const AugmentationSpec& spec) {
  spec.validate();
  traj.validate();
  const int N = spec.look_back;
  require(phase.t_b - N >= 0, "look-back reaches before the first frame");
  require(phase.t_b < static_cast<int>(traj.size()), "contact frame out of range");
  const ActionTrajectory seed = slice(traj, phase.t_b - N, phase.t_b + 1);
  const ArmFrame& start = seed.frames.front();
  const ArmFrame& contact = seed.frames.back();

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<ActionTrajectory> out;
  for (int sample = 0; sample < spec.samples; ++sample) {
    bool ok = false;
    for (int attempt = 0; attempt < spec.max_retries && !ok; ++attempt) {
      ArmFrame perturbed = start;
      for (ActionState& s : perturbed) {
        for (int i = 0; i < 3; ++i) s.pose.position[i] += spec.position_bound[i] * unit(rng);
        for (int i = 0; i < 3; ++i) s.pose.rpy[i] = wrap_angle(s.pose.rpy[i] + spec.rpy_bound[i] * unit(rng));
      }
      ActionTrajectory aug;
      aug.timestamps = seed.timestamps;
      for (int i = 0; i <= N; ++i) {
        ArmFrame f;
        for (std::size_t a = 0; a < contact.size(); ++a) {
          ActionState s = i == N ? contact[a]
                                 : interpolate_action(perturbed[a], contact[a], static_cast<double>(i) / N);
          s.openness = seed.frames[i][a].openness;
          f.push_back(s);
        }
        aug.frames.push_back(std::move(f));
      }
      if (kinematically_valid(aug, spec)) {
        out.push_back(std::move(aug));
        ok = true;
      }
    }
    if (!ok) throw ValidationError("no kinematically valid augmentation within the retry budget");
  }
  return out;
}

FrameSequence generate_reversed(const std::vector<Image>& contact_frames,
                                const ActionTrajectory& window, WorldModelBackend& backend,
                                int chunk_size) {
  require(window.size() >= 1, "empty action window");
  require(chunk_size >= 1, "chunk size must be positive");
  std::vector<ArmFrame> reversed(window.frames.rbegin() + 1, window.frames.rend());
  FrameGrid generated;
  std::vector<Image> condition = contact_frames;
  ArmFrame arms = window.frames.back();
  SparseMemory memory;
  int chunk = 0;
  for (std::size_t begin = 0; begin < reversed.size(); begin += chunk_size, ++chunk) {
    const std::size_t len = std::min<std::size_t>(chunk_size, reversed.size() - begin);
    const std::span<const ArmFrame> actions(reversed.data() + begin, len);
    FrameGrid part;
    try {
      part = backend.generate({condition, arms, &memory, actions, chunk});
    } catch (const BackendError&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendError(chunk, e.what());
    }
    if (part.size() != len) throw BackendError(chunk, "backend returned the wrong frame count");
    if (len >= static_cast<std::size_t>(memory.capacity())) memory.update(part, actions);
    condition = part.back();
    arms = actions.back();
    for (auto& f : part) generated.push_back(std::move(f));
  }
  FrameSequence out;
  out.frames.assign(generated.rbegin(), generated.rend());
  out.frames.push_back(contact_frames);
  out.timestamps = window.timestamps;
  return out;
}

namespace {

void write_frames(const fs::path& dir, const FrameGrid& frames, const CameraRig& rig) {
  for (std::size_t k = 0; k < frames.size(); ++k) {
    require(frames[k].size() == rig.size(), "frame grid does not match the rig");
    for (std::size_t v = 0; v < rig.size(); ++v) {
      char name[32];
      std::snprintf(name, sizeof(name), "%04zu.png", k);
      write_png(dir / rig.views[v].name / name, frames[k][v]);
    }
  }
}

}  // namespace

DatasetSummary emit_dataset(const std::vector<SeedRecord>& seeds,
                            const std::vector<AugmentedRecord>& augmented,
                            const AugmentationSpec& spec, const CameraRig& rig,
                            const fs::path& root) {
  Json entries = Json::array();
  auto emit = [&](const std::string& id, const ActionTrajectory& traj, const FrameGrid& frames,
                  Json provenance) {
    const fs::path traj_path = root / "trajectories" / (id + ".json");
    write_trajectory(traj_path, traj);
    if (!frames.empty()) {
      require(frames.size() == traj.size(), "trajectory " + id + " has a frame count mismatch");
      write_frames(root / "frames" / id, frames, rig);
    }
    provenance["id"] = id;
    provenance["frames"] = traj.size();
    provenance["trajectory"] = "trajectories/" + id + ".json";
    entries.push_back(std::move(provenance));
  };

  for (const SeedRecord& s : seeds) emit(s.id, s.trajectory, s.frames, Json{{"kind", "seed"}});
  std::vector<int> per_seed(seeds.size(), 0);
  for (const AugmentedRecord& a : augmented) {
    const auto it = std::find_if(seeds.begin(), seeds.end(),
                                 [&](const SeedRecord& s) { return s.id == a.seed_id; });
    require(it != seeds.end(), "augmented trajectory references unknown seed " + a.seed_id);
    int& count = per_seed[static_cast<std::size_t>(it - seeds.begin())];
    const std::string id = a.seed_id + "_aug" + std::to_string(count++);
    emit(id, a.trajectory, a.frames, Json{{"kind", "augmented"}, {"seed_id", a.seed_id}});
  }

  Json views = Json::array();
  for (const CameraView& v : rig.views) views.push_back(v.name);
  DatasetSummary out;
  out.manifest = Json{{"format", "acwm-dataset-1"},
                      {"views", views},
                      {"augmentation", spec.to_json()},
                      {"seed_count", seeds.size()},
                      {"augmented_count", augmented.size()},
                      {"trajectories", entries}};
  const std::string text = out.manifest.dump(2) + "\n";
  write_text(root / "manifest.json", text);
  out.manifest_hash = fnv1a(text);
  return out;
}

}  // namespace acwm
