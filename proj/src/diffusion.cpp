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

#include "acwm/diffusion.hpp"

namespace acwm {

NoiseSchedule make_linear_schedule(int steps, double beta_first, double beta_last) {
  require(steps >= 2, "schedule needs at least two steps");
  require(beta_first > 0.0 && beta_first <= beta_last && beta_last < 1.0,
          "need 0 < beta_first <= beta_last < 1");
  NoiseSchedule s;
  s.beta_.resize(steps);
  s.alpha_.resize(steps);
  s.alpha_bar_.resize(steps);
  double cumulative = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double frac = static_cast<double>(i) / (steps - 1);
    s.beta_[i] = beta_first + frac * (beta_last - beta_first);
    s.alpha_[i] = 1.0 - s.beta_[i];
    cumulative *= s.alpha_[i];
    s.alpha_bar_[i] = cumulative;
  }
  return s;
}

std::vector<int> sampling_timesteps(int schedule_steps, int sampler_steps) {
  require(sampler_steps >= 1 && sampler_steps <= schedule_steps, "sampler steps outside [1, T]");
  std::vector<int> ts(sampler_steps);
  // Evenly spaced, always ending at T so sampling starts from (almost) pure
  // noise.
  for (int i = 0; i < sampler_steps; ++i) {
    const long num = static_cast<long>(i + 1) * schedule_steps;
    ts[sampler_steps - 1 - i] = static_cast<int>(num / sampler_steps);
  }
  return ts;
}

}  // namespace acwm
