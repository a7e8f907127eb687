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

#include "acwm/denoiser.hpp"

namespace acwm {

std::uint64_t ModelConfig::hash() const {
  std::uint64_t h = fnv1a("acwm.model.v1");
  for (int v : {base_channels, context_dim, delta_tokens, arm_count, time_dim, time_hidden})
    h = fnv1a_pod(v, h);
  return fnv1a_pod(init_seed, h);
}

template class TinyDenoiser<double>;
template class TinyDenoiser<float>;
template class WorldModelNet<double>;
template class WorldModelNet<float>;

}  // namespace acwm
