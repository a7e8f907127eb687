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

#include "acwm/backend.hpp"

namespace acwm {

std::uint64_t hash_frames(const FrameGrid& frames, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (const auto& views : frames)
    for (const Image& img : views) h = fnv1a_pod(img.hash(), h);
  return h;
}

std::vector<int> SparseMemory::strided_indices(int chunk_size, int capacity) {
  require(capacity >= 1 && chunk_size >= capacity, "memory larger than the chunk");
  std::vector<int> idx(capacity);
  for (int i = 0; i < capacity; ++i) idx[i] = (i + 1) * chunk_size / capacity - 1;
  return idx;
}

void SparseMemory::update(const FrameGrid& chunk, std::span<const ArmFrame> actions) {
  require(chunk.size() == actions.size(), "memory update needs one action per frame");
  frames_.clear();
  for (int i : strided_indices(static_cast<int>(chunk.size()), capacity_))
    frames_.push_back({i, chunk[i], actions[i]});
}

void RolloutConfig::validate() const {
  require(chunk_size >= 1 && memory_size >= 1 && chunk_size >= memory_size,
          "need chunk size >= memory size >= 1");
  require(max_chunks >= 1, "max_chunks must be at least 1");
}

RolloutVideo rollout_chunks(WorldModelBackend& backend, const std::vector<Image>& init_frames,
                            const ArmFrame& init_arms, std::span<const ArmFrame> actions,
                            const RolloutConfig& config) {
  config.validate();
  const std::size_t K = static_cast<std::size_t>(config.chunk_size);
  require(actions.size() >= K, "action stream shorter than one chunk");
  require(init_frames.size() == backend.rig().size(), "need one initial frame per view");

  RolloutVideo out{{}, {}, SparseMemory(config.memory_size), 0};
  std::vector<Image> condition = init_frames;
  ArmFrame arms = init_arms;
  for (int c = 0; c < config.max_chunks && (c + 1) * K <= actions.size(); ++c) {
    const auto chunk_actions = actions.subspan(c * K, K);
    GenerationRequest req{condition, arms, &out.memory, chunk_actions, c};
    FrameGrid chunk;
    try {
      chunk = backend.generate(req);
    } catch (const BackendError&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendError(c, e.what());
    }
    if (chunk.size() != K) throw BackendError(c, "backend returned the wrong frame count");
    out.memory.update(chunk, chunk_actions);
    out.chunk_hashes.push_back(hash_frames(chunk));
    condition = chunk.back();
    arms = chunk_actions.back();
    for (auto& f : chunk) out.frames.push_back(std::move(f));
    ++out.chunks;
  }
  return out;
}

}  // namespace acwm
