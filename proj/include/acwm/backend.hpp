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

// World-model backends and the chunk-wise autoregressive rollout.

#ifndef ACWM_BACKEND_HPP_
#define ACWM_BACKEND_HPP_

#include <span>
#include <string>
#include <vector>

#include "acwm/diffusion.hpp"
#include "acwm/geometry.hpp"
#include "acwm/image.hpp"

namespace acwm {

// frames[k][v]: frame k of view v.
using FrameGrid = std::vector<std::vector<Image>>;

std::uint64_t hash_frames(const FrameGrid& frames, std::uint64_t seed = 0xcbf29ce484222325ULL);

struct MemoryFrame {
  int source_index = 0;  // index within the chunk it came from
  std::vector<Image> views;
  ArmFrame arms;
};

// The 4 evenly strided frames kept from the previous chunk.
class SparseMemory {
 public:
  explicit SparseMemory(int capacity = 4) : capacity_(capacity) {}

  // For K = 16 and capacity 4: 3, 7, 11, 15.
  static std::vector<int> strided_indices(int chunk_size, int capacity);

  void update(const FrameGrid& chunk, std::span<const ArmFrame> actions);
  void clear() { frames_.clear(); }

  bool empty() const { return frames_.empty(); }
  std::size_t size() const { return frames_.size(); }
  int capacity() const { return capacity_; }
  const std::vector<MemoryFrame>& frames() const { return frames_; }
  const MemoryFrame& latest() const { return frames_.back(); }

 private:
  int capacity_;
  std::vector<MemoryFrame> frames_;
};

struct GenerationRequest {
  std::vector<Image> condition;  // per view, the frame the chunk continues from
  ArmFrame condition_arms;       // commanded state shown in `condition`
  const SparseMemory* memory = nullptr;
  std::span<const ArmFrame> actions;  // K frames
  int chunk_index = 0;
};

class WorldModelBackend {
 public:
  virtual ~WorldModelBackend() = default;
  virtual std::string id() const = 0;
  virtual const CameraRig& rig() const = 0;
  // K x V frames.
  virtual FrameGrid generate(const GenerationRequest& request) = 0;
};

class BackendError : public Error {
 public:
  BackendError(int chunk, const std::string& what)
      : Error("chunk " + std::to_string(chunk) + ": " + what), chunk_(chunk) {}
  int chunk() const { return chunk_; }

 private:
  int chunk_;
};

struct Observation {
  std::vector<Image> frames;  // latest frame per view
  ArmFrame arms;              // last commanded state
  int chunk_index = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::vector<ArmFrame> next_chunk(const Observation& obs) = 0;
};

struct RolloutConfig {
  int chunk_size = 16;
  int memory_size = 4;
  int max_chunks = 30;  // 10 is the multi-view default
  SamplerOptions sampler;

  void validate() const;
};

struct RolloutVideo {
  FrameGrid frames;                        // chunks * K frames
  std::vector<std::uint64_t> chunk_hashes;
  SparseMemory memory;
  int chunks = 0;
};

// Open-loop rollout over a fixed action stream. Each chunk continues from the
// last generated frame; memory is refreshed after every chunk. Stops at the
// end of the stream (a trailing partial chunk is dropped) or at max_chunks.
RolloutVideo rollout_chunks(WorldModelBackend& backend, const std::vector<Image>& init_frames,
                            const ArmFrame& init_arms, std::span<const ArmFrame> actions,
                            const RolloutConfig& config);

}  // namespace acwm

#endif  // ACWM_BACKEND_HPP_
