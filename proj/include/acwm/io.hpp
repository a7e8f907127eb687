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

// On-disk formats: the WMT1 tensor container, PNG frames, JSON trajectories
// and manifests, and model checkpoints.
//
// WMT1 layout:
//   "WMT1" | u8 dtype (1 = f32, 2 = u8) | u8 ndim | ndim x u32 dims (LE) |
//   row-major payload (LE)

#ifndef ACWM_IO_HPP_
#define ACWM_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "acwm/geometry.hpp"
#include "acwm/image.hpp"

namespace acwm {

using Json = nlohmann::json;

class IoError : public Error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : Error(path.string() + ": " + what) {}
};

enum class DType : std::uint8_t { kF32 = 1, kU8 = 2 };

struct Tensor {
  DType dtype = DType::kF32;
  std::vector<std::uint32_t> dims;
  std::vector<float> f32;
  std::vector<std::uint8_t> u8;

  std::size_t numel() const;
  bool operator==(const Tensor&) const = default;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

// Row-major f32 tensor of shape rows x cols (Eigen storage is column-major).
Tensor tensor_from_matrix(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_tensor(const Tensor& t);

std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(std::span<const std::uint8_t> bytes);
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

// {"arms": ["right"], "timestamps": [...], "actions": [[x,y,z,r,p,y,o], ...]}
// Bi-arm frames are 14 numbers, arms in the listed order.
Json trajectory_to_json(const ActionTrajectory& traj);
ActionTrajectory trajectory_from_json(const Json& j);
ActionTrajectory read_trajectory(const std::filesystem::path& path);
void write_trajectory(const std::filesystem::path& path, const ActionTrajectory& traj);

// Parses a K x 7 action array for a single arm; throws ValidationError on any
// shape or value problem.
std::vector<ArmFrame> actions_from_json(const Json& j, ArmId arm, std::size_t expected_rows);

}  // namespace acwm

#endif  // ACWM_IO_HPP_
