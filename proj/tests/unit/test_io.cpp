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
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include "acwm/io.hpp"

using namespace acwm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("acwm_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("tensor round trip is bit-identical") {
  std::mt19937_64 rng(11);
  std::normal_distribution<float> n;
  Tensor t;
  t.dims = {3, 5, 7};
  for (std::size_t i = 0; i < t.numel(); ++i) t.f32.push_back(n(rng));
  t.f32[4] = -0.0f;
  t.f32[5] = std::numeric_limits<float>::denorm_min();
  t.f32[6] = std::numeric_limits<float>::infinity();
  CHECK(decode_tensor(encode_tensor(t)) == t);

  const fs::path dir = scratch("tensor");
  write_tensor(dir / "t.wmt", t);
  const Tensor back = read_tensor(dir / "t.wmt");
  REQUIRE(back.f32.size() == t.f32.size());
  CHECK(std::memcmp(back.f32.data(), t.f32.data(), t.f32.size() * sizeof(float)) == 0);
  CHECK(std::signbit(back.f32[4]));

  Tensor u;
  u.dtype = DType::kU8;
  u.dims = {4};
  u.u8 = {0, 1, 254, 255};
  CHECK(decode_tensor(encode_tensor(u)) == u);

  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  CHECK(matrix_from_tensor(tensor_from_matrix(m)) == m);
}

TEST_CASE("malformed tensors") {
  Tensor t;
  t.dims = {2};
  t.f32 = {1.0f, 2.0f};
  std::vector<std::uint8_t> bytes = encode_tensor(t);
  std::vector<std::uint8_t> bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_tensor(bad), ValidationError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_tensor(bad), ValidationError);
  CHECK_THROWS_AS(read_tensor("/nonexistent/t.wmt"), IoError);
}

TEST_CASE("png and base64 round trips") {
  std::mt19937_64 rng(5);
  Image img(13, 7);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng());
  CHECK(decode_png(encode_png(img)) == img);
  const fs::path dir = scratch("png");
  write_png(dir / "a" / "b.png", img);
  CHECK(read_png(dir / "a" / "b.png") == img);
  CHECK_THROWS_AS(read_png(dir / "missing.png"), IoError);

  CHECK(base64_encode(std::vector<std::uint8_t>{'M', 'a', 'n'}) == "TWFu");
  CHECK(base64_encode(std::vector<std::uint8_t>{'M', 'a'}) == "TWE=");
  CHECK(base64_encode(std::vector<std::uint8_t>{'M'}) == "TQ==");
  for (int len = 0; len < 40; ++len) {
    std::vector<std::uint8_t> data(len);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng());
    CHECK(base64_decode(base64_encode(data)) == data);
  }
}

TEST_CASE("trajectory json") {
  const ActionTrajectory t = read_trajectory(fs::path(ACWM_TEST_DATA) / "sample_traj.json");
  CHECK(t.frames.size() == 8);
  CHECK(t.frames[3][0].openness == 0.2);
  CHECK(t.frames[0][0].arm == ArmId::kRight);
  const ActionTrajectory back = trajectory_from_json(trajectory_to_json(t));
  CHECK(back.frames == t.frames);
  CHECK(back.timestamps == t.timestamps);

  Json j = trajectory_to_json(t);
  j["actions"][2].push_back(0.0);
  CHECK_THROWS_AS(trajectory_from_json(j), ValidationError);
}

TEST_CASE("action rows from requests") {
  Json rows = Json::array();
  for (int i = 0; i < 16; ++i) rows.push_back({0.1 * i, 0.0, 0.3, 0.0, 0.0, 0.0, 1.0});
  const auto frames = actions_from_json(rows, ArmId::kRight, 16);
  CHECK(frames.size() == 16);
  CHECK(frames[5][0].pose.position.x() == doctest::Approx(0.5));

  Json short_rows = rows;
  short_rows.erase(short_rows.begin());
  CHECK_THROWS_AS(actions_from_json(short_rows, ArmId::kRight, 16), ValidationError);
  Json wide = rows;
  wide[0].push_back(0.0);
  CHECK_THROWS_AS(actions_from_json(wide, ArmId::kRight, 16), ValidationError);
  Json nan_row = rows;
  nan_row[1][0] = "x";
  CHECK_THROWS_AS(actions_from_json(nan_row, ArmId::kRight, 16), ValidationError);
}
