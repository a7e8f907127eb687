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

#include "acwm/latent_codec.hpp"

#include <random>

namespace acwm {

LatentCodec::LatentCodec(std::uint64_t seed) : seed_(seed) {
  basis_.setZero();
  for (int c = 0; c < 3; ++c) basis_.row(c).segment(c * 64, 64).setConstant(1.0 / 8.0);

  // Draw until the residual is comfortably non-degenerate; with a Gaussian
  // draw the first attempt always is, but keep the loop honest.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Matrix<double, 1, kBlock> r;
  do {
    for (int k = 0; k < kBlock; ++k) r(k) = normal(rng);
    for (int c = 0; c < 3; ++c) r -= r.dot(basis_.row(c)) * basis_.row(c);
  } while (r.norm() < 1e-3);
  basis_.row(3) = r.normalized();
}

}  // namespace acwm
