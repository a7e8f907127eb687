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

// Fixed linear codec between RGB frames and 4-channel latents at 1/8
// resolution.
//
// Each 8x8x3 block (192 values, index c * 64 + dy * 8 + dx) is projected onto
// four orthonormal rows: the per-channel block means for R, G and B (so any
// constant color survives a round trip exactly) and one seeded random
// direction orthogonalized against them. Decoding applies the transpose, so
// decode(encode(.)) is the orthogonal projection onto that 4-dim subspace.

#ifndef ACWM_LATENT_CODEC_HPP_
#define ACWM_LATENT_CODEC_HPP_

#include <Eigen/Core>
#include <cstdint>

#include "acwm/image.hpp"

namespace acwm {

class LatentCodec {
 public:
  static constexpr int kFactor = 8;
  static constexpr int kChannels = 4;
  static constexpr int kBlock = 3 * kFactor * kFactor;
  using Basis = Eigen::Matrix<double, kChannels, kBlock>;

  explicit LatentCodec(std::uint64_t seed = 0x5eed0c0decULL);

  const Basis& basis() const { return basis_; }
  std::uint64_t seed() const { return seed_; }

  template <typename Scalar>
  FeatureMap<Scalar> encode(const FeatureMap<Scalar>& frame) const;

  // Transpose projection followed by depth-to-space; no clamping, so the
  // codec stays exactly linear.
  template <typename Scalar>
  FeatureMap<Scalar> decode_unclamped(const FeatureMap<Scalar>& latent) const;

  template <typename Scalar>
  FeatureMap<Scalar> decode(const FeatureMap<Scalar>& latent) const {
    FeatureMap<Scalar> out = decode_unclamped(latent);
    out.data = out.data.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
    return out;
  }

  FeatureMap<double> encode_image(const Image& img) const { return encode(to_planes<double>(img)); }
  Image decode_image(const FeatureMap<double>& latent) const { return to_image(decode(latent)); }

 private:
  std::uint64_t seed_;
  Basis basis_;
};

template <typename Scalar>
FeatureMap<Scalar> LatentCodec::encode(const FeatureMap<Scalar>& frame) const {
  require(frame.channels() == 3, "encode expects a 3-channel frame");
  require(frame.height % kFactor == 0 && frame.width % kFactor == 0,
          "frame resolution must be divisible by 8");
  const int gh = frame.height / kFactor, gw = frame.width / kFactor;
  const Eigen::Matrix<Scalar, kChannels, kBlock> B = basis_.cast<Scalar>();
  FeatureMap<Scalar> out(kChannels, gh, gw);
  Eigen::Matrix<Scalar, kBlock, 1> block;
  for (int i = 0; i < gh; ++i) {
    for (int j = 0; j < gw; ++j) {
      for (int c = 0; c < 3; ++c)
        for (int dy = 0; dy < kFactor; ++dy)
          for (int dx = 0; dx < kFactor; ++dx)
            block(c * 64 + dy * 8 + dx) = frame(c, i * kFactor + dy, j * kFactor + dx);
      out.data.col(i * gw + j) = B * block;
    }
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> LatentCodec::decode_unclamped(const FeatureMap<Scalar>& latent) const {
  require(latent.channels() == kChannels, "decode expects a 4-channel latent");
  const Eigen::Matrix<Scalar, kBlock, kChannels> Bt = basis_.transpose().cast<Scalar>();
  FeatureMap<Scalar> out(3, latent.height * kFactor, latent.width * kFactor);
  Eigen::Matrix<Scalar, kBlock, 1> block;
  for (int i = 0; i < latent.height; ++i) {
    for (int j = 0; j < latent.width; ++j) {
      block.noalias() = Bt * latent.data.col(i * latent.width + j);
      for (int c = 0; c < 3; ++c)
        for (int dy = 0; dy < kFactor; ++dy)
          for (int dx = 0; dx < kFactor; ++dx)
            out(c, i * kFactor + dy, j * kFactor + dx) = block(c * 64 + dy * 8 + dx);
    }
  }
  return out;
}

}  // namespace acwm

#endif  // ACWM_LATENT_CODEC_HPP_
