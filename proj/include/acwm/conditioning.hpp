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

// Denoiser inputs: the 19-channel per-frame spatial stack and the context
// tokens (one reference-style token followed by delta-action tokens).

#ifndef ACWM_CONDITIONING_HPP_
#define ACWM_CONDITIONING_HPP_

#include <array>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "acwm/geometry.hpp"
#include "acwm/image.hpp"
#include "acwm/nn.hpp"

namespace acwm {

// Channel layout of the spatial input, in order.
inline constexpr int kLatentChannels = 4;
inline constexpr int kRayChannels = 6;
inline constexpr int kInputChannels = 19;
inline constexpr int kNoisyOffset = 0;
inline constexpr int kCondOffset = 4;
inline constexpr int kActionOffset = 8;
inline constexpr int kRayOffset = 12;
inline constexpr int kMaskChannel = 18;

inline constexpr std::array<std::string_view, kInputChannels> kInputChannelNames = {
    "noisy_latent.0", "noisy_latent.1", "noisy_latent.2", "noisy_latent.3",
    "cond_latent.0",  "cond_latent.1",  "cond_latent.2",  "cond_latent.3",
    "action_map.0",   "action_map.1",   "action_map.2",   "action_map.3",
    "ray_origin.x",   "ray_origin.y",   "ray_origin.z",   "ray_dir.x",
    "ray_dir.y",      "ray_dir.z",      "dropout_mask"};

// Ray map as a 6-channel plane stack: origin xyz, then direction xyz.
template <typename Scalar>
nn::Mat<Scalar> ray_channels(const RayMap& ray) {
  nn::Mat<Scalar> out(kRayChannels, ray.height * ray.width);
  out.topRows(3) = ray.origins.cast<Scalar>();
  out.bottomRows(3) = ray.directions.cast<Scalar>();
  return out;
}

// Concatenates the parts in the fixed layout above. When dropped, every
// condition channel (4..17) is zero and the mask plane is 0; otherwise the
// mask plane is 1.
template <typename Scalar>
nn::Mat<Scalar> assemble_condition(const nn::Mat<Scalar>& noisy_latent,
                                   const nn::Mat<Scalar>& cond_latent,
                                   const nn::Mat<Scalar>& action_latent,
                                   const nn::Mat<Scalar>& ray, bool dropped) {
  const Eigen::Index n = noisy_latent.cols();
  require(noisy_latent.rows() == kLatentChannels && cond_latent.rows() == kLatentChannels &&
              action_latent.rows() == kLatentChannels && ray.rows() == kRayChannels,
          "condition part has the wrong channel count");
  require(cond_latent.cols() == n && action_latent.cols() == n && ray.cols() == n,
          "condition parts are not at the same resolution");
  nn::Mat<Scalar> out = nn::Mat<Scalar>::Zero(kInputChannels, n);
  out.middleRows(kNoisyOffset, 4) = noisy_latent;
  if (!dropped) {
    out.middleRows(kCondOffset, 4) = cond_latent;
    out.middleRows(kActionOffset, 4) = action_latent;
    out.middleRows(kRayOffset, 6) = ray;
    out.row(kMaskChannel).setOnes();
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> assemble_condition(const FeatureMap<Scalar>& noisy_latent,
                                      const FeatureMap<Scalar>& cond_latent,
                                      const FeatureMap<Scalar>& action_latent,
                                      const RayMap& ray, bool dropped) {
  require(ray.height == noisy_latent.height && ray.width == noisy_latent.width,
          "ray map is not at latent resolution");
  return {assemble_condition<Scalar>(noisy_latent.data, cond_latent.data, action_latent.data,
                                     ray_channels<Scalar>(ray), dropped),
          noisy_latent.height, noisy_latent.width};
}

// Fixed per-component input scaling of delta actions (position, rpy,
// openness) so typical per-frame steps land near unit magnitude.
inline constexpr std::array<double, 7> kDeltaScale = {50, 50, 50, 10, 10, 10, 4};

// Delta-action resampler: per-step deltas -> linear projection -> M tokens
// by one residual cross-attention from M learned queries.
template <typename Scalar>
struct DeltaResampler {
  nn::Linear<Scalar> project;
  nn::Parameter<Scalar>* queries = nullptr;  // D x M
  nn::CrossAttention<Scalar> attend;

  static DeltaResampler create(nn::ParameterStore<Scalar>& store, int action_dim, int dim,
                               int tokens) {
    DeltaResampler r;
    r.project = nn::Linear<Scalar>::create(store, "resampler.project", action_dim, dim);
    r.queries = store.add("resampler.queries", dim, tokens);
    r.attend = nn::CrossAttention<Scalar>::create(store, "resampler.attend", dim, dim, dim);
    return r;
  }
  void init(std::mt19937_64& rng) const {
    project.init(rng);
    nn::init_normal(queries, 1.0, rng);
    attend.init(rng);
  }
};

template <typename Scalar>
struct ResamplerCache {
  nn::Mat<Scalar> deltas;     // scaled, action_dim x steps
  nn::Mat<Scalar> projected;  // D x steps
  nn::AttentionCache<Scalar> attention;
};

template <typename Scalar>
nn::Mat<Scalar> scaled_deltas(std::span<const ArmFrame> segment) {
  const Eigen::MatrixXd d = delta_matrix(segment);
  nn::Mat<Scalar> out(d.rows(), d.cols());
  for (Eigen::Index r = 0; r < d.rows(); ++r)
    out.row(r) = (d.row(r) * kDeltaScale[r % 7]).template cast<Scalar>();
  return out;
}

// D x M delta tokens for a segment of K >= 2 control frames.
template <typename Scalar>
nn::Mat<Scalar> encode_delta_actions(const DeltaResampler<Scalar>& r,
                                     std::span<const ArmFrame> segment,
                                     ResamplerCache<Scalar>* cache = nullptr) {
  require(segment.size() >= 2, "delta encoding needs at least two frames");
  ResamplerCache<Scalar> local;
  ResamplerCache<Scalar>& c = cache ? *cache : local;
  c.deltas = scaled_deltas<Scalar>(segment);
  require(c.deltas.rows() == r.project.weight->value.cols(),
          "segment arm count does not match the resampler");
  c.projected = r.project.forward(c.deltas);
  return r.attend.forward(r.queries->value, c.projected, c.attention);
}

template <typename Scalar>
void encode_delta_actions_backward(const DeltaResampler<Scalar>& r,
                                   const ResamplerCache<Scalar>& c,
                                   const nn::Mat<Scalar>& d_tokens) {
  auto [d_queries, d_projected] = r.attend.backward(c.attention, d_tokens);
  r.queries->grad += d_queries;
  r.project.backward(c.deltas, d_projected);
}

// Reference-style token: 8x8-pixel average pooled patches -> linear map ->
// mean over patches.
template <typename Scalar>
struct StyleEncoder {
  nn::Linear<Scalar> project;

  static StyleEncoder create(nn::ParameterStore<Scalar>& store, int dim) {
    return {nn::Linear<Scalar>::create(store, "style.project", 3, dim)};
  }
  void init(std::mt19937_64& rng) const { project.init(rng); }
};

template <typename Scalar>
nn::Mat<Scalar> pooled_patches(const FeatureMap<Scalar>& frame, int patch = 8) {
  require(frame.channels() == 3, "style token expects an RGB frame");
  require(frame.height % patch == 0 && frame.width % patch == 0,
          "frame is not divisible into patches");
  const int gh = frame.height / patch, gw = frame.width / patch;
  nn::Mat<Scalar> out = nn::Mat<Scalar>::Zero(3, gh * gw);
  for (int r = 0; r < frame.height; ++r)
    for (int c = 0; c < frame.width; ++c)
      out.col((r / patch) * gw + c / patch) += frame.data.col(r * frame.width + c);
  return out / Scalar(patch * patch);
}

template <typename Scalar>
nn::Vec<Scalar> reference_style_token(const StyleEncoder<Scalar>& enc, const nn::Mat<Scalar>& patches) {
  return enc.project.forward(patches).rowwise().mean();
}

template <typename Scalar>
nn::Vec<Scalar> reference_style_token(const StyleEncoder<Scalar>& enc, const FeatureMap<Scalar>& frame) {
  return reference_style_token(enc, pooled_patches(frame));
}

template <typename Scalar>
void reference_style_token_backward(const StyleEncoder<Scalar>& enc, const nn::Mat<Scalar>& patches,
                                    const nn::Vec<Scalar>& d_token) {
  const Eigen::Index n = patches.cols();
  nn::Mat<Scalar> dy = d_token.replicate(1, n) / Scalar(n);
  enc.project.backward(patches, dy);
}

// D x (1 + M): column 0 is the style token, then the delta tokens.
template <typename Scalar>
nn::Mat<Scalar> context_tokens(const nn::Vec<Scalar>& style, const nn::Mat<Scalar>& delta_tokens) {
  nn::Mat<Scalar> out(style.size(), 1 + delta_tokens.cols());
  out.col(0) = style;
  out.rightCols(delta_tokens.cols()) = delta_tokens;
  return out;
}

// Anything carrying a `dropped` flag (one Bernoulli draw per sample).
template <typename Sample>
void apply_condition_dropout(std::span<Sample> samples, double p_drop, std::mt19937_64& rng) {
  require(p_drop >= 0.0 && p_drop <= 1.0, "dropout probability outside [0, 1]");
  std::bernoulli_distribution drop(p_drop);
  for (Sample& s : samples) s.dropped = drop(rng) || s.dropped;
}

}  // namespace acwm

#endif  // ACWM_CONDITIONING_HPP_
