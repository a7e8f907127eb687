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

// Linear-beta noise schedule, v-parameterization and a deterministic DDIM
// sampler over a pluggable denoiser.

#ifndef ACWM_DIFFUSION_HPP_
#define ACWM_DIFFUSION_HPP_

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "acwm/conditioning.hpp"
#include "acwm/nn.hpp"

namespace acwm {

// Timesteps are 1-based: t in [1, T].
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  int steps() const { return static_cast<int>(beta_.size()); }
  double beta(int t) const { return beta_[index(t)]; }
  double alpha(int t) const { return alpha_[index(t)]; }
  // Cumulative product of alpha up to t; alpha_bar(0) is defined as 1.
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_[index(t)]; }

  const Eigen::VectorXd& betas() const { return beta_; }
  const Eigen::VectorXd& alpha_bars() const { return alpha_bar_; }

  friend NoiseSchedule make_linear_schedule(int steps, double beta_first, double beta_last);

 private:
  Eigen::Index index(int t) const {
    require(t >= 1 && t <= steps(), "timestep outside [1, T]");
    return t - 1;
  }

  Eigen::VectorXd beta_, alpha_, alpha_bar_;
};

// beta_t = beta_first + (t - 1) / (T - 1) * (beta_last - beta_first).
NoiseSchedule make_linear_schedule(int steps, double beta_first, double beta_last);

// Reference configuration of the full-size model, kept verbatim for
// documentation and config hashing.
struct ReferenceDiffusionConfig {
  int diffusion_steps = 1000;
  double beta_first = 0.00085;
  double beta_last = 0.0120;
  int input_channels = 19;
  int base_channels = 320;
  int context_dim = 1024;
  int chunk_size = 16;
  int memory_size = 4;
  double learning_rate = 5e-5;
  double grad_clip_norm = 0.5;
};

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
template <typename D0, typename D1>
auto q_sample(const Eigen::MatrixBase<D0>& z0, const Eigen::MatrixBase<D1>& eps, int t,
              const NoiseSchedule& s) {
  using S = typename D0::Scalar;
  const double ab = s.alpha_bar(t);
  return (S(std::sqrt(ab)) * z0 + S(std::sqrt(1.0 - ab)) * eps).eval();
}

// v = sqrt(abar_t) eps - sqrt(1 - abar_t) z0
template <typename D0, typename D1>
auto v_target(const Eigen::MatrixBase<D0>& z0, const Eigen::MatrixBase<D1>& eps, int t,
              const NoiseSchedule& s) {
  using S = typename D0::Scalar;
  const double ab = s.alpha_bar(t);
  return (S(std::sqrt(ab)) * eps - S(std::sqrt(1.0 - ab)) * z0).eval();
}

// z0_hat = sqrt(abar_t) z_t - sqrt(1 - abar_t) v
template <typename D0, typename D1>
auto predict_z0_from_v(const Eigen::MatrixBase<D0>& zt, const Eigen::MatrixBase<D1>& v, int t,
                       const NoiseSchedule& s) {
  using S = typename D0::Scalar;
  const double ab = s.alpha_bar(t);
  return (S(std::sqrt(ab)) * zt - S(std::sqrt(1.0 - ab)) * v).eval();
}

// eps_hat = sqrt(1 - abar_t) z_t + sqrt(abar_t) v
template <typename D0, typename D1>
auto predict_eps_from_v(const Eigen::MatrixBase<D0>& zt, const Eigen::MatrixBase<D1>& v, int t,
                        const NoiseSchedule& s) {
  using S = typename D0::Scalar;
  const double ab = s.alpha_bar(t);
  return (S(std::sqrt(1.0 - ab)) * zt + S(std::sqrt(ab)) * v).eval();
}

// One call predicts v for every view of a single frame.
template <typename Scalar>
class DenoiserInterface {
 public:
  virtual ~DenoiserInterface() = default;

  // inputs: per view, 19 x (height * width); tokens: per view, D x N.
  virtual std::vector<nn::Mat<Scalar>> predict_v(std::span<const nn::Mat<Scalar>> inputs,
                                                 int height, int width, int t,
                                                 std::span<const nn::Mat<Scalar>> tokens) const = 0;
};

template <typename Scalar>
struct FrameCondition {
  nn::Mat<Scalar> cond_latent;    // 4 x HW
  nn::Mat<Scalar> action_latent;  // 4 x HW
  nn::Mat<Scalar> ray;            // 6 x HW
};

// Everything but the noisy latent for one chunk of V views x K frames.
template <typename Scalar>
struct ChunkConditions {
  int views = 0;
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<FrameCondition<Scalar>> items;  // index frame * views + view
  std::vector<nn::Mat<Scalar>> tokens;        // per view
  bool dropped = false;

  FrameCondition<Scalar>& at(int frame, int view) { return items[frame * views + view]; }
  const FrameCondition<Scalar>& at(int frame, int view) const { return items[frame * views + view]; }

  std::vector<nn::Mat<Scalar>> frame_inputs(int frame, std::span<const nn::Mat<Scalar>> noisy,
                                            bool drop) const {
    std::vector<nn::Mat<Scalar>> out;
    out.reserve(views);
    for (int v = 0; v < views; ++v) {
      const auto& c = at(frame, v);
      out.push_back(assemble_condition<Scalar>(noisy[v], c.cond_latent, c.action_latent, c.ray, drop));
    }
    return out;
  }
};

// Latents of a chunk, index frame * views + view, each 4 x HW.
template <typename Scalar>
using ChunkLatents = std::vector<nn::Mat<Scalar>>;

// Descending timesteps of a uniform stride over [1, T].
std::vector<int> sampling_timesteps(int schedule_steps, int sampler_steps);

struct SamplerOptions {
  int steps = 16;
  double guidance_scale = 1.0;
};

// Deterministic DDIM (eta = 0). With guidance g != 1 the unconditional
// branch uses the dropped-condition input and v = v_u + g (v_c - v_u).
template <typename Scalar>
ChunkLatents<Scalar> sample_chunk(const DenoiserInterface<Scalar>& denoiser,
                                  const ChunkConditions<Scalar>& cond, const NoiseSchedule& schedule,
                                  const SamplerOptions& options, std::mt19937_64& rng) {
  require(options.steps >= 1 && options.steps <= schedule.steps(), "sampler steps outside [1, T]");
  const int n = cond.height * cond.width;
  const int V = cond.views;
  std::normal_distribution<double> normal(0.0, 1.0);
  ChunkLatents<Scalar> z(static_cast<std::size_t>(cond.frames) * V);
  for (auto& m : z) {
    m.resize(kLatentChannels, n);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = Scalar(normal(rng));
  }

  const std::vector<int> ts = sampling_timesteps(schedule.steps(), options.steps);
  const bool guided = options.guidance_scale != 1.0;
  const Scalar g = Scalar(options.guidance_scale);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
    const Scalar a_prev = Scalar(std::sqrt(schedule.alpha_bar(t_prev)));
    const Scalar s_prev = Scalar(std::sqrt(1.0 - schedule.alpha_bar(t_prev)));
    for (int k = 0; k < cond.frames; ++k) {
      std::span<const nn::Mat<Scalar>> noisy(z.data() + static_cast<std::size_t>(k) * V, V);
      std::vector<nn::Mat<Scalar>> v = denoiser.predict_v(cond.frame_inputs(k, noisy, cond.dropped),
                                                          cond.height, cond.width, t, cond.tokens);
      if (guided) {
        const auto vu = denoiser.predict_v(cond.frame_inputs(k, noisy, true), cond.height,
                                           cond.width, t, cond.tokens);
        for (int view = 0; view < V; ++view) v[view] = vu[view] + g * (v[view] - vu[view]);
      }
      for (int view = 0; view < V; ++view) {
        nn::Mat<Scalar>& zt = z[k * V + view];
        const nn::Mat<Scalar> z0 = predict_z0_from_v(zt, v[view], t, schedule);
        const nn::Mat<Scalar> eps = predict_eps_from_v(zt, v[view], t, schedule);
        zt = a_prev * z0 + s_prev * eps;
      }
    }
  }
  return z;
}

}  // namespace acwm

#endif  // ACWM_DIFFUSION_HPP_
