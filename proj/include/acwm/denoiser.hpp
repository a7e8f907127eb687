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

// TinyDenoiser: a three-level conv UNet over latent frames.
//
//   stem   conv 19 -> C            (H x W)        + t-emb, SiLU
//   down1  conv C -> C, stride 2   (H/2 x W/2)    + t-emb, SiLU
//   down2  conv C -> 2C, stride 2  (H/4 x W/4)    + t-emb, SiLU
//   mid    cross-attention to context tokens      (residual)
//          cross-attention to the other views     (residual, skipped if V = 1)
//   up1    [up(mid), down1] conv 3C -> C          + t-emb, SiLU
//   up2    [up(up1), stem] conv 2C -> C           + t-emb, SiLU
//   head   [up2, input] conv (C + 19) -> 4        (zero-initialised)
//
// Views share all weights and are processed independently except in the
// view attention, whose context (the other views) is concatenated in a
// content-sorted order so permuting the views permutes the outputs exactly.

#ifndef ACWM_DENOISER_HPP_
#define ACWM_DENOISER_HPP_

#include <algorithm>
#include <memory>
#include <numeric>
#include <string>

#include "acwm/conditioning.hpp"
#include "acwm/diffusion.hpp"
#include "acwm/nn.hpp"

namespace acwm {

struct ModelConfig {
  int base_channels = 32;
  int context_dim = 64;   // D
  int delta_tokens = 8;   // M
  int arm_count = 1;
  int time_dim = 64;
  int time_hidden = 128;
  std::uint64_t init_seed = 7;

  int action_dim() const { return 7 * arm_count; }
  std::uint64_t hash() const;
};

template <typename Scalar>
class TinyDenoiser : public DenoiserInterface<Scalar> {
 public:
  using Mat = nn::Mat<Scalar>;
  using Vec = nn::Vec<Scalar>;

  struct ViewTape {
    nn::ConvCache<Scalar> stem, down1, down2, up1, up2, head;
    Mat pre0, h0, pre1, h1, pre2, h2, h3, h4;
    nn::AttentionCache<Scalar> ctx_attn, view_attn;
    Mat pre5, h5, pre6, h6;
    std::vector<int> others;  // view indices in context order
  };

  struct Tape {
    int h = 0, w = 0, h1 = 0, w1 = 0, h2 = 0, w2 = 0;
    Vec temb, time_pre, time_hidden, block_bias;
    std::vector<ViewTape> views;
  };

  TinyDenoiser() = default;
  TinyDenoiser(nn::ParameterStore<Scalar>& store, const ModelConfig& cfg) : cfg_(cfg) {
    const int C = cfg.base_channels;
    stem_ = nn::Conv3x3<Scalar>::create(store, "denoiser.stem", kInputChannels, C);
    down1_ = nn::Conv3x3<Scalar>::create(store, "denoiser.down1", C, C, 2);
    down2_ = nn::Conv3x3<Scalar>::create(store, "denoiser.down2", C, 2 * C, 2);
    ctx_attn_ = nn::CrossAttention<Scalar>::create(store, "denoiser.ctx_attn", 2 * C,
                                                   cfg.context_dim, 2 * C);
    view_attn_ = nn::CrossAttention<Scalar>::create(store, "denoiser.view_attn", 2 * C, 2 * C, 2 * C);
    up1_ = nn::Conv3x3<Scalar>::create(store, "denoiser.up1", 3 * C, C);
    up2_ = nn::Conv3x3<Scalar>::create(store, "denoiser.up2", 2 * C, C);
    head_ = nn::Conv3x3<Scalar>::create(store, "denoiser.head", C + kInputChannels, kLatentChannels);
    time1_ = nn::Linear<Scalar>::create(store, "denoiser.time1", cfg.time_dim, cfg.time_hidden);
    time2_ = nn::Linear<Scalar>::create(store, "denoiser.time2", cfg.time_hidden, 6 * C);
  }

  // Random init; the head stays zero unless `zero_head` is false.
  void init(std::mt19937_64& rng, bool zero_head = true) const {
    stem_.init(rng);
    down1_.init(rng);
    down2_.init(rng);
    ctx_attn_.init(rng, 0.5);
    view_attn_.init(rng, 0.5);
    up1_.init(rng);
    up2_.init(rng);
    time1_.init(rng);
    time2_.init(rng);
    if (!zero_head) head_.init(rng);
  }

  std::vector<Mat> predict_v(std::span<const Mat> inputs, int height, int width, int t,
                             std::span<const Mat> tokens) const override {
    return forward(inputs, height, width, t, tokens, nullptr);
  }

  std::vector<Mat> forward(std::span<const Mat> inputs, int height, int width, int t,
                           std::span<const Mat> tokens, Tape* tape) const {
    const int V = static_cast<int>(inputs.size());
    require(V >= 1 && tokens.size() == inputs.size(), "need one token set per view");
    const int C = cfg_.base_channels;
    Tape local;
    Tape& tp = tape ? *tape : local;
    tp.h = height;
    tp.w = width;
    tp.h1 = nn::Conv3x3<Scalar>::out_size(height, 2);
    tp.w1 = nn::Conv3x3<Scalar>::out_size(width, 2);
    tp.h2 = nn::Conv3x3<Scalar>::out_size(tp.h1, 2);
    tp.w2 = nn::Conv3x3<Scalar>::out_size(tp.w1, 2);
    tp.temb = nn::timestep_embedding<Scalar>(t, cfg_.time_dim);
    tp.time_pre = time1_.forward(tp.temb);
    tp.time_hidden = nn::silu(tp.time_pre);
    tp.block_bias = time2_.forward(tp.time_hidden);
    const Vec& bb = tp.block_bias;
    tp.views.assign(V, ViewTape{});

    for (int v = 0; v < V; ++v) {
      require(inputs[v].rows() == kInputChannels && inputs[v].cols() == height * width,
              "denoiser input has the wrong shape");
      ViewTape& vt = tp.views[v];
      vt.pre0 = stem_.forward(inputs[v], height, width, vt.stem);
      vt.pre0.colwise() += bb.segment(0, C);
      vt.h0 = nn::silu(vt.pre0);
      vt.pre1 = down1_.forward(vt.h0, height, width, vt.down1);
      vt.pre1.colwise() += bb.segment(C, C);
      vt.h1 = nn::silu(vt.pre1);
      vt.pre2 = down2_.forward(vt.h1, tp.h1, tp.w1, vt.down2);
      vt.pre2.colwise() += bb.segment(2 * C, 2 * C);
      vt.h2 = nn::silu(vt.pre2);
      vt.h3 = ctx_attn_.forward(vt.h2, tokens[v], vt.ctx_attn);
    }

    for (int v = 0; v < V; ++v) {
      ViewTape& vt = tp.views[v];
      if (V == 1) {
        vt.h4 = vt.h3;
        continue;
      }
      vt.others.clear();
      for (int u = 0; u < V; ++u)
        if (u != v) vt.others.push_back(u);
      std::stable_sort(vt.others.begin(), vt.others.end(), [&](int a, int b) {
        const Mat& x = tp.views[a].h3;
        const Mat& y = tp.views[b].h3;
        return std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(), y.data() + y.size());
      });
      const Eigen::Index n = vt.h3.cols();
      Mat ctx(vt.h3.rows(), n * static_cast<Eigen::Index>(vt.others.size()));
      for (std::size_t i = 0; i < vt.others.size(); ++i)
        ctx.middleCols(static_cast<Eigen::Index>(i) * n, n) = tp.views[vt.others[i]].h3;
      vt.h4 = view_attn_.forward(vt.h3, ctx, vt.view_attn);
    }

    std::vector<Mat> out(V);
    for (int v = 0; v < V; ++v) {
      ViewTape& vt = tp.views[v];
      const Mat u1 = nn::upsample2x<Scalar>(vt.h4, tp.h2, tp.w2, tp.h1, tp.w1);
      vt.pre5 = up1_.forward(nn::vstack<Scalar>(u1, vt.h1), tp.h1, tp.w1, vt.up1);
      vt.pre5.colwise() += bb.segment(4 * C, C);
      vt.h5 = nn::silu(vt.pre5);
      const Mat u2 = nn::upsample2x<Scalar>(vt.h5, tp.h1, tp.w1, height, width);
      vt.pre6 = up2_.forward(nn::vstack<Scalar>(u2, vt.h0), height, width, vt.up2);
      vt.pre6.colwise() += bb.segment(5 * C, C);
      vt.h6 = nn::silu(vt.pre6);
      out[v] = head_.forward(nn::vstack<Scalar>(vt.h6, inputs[v]), height, width, vt.head);
    }
    return out;
  }

  // Accumulates parameter gradients; returns d(loss)/d(tokens) per view.
  std::vector<Mat> backward(const Tape& tp, std::span<const Mat> d_out) const {
    const int V = static_cast<int>(tp.views.size());
    const int C = cfg_.base_channels;
    Vec d_bb = Vec::Zero(tp.block_bias.size());
    std::vector<Mat> d_h4(V), d_h1(V), d_h0(V);

    for (int v = 0; v < V; ++v) {
      const ViewTape& vt = tp.views[v];
      const Mat d_head_in = head_.backward(vt.head, d_out[v]);
      const Mat d_pre6 = nn::silu_backward<Scalar>(vt.pre6, d_head_in.topRows(C));
      d_bb.segment(5 * C, C) += d_pre6.rowwise().sum();
      const Mat d_c2 = up2_.backward(vt.up2, d_pre6);
      d_h0[v] = d_c2.bottomRows(C);
      const Mat d_h5 = nn::upsample2x_backward<Scalar>(d_c2.topRows(C), tp.h1, tp.w1, tp.h, tp.w);
      const Mat d_pre5 = nn::silu_backward<Scalar>(vt.pre5, d_h5);
      d_bb.segment(4 * C, C) += d_pre5.rowwise().sum();
      const Mat d_c1 = up1_.backward(vt.up1, d_pre5);
      d_h1[v] = d_c1.bottomRows(C);
      d_h4[v] = nn::upsample2x_backward<Scalar>(d_c1.topRows(2 * C), tp.h2, tp.w2, tp.h1, tp.w1);
    }

    std::vector<Mat> d_h3(V);
    if (V == 1) {
      d_h3[0] = d_h4[0];
    } else {
      for (int v = 0; v < V; ++v) d_h3[v] = Mat::Zero(d_h4[v].rows(), d_h4[v].cols());
      for (int v = 0; v < V; ++v) {
        const ViewTape& vt = tp.views[v];
        auto [dx, dctx] = view_attn_.backward(vt.view_attn, d_h4[v]);
        d_h3[v] += dx;
        const Eigen::Index n = vt.h3.cols();
        for (std::size_t i = 0; i < vt.others.size(); ++i)
          d_h3[vt.others[i]] += dctx.middleCols(static_cast<Eigen::Index>(i) * n, n);
      }
    }

    std::vector<Mat> d_tokens(V);
    for (int v = 0; v < V; ++v) {
      const ViewTape& vt = tp.views[v];
      auto [d_h2, d_tok] = ctx_attn_.backward(vt.ctx_attn, d_h3[v]);
      d_tokens[v] = std::move(d_tok);
      const Mat d_pre2 = nn::silu_backward<Scalar>(vt.pre2, d_h2);
      d_bb.segment(2 * C, 2 * C) += d_pre2.rowwise().sum();
      d_h1[v] += down2_.backward(vt.down2, d_pre2);
      const Mat d_pre1 = nn::silu_backward<Scalar>(vt.pre1, d_h1[v]);
      d_bb.segment(C, C) += d_pre1.rowwise().sum();
      d_h0[v] += down1_.backward(vt.down1, d_pre1);
      const Mat d_pre0 = nn::silu_backward<Scalar>(vt.pre0, d_h0[v]);
      d_bb.segment(0, C) += d_pre0.rowwise().sum();
      stem_.backward(vt.stem, d_pre0);
    }

    const Mat d_hidden = time2_.backward(tp.time_hidden, d_bb);
    time1_.backward(tp.temb, nn::silu_backward<Scalar>(tp.time_pre, d_hidden));
    return d_tokens;
  }

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  nn::Conv3x3<Scalar> stem_, down1_, down2_, up1_, up2_, head_;
  nn::CrossAttention<Scalar> ctx_attn_, view_attn_;
  nn::Linear<Scalar> time1_, time2_;
};

// Every trainable part of the world model: the two conditioning encoders and
// the denoiser, sharing one parameter store.
template <typename Scalar>
class WorldModelNet {
 public:
  explicit WorldModelNet(const ModelConfig& cfg, bool zero_head = true)
      : cfg_(cfg), store_(std::make_unique<nn::ParameterStore<Scalar>>()) {
    resampler_ = DeltaResampler<Scalar>::create(*store_, cfg.action_dim(), cfg.context_dim,
                                                cfg.delta_tokens);
    style_ = StyleEncoder<Scalar>::create(*store_, cfg.context_dim);
    denoiser_ = std::make_unique<TinyDenoiser<Scalar>>(*store_, cfg);
    std::mt19937_64 rng(cfg.init_seed);
    resampler_.init(rng);
    style_.init(rng);
    denoiser_->init(rng, zero_head);
  }

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore<Scalar>& parameters() { return *store_; }
  const nn::ParameterStore<Scalar>& parameters() const { return *store_; }
  const DeltaResampler<Scalar>& resampler() const { return resampler_; }
  const StyleEncoder<Scalar>& style() const { return style_; }
  const TinyDenoiser<Scalar>& denoiser() const { return *denoiser_; }

  // Copies parameter values by name into a model of any scalar type.
  template <typename Other>
  void copy_parameters_to(WorldModelNet<Other>& dst) const {
    for (const auto& p : store_->all()) {
      auto* q = dst.parameters().find(p.name);
      if (q == nullptr || q->value.rows() != p.value.rows() || q->value.cols() != p.value.cols())
        throw Error("parameter layout mismatch at " + p.name);
      q->value = p.value.template cast<Other>();
    }
  }

 private:
  ModelConfig cfg_;
  std::unique_ptr<nn::ParameterStore<Scalar>> store_;
  DeltaResampler<Scalar> resampler_;
  StyleEncoder<Scalar> style_;
  std::unique_ptr<TinyDenoiser<Scalar>> denoiser_;
};

}  // namespace acwm

#endif  // ACWM_DENOISER_HPP_
