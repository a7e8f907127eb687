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

// Small dense layers with explicit backward passes.
//
// Every activation is a matrix with one column per spatial position (or
// token) and one row per channel. Forward functions fill a cache that the
// matching backward consumes; backward accumulates parameter gradients into
// Parameter::grad and returns the gradient with respect to its input.

#ifndef ACWM_NN_HPP_
#define ACWM_NN_HPP_

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "acwm/common.hpp"

namespace acwm::nn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct Parameter {
  std::string name;
  Mat<Scalar> value;
  Mat<Scalar> grad;
};

// Owns every trainable tensor of a model. Element addresses are stable, so
// layers keep raw pointers into the store.
template <typename Scalar>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter<Scalar>* add(std::string name, int rows, int cols) {
    for (const auto& p : params_)
      if (p.name == name) throw Error("duplicate parameter name " + name);
    params_.push_back({std::move(name), Mat<Scalar>::Zero(rows, cols), Mat<Scalar>::Zero(rows, cols)});
    return &params_.back();
  }

  Parameter<Scalar>* find(std::string_view name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  std::deque<Parameter<Scalar>>& all() { return params_; }
  const std::deque<Parameter<Scalar>>& all() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  double grad_norm() const {
    double s = 0.0;
    for (const auto& p : params_) s += static_cast<double>(p.grad.squaredNorm());
    return std::sqrt(s);
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

 private:
  std::deque<Parameter<Scalar>> params_;
};

template <typename Scalar>
void init_normal(Parameter<Scalar>* p, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = Scalar(normal(rng));
}

// Activations ---------------------------------------------------------------

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Derived>
auto silu(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([](S v) { return v * sigmoid(v); });
}

// d silu / dx evaluated at the pre-activation x, times upstream gradient.
template <typename Scalar>
Mat<Scalar> silu_backward(const Mat<Scalar>& pre, const Mat<Scalar>& dy) {
  return dy.binaryExpr(pre, [](Scalar g, Scalar x) {
    const Scalar s = sigmoid(x);
    return g * s * (Scalar(1) + x * (Scalar(1) - s));
  });
}

// Column-wise softmax (each column is a distribution over rows).
template <typename Scalar>
Mat<Scalar> softmax_columns(const Mat<Scalar>& s) {
  Mat<Scalar> out(s.rows(), s.cols());
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    const Scalar m = s.col(j).maxCoeff();
    out.col(j) = (s.col(j).array() - m).exp();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

template <typename Scalar>
Mat<Scalar> softmax_columns_backward(const Mat<Scalar>& a, const Mat<Scalar>& da) {
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dots = (a.array() * da.array()).colwise().sum();
  return a.array() * (da.rowwise() - dots).array();
}

// Linear --------------------------------------------------------------------

template <typename Scalar>
struct Linear {
  Parameter<Scalar>* weight = nullptr;  // out x in
  Parameter<Scalar>* bias = nullptr;    // out x 1

  static Linear create(ParameterStore<Scalar>& store, const std::string& name, int in, int out) {
    return {store.add(name + ".weight", out, in), store.add(name + ".bias", out, 1)};
  }
  void init(std::mt19937_64& rng) const {
    init_normal(weight, 1.0 / std::sqrt(static_cast<double>(weight->value.cols())), rng);
  }

  Mat<Scalar> forward(const Mat<Scalar>& x) const {
    Mat<Scalar> y = weight->value * x;
    y.colwise() += bias->value.col(0);
    return y;
  }
  Mat<Scalar> backward(const Mat<Scalar>& x, const Mat<Scalar>& dy) const {
    weight->grad.noalias() += dy * x.transpose();
    bias->grad.col(0) += dy.rowwise().sum();
    return weight->value.transpose() * dy;
  }
};

// 3x3 convolution, padding 1 -------------------------------------------------

template <typename Scalar>
struct ConvCache {
  Mat<Scalar> cols;  // (9 * in) x (out_h * out_w)
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
};

template <typename Scalar>
struct Conv3x3 {
  Parameter<Scalar>* weight = nullptr;  // out x (in * 9), column = c * 9 + ky * 3 + kx
  Parameter<Scalar>* bias = nullptr;
  int in = 0, out = 0, stride = 1;

  static Conv3x3 create(ParameterStore<Scalar>& store, const std::string& name, int in, int out,
                        int stride = 1) {
    return {store.add(name + ".weight", out, in * 9), store.add(name + ".bias", out, 1), in, out,
            stride};
  }
  void init(std::mt19937_64& rng) const {
    init_normal(weight, 1.0 / std::sqrt(9.0 * in), rng);
  }

  static int out_size(int n, int stride) { return (n - 1) / stride + 1; }

  Mat<Scalar> forward(const Mat<Scalar>& x, int h, int w, ConvCache<Scalar>& cache) const {
    cache.in_h = h;
    cache.in_w = w;
    cache.out_h = out_size(h, stride);
    cache.out_w = out_size(w, stride);
    const int n_out = cache.out_h * cache.out_w;
    cache.cols.setZero(9 * in, n_out);
    for (int oy = 0; oy < cache.out_h; ++oy) {
      for (int ox = 0; ox < cache.out_w; ++ox) {
        const int col = oy * cache.out_w + ox;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride + kx - 1;
            if (ix < 0 || ix >= w) continue;
            const int src = iy * w + ix;
            for (int c = 0; c < in; ++c) cache.cols(c * 9 + ky * 3 + kx, col) = x(c, src);
          }
        }
      }
    }
    Mat<Scalar> y = weight->value * cache.cols;
    y.colwise() += bias->value.col(0);
    return y;
  }

  Mat<Scalar> backward(const ConvCache<Scalar>& cache, const Mat<Scalar>& dy) const {
    weight->grad.noalias() += dy * cache.cols.transpose();
    bias->grad.col(0) += dy.rowwise().sum();
    const Mat<Scalar> dcols = weight->value.transpose() * dy;
    Mat<Scalar> dx = Mat<Scalar>::Zero(in, cache.in_h * cache.in_w);
    for (int oy = 0; oy < cache.out_h; ++oy) {
      for (int ox = 0; ox < cache.out_w; ++ox) {
        const int col = oy * cache.out_w + ox;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= cache.in_h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride + kx - 1;
            if (ix < 0 || ix >= cache.in_w) continue;
            const int dst = iy * cache.in_w + ix;
            for (int c = 0; c < in; ++c) dx(c, dst) += dcols(c * 9 + ky * 3 + kx, col);
          }
        }
      }
    }
    return dx;
  }
};

// Nearest-neighbour 2x upsampling cropped to (out_h, out_w).
template <typename Scalar>
Mat<Scalar> upsample2x(const Mat<Scalar>& x, int h, int w, int out_h, int out_w) {
  require(out_h <= 2 * h && out_w <= 2 * w, "upsample target too large");
  Mat<Scalar> y(x.rows(), out_h * out_w);
  for (int r = 0; r < out_h; ++r)
    for (int c = 0; c < out_w; ++c) y.col(r * out_w + c) = x.col((r / 2) * w + c / 2);
  return y;
}

template <typename Scalar>
Mat<Scalar> upsample2x_backward(const Mat<Scalar>& dy, int h, int w, int out_h, int out_w) {
  Mat<Scalar> dx = Mat<Scalar>::Zero(dy.rows(), h * w);
  for (int r = 0; r < out_h; ++r)
    for (int c = 0; c < out_w; ++c) dx.col((r / 2) * w + c / 2) += dy.col(r * out_w + c);
  return dx;
}

template <typename Scalar>
Mat<Scalar> vstack(const Mat<Scalar>& a, const Mat<Scalar>& b) {
  Mat<Scalar> out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

// Single-head residual cross-attention ---------------------------------------
//
//   y = x + Wo * (V * softmax(K^T Q / sqrt(d)))
//   Q = Wq x,  K = Wk ctx,  V = Wv ctx

template <typename Scalar>
struct AttentionCache {
  Mat<Scalar> x, ctx, q, k, v, a, o;
};

template <typename Scalar>
struct CrossAttention {
  Parameter<Scalar>* wq = nullptr;
  Parameter<Scalar>* wk = nullptr;
  Parameter<Scalar>* wv = nullptr;
  Parameter<Scalar>* wo = nullptr;
  int head_dim = 0;

  static CrossAttention create(ParameterStore<Scalar>& store, const std::string& name, int dim,
                               int ctx_dim, int head_dim) {
    return {store.add(name + ".wq", head_dim, dim), store.add(name + ".wk", head_dim, ctx_dim),
            store.add(name + ".wv", head_dim, ctx_dim), store.add(name + ".wo", dim, head_dim),
            head_dim};
  }
  void init(std::mt19937_64& rng, double out_gain = 1.0) const {
    init_normal(wq, 1.0 / std::sqrt(double(wq->value.cols())), rng);
    init_normal(wk, 1.0 / std::sqrt(double(wk->value.cols())), rng);
    init_normal(wv, 1.0 / std::sqrt(double(wv->value.cols())), rng);
    init_normal(wo, out_gain / std::sqrt(double(wo->value.cols())), rng);
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, const Mat<Scalar>& ctx, AttentionCache<Scalar>& c) const {
    const Scalar inv_sqrt = Scalar(1) / std::sqrt(Scalar(head_dim));
    c.x = x;
    c.ctx = ctx;
    c.q = wq->value * x;
    c.k = wk->value * ctx;
    c.v = wv->value * ctx;
    c.a = softmax_columns<Scalar>((c.k.transpose() * c.q) * inv_sqrt);
    c.o = c.v * c.a;
    return x + wo->value * c.o;
  }

  // Returns {dx, dctx}.
  std::pair<Mat<Scalar>, Mat<Scalar>> backward(const AttentionCache<Scalar>& c,
                                               const Mat<Scalar>& dy) const {
    const Scalar inv_sqrt = Scalar(1) / std::sqrt(Scalar(head_dim));
    wo->grad.noalias() += dy * c.o.transpose();
    const Mat<Scalar> d_o = wo->value.transpose() * dy;
    const Mat<Scalar> d_v = d_o * c.a.transpose();
    const Mat<Scalar> d_a = c.v.transpose() * d_o;
    const Mat<Scalar> d_s = softmax_columns_backward<Scalar>(c.a, d_a) * inv_sqrt;
    const Mat<Scalar> d_q = c.k * d_s;
    const Mat<Scalar> d_k = c.q * d_s.transpose();
    wq->grad.noalias() += d_q * c.x.transpose();
    wk->grad.noalias() += d_k * c.ctx.transpose();
    wv->grad.noalias() += d_v * c.ctx.transpose();
    Mat<Scalar> dx = dy + wq->value.transpose() * d_q;
    Mat<Scalar> dctx = wk->value.transpose() * d_k + wv->value.transpose() * d_v;
    return {std::move(dx), std::move(dctx)};
  }
};

// Sinusoidal embedding of an integer timestep.
template <typename Scalar>
Vec<Scalar> timestep_embedding(int t, int dim, double max_period = 10000.0) {
  Vec<Scalar> e(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(max_period) * i / half);
    e(i) = Scalar(std::cos(t * freq));
    e(half + i) = Scalar(std::sin(t * freq));
  }
  if (dim % 2 == 1) e(dim - 1) = Scalar(0);
  return e;
}

// Adam with global-norm clipping ---------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.5;  // <= 0 disables clipping
};

template <typename Scalar>
struct AdamState {
  std::vector<Mat<Scalar>> m, v;
  long step = 0;
};

// Returns the pre-clip gradient norm.
template <typename Scalar>
double adam_update(ParameterStore<Scalar>& store, AdamState<Scalar>& state, const AdamConfig& cfg) {
  auto& params = store.all();
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
      state.m.push_back(Mat<Scalar>::Zero(p.value.rows(), p.value.cols()));
      state.v.push_back(Mat<Scalar>::Zero(p.value.rows(), p.value.cols()));
    }
  }
  const double norm = store.grad_norm();
  const double clip = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  const Scalar b1 = Scalar(cfg.beta1), b2 = Scalar(cfg.beta2);
  const Scalar step_size = Scalar(cfg.learning_rate / bc1);
  const Scalar inv_bc2 = Scalar(1.0 / bc2);
  const Scalar eps = Scalar(cfg.epsilon);
  std::size_t i = 0;
  for (auto& p : params) {
    const Mat<Scalar> g = p.grad * Scalar(clip);
    state.m[i] = b1 * state.m[i] + (Scalar(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (Scalar(1) - b2) * g.cwiseProduct(g);
    p.value.array() -= step_size * state.m[i].array() /
                       ((state.v[i].array() * inv_bc2).sqrt() + eps);
    ++i;
  }
  return norm;
}

}  // namespace acwm::nn

#endif  // ACWM_NN_HPP_
