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

// The learned world model end to end: conditioning of a chunk from frames
// and actions, the residual preconditioning around TinyDenoiser, corpus
// generation from the synthetic world, training, and the learned backend.
//
// Residual parameterization. With c the condition latent (zero when the
// condition is dropped) the network sees y = z_t - sqrt(abar) c, which is a
// forward-process sample of r0 = z0 - c, scaled to unit variance by c_in for
// residuals of standard deviation sigma_data. Its output F estimates
// r0 / sigma_data, and the returned v is the v of z0 implied by that
// estimate:
//
//   v = (sqrt(abar) y - sigma_data F) / sqrt(1 - abar) - sqrt(1 - abar) c
//
// F = 0 therefore samples the condition frame exactly. sigma_data <= 0
// disables all of this (v = F).

#ifndef ACWM_WORLD_MODEL_HPP_
#define ACWM_WORLD_MODEL_HPP_

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "acwm/action_map.hpp"
#include "acwm/backend.hpp"
#include "acwm/conditioning.hpp"
#include "acwm/denoiser.hpp"
#include "acwm/diffusion.hpp"
#include "acwm/io.hpp"
#include "acwm/latent_codec.hpp"
#include "acwm/world.hpp"

namespace acwm {

// Everything needed to rebuild the model besides its weights.
struct WorldModelConfig {
  ModelConfig net;
  int diffusion_steps = 1000;
  double beta_first = 0.00085;
  double beta_last = 0.0120;
  double sigma_data = 0.5;
  double action_latent_scale = 0.25;
  int chunk_size = 16;
  std::uint64_t codec_seed = 0x5eed0c0decULL;

  std::uint64_t hash() const;
  Json to_json() const;
  static WorldModelConfig from_json(const Json& j);
};

struct LatentStats {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Vector4d stddev = Eigen::Vector4d::Ones();

  template <typename Scalar>
  nn::Mat<Scalar> normalize(const nn::Mat<Scalar>& z) const {
    return ((z.colwise() - mean.cast<Scalar>()).array().colwise() / stddev.cast<Scalar>().array()).matrix();
  }
  template <typename Scalar>
  nn::Mat<Scalar> denormalize(const nn::Mat<Scalar>& z) const {
    return ((z.array().colwise() * stddev.cast<Scalar>().array()).matrix().colwise() + mean.cast<Scalar>());
  }
  Json to_json() const;
  static LatentStats from_json(const Json& j);
};

struct Preconditioning {
  // v = c_skip y + c_out F - c_cond c with y = z_t - shift c; network input c_in y.
  double shift = 0.0;
  double c_skip = 0.0;
  double c_in = 1.0;
  double c_out = 1.0;
  double c_cond = 0.0;
};

Preconditioning preconditioning(double alpha_bar, double sigma_data);

// TinyDenoiser wrapped in the residual preconditioning; this is what the
// sampler talks to.
template <typename Scalar>
class ConditionedDenoiser : public DenoiserInterface<Scalar> {
 public:
  ConditionedDenoiser(const TinyDenoiser<Scalar>& net, const NoiseSchedule& schedule, double sigma_data)
      : net_(net), schedule_(schedule), sigma_data_(sigma_data) {}

  std::vector<nn::Mat<Scalar>> predict_v(std::span<const nn::Mat<Scalar>> inputs, int height, int width,
                                         int t, std::span<const nn::Mat<Scalar>> tokens) const override {
    const Preconditioning p = preconditioning(schedule_.alpha_bar(t), sigma_data_);
    std::vector<nn::Mat<Scalar>> x(inputs.begin(), inputs.end()), y(inputs.size());
    for (std::size_t v = 0; v < x.size(); ++v) {
      y[v] = inputs[v].middleRows(kNoisyOffset, 4) - Scalar(p.shift) * inputs[v].middleRows(kCondOffset, 4);
      x[v].middleRows(kNoisyOffset, 4) = Scalar(p.c_in) * y[v];
    }
    std::vector<nn::Mat<Scalar>> f = net_.forward(x, height, width, t, tokens, nullptr);
    for (std::size_t v = 0; v < f.size(); ++v)
      f[v] = Scalar(p.c_skip) * y[v] + Scalar(p.c_out) * f[v] -
             Scalar(p.c_cond) * inputs[v].middleRows(kCondOffset, 4);
    return f;
  }

 private:
  const TinyDenoiser<Scalar>& net_;
  const NoiseSchedule& schedule_;
  double sigma_data_;
};

// Conditioning of one view over one chunk, in double precision.
struct ChunkInputs {
  nn::Mat<double> cond;                  // normalized condition latent
  std::vector<nn::Mat<double>> actions;  // per frame, scaled action-map latent
  std::vector<nn::Mat<double>> rays;     // per frame, 6 channels
  std::vector<ArmFrame> segment;         // condition arms then the K actions
  nn::Mat<double> patches;               // pooled style patches of the condition frame
  int height = 0;
  int width = 0;
};

// Shared fixed parts: codec, glyph style, latent statistics.
struct ConditioningContext {
  LatentCodec codec;
  GlyphStyle glyphs;
  LatentStats stats;
  double action_latent_scale = 0.25;
};

// The ray anchor is `anchor` (the head view) posed at the condition frame.
ChunkInputs make_chunk_inputs(const ConditioningContext& ctx, const CameraView& view,
                              const CameraView& anchor, const Image& condition,
                              const ArmFrame& condition_arms, std::span<const ArmFrame> actions);

// Corpus ------------------------------------------------------------------------

struct Episode {
  Scenario scenario;
  std::vector<ArmFrame> actions;  // padded to a whole number of chunks
  FrameGrid frames;               // frames[0] initial, frames[i + 1] after actions[i]
  bool failure = false;           // empty-grasp probe
};

struct CorpusOptions {
  int episodes = 400;
  double failure_fraction = 0.25;
  double sigma = 0.003;
  std::uint64_t seed = 11;
  int chunk_size = 16;
};

Episode run_scripted_episode(const Scenario& scenario, const PolicyNoise& noise, std::uint64_t seed,
                             const CameraRig& rig, int chunk_size);
// Random layouts; episode i is an empty-grasp failure whenever
// floor((i + 1) f) > floor(i f), so the failure share is at least f rounded
// down over any prefix.
std::vector<Episode> generate_corpus(const CorpusOptions& options, const CameraRig& rig);

// Per-channel means and one pooled standard deviation.
LatentStats compute_latent_stats(const std::vector<Episode>& episodes, const LatentCodec& codec,
                                 int view = 0);

struct TrainingChunk {
  ChunkInputs inputs;
  std::vector<nn::Mat<double>> targets;  // normalized latents of the K frames
  int episode = 0;
  int chunk = 0;
  bool failure = false;
};

std::vector<TrainingChunk> make_training_chunks(const std::vector<Episode>& episodes,
                                                const ConditioningContext& ctx, const CameraRig& rig,
                                                int view, int chunk_size);

// Training ---------------------------------------------------------------------------

class TrainingError : public Error {
 public:
  using Error::Error;
};

struct TrainingSample {
  const TrainingChunk* chunk = nullptr;
  int frame = 0;
  int t = 1;
  nn::Mat<double> noise;
  bool dropped = false;
};

struct TrainConfig {
  int steps = 14000;
  int batch = 16;
  nn::AdamConfig adam{3e-3, 0.9, 0.999, 1e-8, 0.5};
  double p_drop = 0.1;
  // Timesteps are drawn from the sampler's grid for this many steps; 0 draws
  // uniformly from [1, T].
  int timestep_grid = 16;
  bool cosine_decay = true;  // learning rate to zero over `steps`
  std::uint64_t seed = 5;
  int log_every = 250;
};

// Mean over the batch of the per-element squared v error. Accumulates
// parameter gradients (after zeroing) when `backward` is set.
double batch_loss(WorldModelNet<double>& net, std::span<const TrainingSample> batch,
                  const NoiseSchedule& schedule, double sigma_data, bool backward);

// One optimizer step: loss, backward, global clip, Adam. Throws
// TrainingError on a non-finite loss.
double train_step(WorldModelNet<double>& net, nn::AdamState<double>& state,
                  std::span<const TrainingSample> batch, const NoiseSchedule& schedule,
                  double sigma_data, const nn::AdamConfig& adam);

std::vector<TrainingSample> draw_batch(const std::vector<TrainingChunk>& chunks, int batch,
                                       const NoiseSchedule& schedule, double p_drop,
                                       int timestep_grid, std::mt19937_64& rng);

struct TrainReport {
  std::vector<double> losses;  // every step
  double seconds = 0.0;
};

TrainReport train(WorldModelNet<double>& net, const std::vector<TrainingChunk>& chunks,
                  const WorldModelConfig& config, const TrainConfig& train_config);

struct TrainedModel {
  std::unique_ptr<WorldModelNet<double>> net;
  LatentStats stats;
  TrainReport report;
};

// Statistics, training chunks of the first rig view, a fresh net, training.
TrainedModel train_on_corpus(const std::vector<Episode>& corpus, const CameraRig& rig,
                             const WorldModelConfig& config, const TrainConfig& train_config);

// Inference ----------------------------------------------------------------------------

struct WorldModel {
  WorldModelConfig config;
  LatentStats stats;
  WorldModelNet<float> net;
  NoiseSchedule schedule;
  ConditioningContext context;

  WorldModel(const WorldModelConfig& cfg, const LatentStats& latent_stats);
  static std::shared_ptr<WorldModel> from_trained(const WorldModelNet<double>& trained,
                                                  const WorldModelConfig& cfg,
                                                  const LatentStats& latent_stats);
};

// Generates with the diffusion model. The condition latent is the most
// recent memory frame when memory is present, else the request's condition
// frame; the ray anchor is the first rig view at the condition frame.
class LearnedBackend : public WorldModelBackend {
 public:
  LearnedBackend(std::shared_ptr<const WorldModel> model, CameraRig rig, SamplerOptions sampler = {},
                 std::uint64_t seed = 0);

  std::string id() const override { return "learned"; }
  const CameraRig& rig() const override { return rig_; }
  FrameGrid generate(const GenerationRequest& request) override;
  const WorldModel& model() const { return *model_; }

  // Latent-space generation for one chunk; exposed for evaluation.
  ChunkLatents<float> sample_latents(const std::vector<Image>& condition, const ArmFrame& condition_arms,
                                     std::span<const ArmFrame> actions, std::uint64_t seed) const;

 private:
  std::shared_ptr<const WorldModel> model_;
  CameraRig rig_;
  SamplerOptions sampler_;
  std::uint64_t seed_;
};

// Per-pixel MAE in [0, 1] units between decoded latents: the codec
// reconstruction of the truth is the reference for both the model and the
// copy-the-condition-frame baseline.
struct PredictionScore {
  double model_mae = 0.0;
  double baseline_mae = 0.0;
  int frames = 0;
};

// Scores every frame of every listed chunk whose codec reconstruction
// differs from the condition frame's ("motion frames"). chunks: (episode,
// chunk) pairs; view: rig view index.
PredictionScore score_predictions(const LearnedBackend& backend, const std::vector<Episode>& episodes,
                                  const std::vector<std::pair<int, int>>& chunks, int chunk_size,
                                  std::uint64_t seed, int view = 0);

// Checkpoints -----------------------------------------------------------------------------

// <dir>/manifest.json plus one WMT1 f32 tensor per parameter.
void save_checkpoint(const std::filesystem::path& dir, const WorldModelNet<double>& net,
                     const WorldModelConfig& config, const LatentStats& stats, long step);
std::shared_ptr<WorldModel> load_checkpoint(const std::filesystem::path& dir);

}  // namespace acwm

#endif  // ACWM_WORLD_MODEL_HPP_
