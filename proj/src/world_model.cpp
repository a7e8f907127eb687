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

#include "acwm/world_model.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace acwm {
namespace fs = std::filesystem;

// Config and statistics ------------------------------------------------------

Json WorldModelConfig::to_json() const {
  return Json{{"net",
               {{"base_channels", net.base_channels},
                {"context_dim", net.context_dim},
                {"delta_tokens", net.delta_tokens},
                {"arm_count", net.arm_count},
                {"time_dim", net.time_dim},
                {"time_hidden", net.time_hidden},
                {"init_seed", net.init_seed}}},
              {"diffusion_steps", diffusion_steps},
              {"beta_first", beta_first},
              {"beta_last", beta_last},
              {"sigma_data", sigma_data},
              {"action_latent_scale", action_latent_scale},
              {"chunk_size", chunk_size},
              {"codec_seed", codec_seed}};
}

WorldModelConfig WorldModelConfig::from_json(const Json& j) {
  WorldModelConfig c;
  const Json& n = j.at("net");
  c.net.base_channels = n.at("base_channels").get<int>();
  c.net.context_dim = n.at("context_dim").get<int>();
  c.net.delta_tokens = n.at("delta_tokens").get<int>();
  c.net.arm_count = n.at("arm_count").get<int>();
  c.net.time_dim = n.at("time_dim").get<int>();
  c.net.time_hidden = n.at("time_hidden").get<int>();
  c.net.init_seed = n.at("init_seed").get<std::uint64_t>();
  c.diffusion_steps = j.at("diffusion_steps").get<int>();
  c.beta_first = j.at("beta_first").get<double>();
  c.beta_last = j.at("beta_last").get<double>();
  c.sigma_data = j.at("sigma_data").get<double>();
  c.action_latent_scale = j.at("action_latent_scale").get<double>();
  c.chunk_size = j.at("chunk_size").get<int>();
  c.codec_seed = j.at("codec_seed").get<std::uint64_t>();
  return c;
}

std::uint64_t WorldModelConfig::hash() const { return fnv1a(to_json().dump()); }

Json LatentStats::to_json() const {
  return Json{{"mean", {mean[0], mean[1], mean[2], mean[3]}},
              {"std", {stddev[0], stddev[1], stddev[2], stddev[3]}}};
}

LatentStats LatentStats::from_json(const Json& j) {
  LatentStats s;
  for (int c = 0; c < 4; ++c) {
    s.mean[c] = j.at("mean").at(c).get<double>();
    s.stddev[c] = j.at("std").at(c).get<double>();
  }
  require((s.stddev.array() > 0).all(), "latent std must be positive");
  return s;
}

Preconditioning preconditioning(double alpha_bar, double sigma_data) {
  if (sigma_data <= 0.0) return {};
  const double ab = alpha_bar, s2 = sigma_data * sigma_data;
  const double denom = ab * s2 + 1.0 - ab;
  Preconditioning p;
  const double sn = std::sqrt(1.0 - ab);
  p.shift = std::sqrt(ab);
  p.c_skip = std::sqrt(ab) / sn;
  p.c_in = 1.0 / std::sqrt(denom);
  p.c_out = -sigma_data / sn;
  p.c_cond = sn;
  return p;
}

// Conditioning ---------------------------------------------------------------

ChunkInputs make_chunk_inputs(const ConditioningContext& ctx, const CameraView& view,
                              const CameraView& anchor, const Image& condition,
                              const ArmFrame& condition_arms, std::span<const ArmFrame> actions) {
  require(!actions.empty(), "chunk has no actions");
  ChunkInputs in;
  const FeatureMap<double> cond = ctx.codec.encode_image(condition);
  in.height = cond.height;
  in.width = cond.width;
  in.cond = ctx.stats.normalize(cond.data);
  const Eigen::Isometry3d world_from_anchor = anchor.extrinsics.resolve(condition_arms);
  for (const ArmFrame& a : actions) {
    const Eigen::Isometry3d pose = view.extrinsics.resolve(a);
    const Image map = render_action_map(a, view.model, pose, ctx.glyphs);
    in.actions.push_back(ctx.codec.encode_image(map).data * ctx.action_latent_scale);
    in.rays.push_back(ray_channels<double>(
        compute_ray_map(view.model, pose, world_from_anchor, in.height, in.width)));
  }
  in.segment.push_back(condition_arms);
  in.segment.insert(in.segment.end(), actions.begin(), actions.end());
  in.patches = pooled_patches(to_planes<double>(condition));
  return in;
}

// Corpus -------------------------------------------------------------------

Episode run_scripted_episode(const Scenario& scenario, const PolicyNoise& noise, std::uint64_t seed,
                             const CameraRig& rig, int chunk_size) {
  require(chunk_size >= 1, "chunk size must be positive");
  std::mt19937_64 rng(seed);
  const std::vector<ActionState> plan = plan_pick_place(scenario.world, scenario.task, noise, rng);
  Episode ep;
  ep.scenario = scenario;
  ep.failure = noise.empty_grasp;
  for (const ActionState& s : plan) ep.actions.push_back({s});
  while (ep.actions.size() % static_cast<std::size_t>(chunk_size) != 0)
    ep.actions.push_back(ep.actions.back());
  WorldState state = scenario.world;
  ep.frames.push_back(render_views(state, rig));
  FrameGrid rest = simulate(state, ep.actions, rig);
  for (auto& f : rest) ep.frames.push_back(std::move(f));
  return ep;
}

std::vector<Episode> generate_corpus(const CorpusOptions& options, const CameraRig& rig) {
  require(options.episodes >= 1, "corpus needs at least one episode");
  require(options.failure_fraction >= 0.0 && options.failure_fraction <= 1.0,
          "failure fraction outside [0, 1]");
  std::mt19937_64 rng(options.seed);
  std::vector<Episode> out;
  out.reserve(options.episodes);
  const double f = options.failure_fraction;
  for (int i = 0; i < options.episodes; ++i) {
    PolicyNoise noise;
    noise.sigma = options.sigma;
    noise.empty_grasp = std::floor((i + 1) * f) > std::floor(i * f);
    for (int attempt = 0;; ++attempt) {
      const Scenario scenario = random_scenario(rng);
      try {
        out.push_back(run_scripted_episode(scenario, noise, rng(), rig, options.chunk_size));
        break;
      } catch (const PlanningError&) {
        if (attempt >= 100) throw;
      }
    }
  }
  return out;
}

LatentStats compute_latent_stats(const std::vector<Episode>& episodes, const LatentCodec& codec,
                                 int view) {
  Eigen::Vector4d sum = Eigen::Vector4d::Zero(), sq = Eigen::Vector4d::Zero();
  double n = 0.0;
  for (const Episode& ep : episodes)
    for (const auto& frame : ep.frames) {
      const Eigen::MatrixXd z = codec.encode_image(frame.at(view)).data;
      sum += z.rowwise().sum();
      sq += z.array().square().matrix().rowwise().sum();
      n += static_cast<double>(z.cols());
    }
  require(n > 0, "no frames to compute latent statistics from");
  LatentStats s;
  s.mean = sum / n;
  // One shared scale, so squared error in latent space tracks pixel error.
  const double var = (sq / n - s.mean.cwiseAbs2()).cwiseMax(0.0).mean();
  s.stddev.setConstant(std::max(std::sqrt(var), 1e-3));
  return s;
}

std::vector<TrainingChunk> make_training_chunks(const std::vector<Episode>& episodes,
                                                const ConditioningContext& ctx, const CameraRig& rig,
                                                int view, int chunk_size) {
  require(view >= 0 && view < static_cast<int>(rig.size()), "view index out of range");
  std::vector<TrainingChunk> out;
  const CameraView& cam = rig.views[view];
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const Episode& ep = episodes[e];
    const int chunks = static_cast<int>(ep.actions.size()) / chunk_size;
    for (int c = 0; c < chunks; ++c) {
      const int begin = c * chunk_size;
      const ArmFrame cond_arms = c == 0 ? ArmFrame{ep.scenario.world.gripper} : ep.actions[begin - 1];
      TrainingChunk tc;
      tc.inputs = make_chunk_inputs(ctx, cam, rig.views[0], ep.frames[begin][view], cond_arms,
                                    std::span<const ArmFrame>(ep.actions.data() + begin, chunk_size));
      for (int k = 0; k < chunk_size; ++k)
        tc.targets.push_back(ctx.stats.normalize(ctx.codec.encode_image(ep.frames[begin + k + 1][view]).data));
      tc.episode = static_cast<int>(e);
      tc.chunk = c;
      tc.failure = ep.failure;
      out.push_back(std::move(tc));
    }
  }
  return out;
}

// Training -------------------------------------------------------------------

double batch_loss(WorldModelNet<double>& net, std::span<const TrainingSample> batch,
                  const NoiseSchedule& schedule, double sigma_data, bool backward) {
  require(!batch.empty(), "empty batch");
  using Mat = nn::Mat<double>;
  if (backward) net.parameters().zero_grad();
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const TrainingSample& s : batch) {
    const ChunkInputs& in = s.chunk->inputs;
    ResamplerCache<double> rc;
    const Mat delta = encode_delta_actions(net.resampler(), std::span<const ArmFrame>(in.segment), &rc);
    const nn::Vec<double> style = reference_style_token(net.style(), in.patches);
    const Mat tokens = context_tokens(style, delta);

    const Mat& z0 = s.chunk->targets.at(s.frame);
    const Mat zt = q_sample(z0, s.noise, s.t, schedule);
    const Mat v = v_target(z0, s.noise, s.t, schedule);
    const Preconditioning p = preconditioning(schedule.alpha_bar(s.t), sigma_data);
    const Mat c = s.dropped ? Mat::Zero(z0.rows(), z0.cols()) : in.cond;
    const Mat y = zt - p.shift * c;
    const Mat x = assemble_condition<double>(p.c_in * y, in.cond, in.actions.at(s.frame),
                                             in.rays.at(s.frame), s.dropped);

    TinyDenoiser<double>::Tape tape;
    const std::vector<Mat> f = net.denoiser().forward(std::span<const Mat>(&x, 1), in.height,
                                                      in.width, s.t, std::span<const Mat>(&tokens, 1),
                                                      backward ? &tape : nullptr);
    const Mat diff = p.c_skip * y + p.c_out * f[0] - p.c_cond * c - v;
    const double n = static_cast<double>(diff.size());
    loss += scale * diff.squaredNorm() / n;
    if (!backward) continue;
    const Mat d_f = (2.0 * scale * p.c_out / n) * diff;
    const std::vector<Mat> d_tokens = net.denoiser().backward(tape, std::span<const Mat>(&d_f, 1));
    reference_style_token_backward(net.style(), in.patches, nn::Vec<double>(d_tokens[0].col(0)));
    encode_delta_actions_backward(net.resampler(), rc,
                                  Mat(d_tokens[0].rightCols(d_tokens[0].cols() - 1)));
  }
  return loss;
}

double train_step(WorldModelNet<double>& net, nn::AdamState<double>& state,
                  std::span<const TrainingSample> batch, const NoiseSchedule& schedule,
                  double sigma_data, const nn::AdamConfig& adam) {
  const double loss = batch_loss(net, batch, schedule, sigma_data, true);
  const double gnorm = net.parameters().grad_norm();
  if (!std::isfinite(loss) || !std::isfinite(gnorm)) {
    std::string ts;
    for (const TrainingSample& s : batch) ts += " " + std::to_string(s.t);
    throw TrainingError("non-finite loss at step " + std::to_string(state.step + 1) + " (loss " +
                        std::to_string(loss) + ", grad norm " + std::to_string(gnorm) +
                        ", timesteps" + ts + ")");
  }
  nn::adam_update(net.parameters(), state, adam);
  return loss;
}

std::vector<TrainingSample> draw_batch(const std::vector<TrainingChunk>& chunks, int batch,
                                       const NoiseSchedule& schedule, double p_drop,
                                       int timestep_grid, std::mt19937_64& rng) {
  require(!chunks.empty() && batch >= 1, "need chunks and a positive batch size");
  std::uniform_int_distribution<std::size_t> pick(0, chunks.size() - 1);
  const std::vector<int> grid =
      timestep_grid > 0 ? sampling_timesteps(schedule.steps(), timestep_grid) : std::vector<int>{};
  std::uniform_int_distribution<int> pick_t(1, schedule.steps());
  std::uniform_int_distribution<std::size_t> pick_grid(0, grid.empty() ? 0 : grid.size() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<TrainingSample> out(batch);
  for (TrainingSample& s : out) {
    s.chunk = &chunks[pick(rng)];
    s.frame = std::uniform_int_distribution<int>(0, static_cast<int>(s.chunk->targets.size()) - 1)(rng);
    s.t = grid.empty() ? pick_t(rng) : grid[pick_grid(rng)];
    const nn::Mat<double>& z0 = s.chunk->targets[s.frame];
    s.noise.resize(z0.rows(), z0.cols());
    for (Eigen::Index i = 0; i < s.noise.size(); ++i) s.noise.data()[i] = normal(rng);
  }
  apply_condition_dropout(std::span<TrainingSample>(out), p_drop, rng);
  return out;
}

TrainReport train(WorldModelNet<double>& net, const std::vector<TrainingChunk>& chunks,
                  const WorldModelConfig& config, const TrainConfig& tc) {
  require(tc.steps >= 0 && tc.batch >= 1, "bad training length or batch size");
  const auto start = std::chrono::steady_clock::now();
  const NoiseSchedule schedule =
      make_linear_schedule(config.diffusion_steps, config.beta_first, config.beta_last);
  std::mt19937_64 rng(tc.seed);
  nn::AdamState<double> state;
  TrainReport report;
  double window = 0.0;
  for (int step = 1; step <= tc.steps; ++step) {
    const std::vector<TrainingSample> batch = draw_batch(chunks, tc.batch, schedule, tc.p_drop, tc.timestep_grid, rng);
    nn::AdamConfig adam = tc.adam;
    if (tc.cosine_decay)
      adam.learning_rate *= 0.5 * (1.0 + std::cos(std::numbers::pi * (step - 1) / tc.steps));
    const double loss = train_step(net, state, batch, schedule, config.sigma_data, adam);
    report.losses.push_back(loss);
    window += loss;
    if (tc.log_every > 0 && step % tc.log_every == 0) {
      char line[96];
      std::snprintf(line, sizeof(line), "step %d  loss %.5f", step, window / tc.log_every);
      log(LogLevel::kInfo, line);
      window = 0.0;
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainedModel train_on_corpus(const std::vector<Episode>& corpus, const CameraRig& rig,
                             const WorldModelConfig& config, const TrainConfig& train_config) {
  TrainedModel out;
  ConditioningContext ctx{LatentCodec(config.codec_seed), GlyphStyle{}, {}, config.action_latent_scale};
  ctx.stats = compute_latent_stats(corpus, ctx.codec);
  const std::vector<TrainingChunk> chunks = make_training_chunks(corpus, ctx, rig, 0, config.chunk_size);
  out.stats = ctx.stats;
  out.net = std::make_unique<WorldModelNet<double>>(config.net);
  out.report = train(*out.net, chunks, config, train_config);
  return out;
}

// Inference ------------------------------------------------------------------

WorldModel::WorldModel(const WorldModelConfig& cfg, const LatentStats& latent_stats)
    : config(cfg),
      stats(latent_stats),
      net(cfg.net),
      schedule(make_linear_schedule(cfg.diffusion_steps, cfg.beta_first, cfg.beta_last)),
      context{LatentCodec(cfg.codec_seed), GlyphStyle{}, latent_stats, cfg.action_latent_scale} {}

std::shared_ptr<WorldModel> WorldModel::from_trained(const WorldModelNet<double>& trained,
                                                     const WorldModelConfig& cfg,
                                                     const LatentStats& latent_stats) {
  auto m = std::make_shared<WorldModel>(cfg, latent_stats);
  trained.copy_parameters_to(m->net);
  return m;
}

LearnedBackend::LearnedBackend(std::shared_ptr<const WorldModel> model, CameraRig rig,
                               SamplerOptions sampler, std::uint64_t seed)
    : model_(std::move(model)), rig_(std::move(rig)), sampler_(sampler), seed_(seed) {
  require(model_ != nullptr, "learned backend needs a model");
  require(rig_.size() >= 1, "learned backend needs at least one view");
}

ChunkLatents<float> LearnedBackend::sample_latents(const std::vector<Image>& condition,
                                                   const ArmFrame& condition_arms,
                                                   std::span<const ArmFrame> actions,
                                                   std::uint64_t seed) const {
  require(condition.size() == rig_.size(), "condition frames do not match the rig");
  const WorldModel& m = *model_;
  ChunkConditions<float> cond;
  cond.views = static_cast<int>(rig_.size());
  cond.frames = static_cast<int>(actions.size());
  cond.items.resize(static_cast<std::size_t>(cond.views) * cond.frames);
  for (int v = 0; v < cond.views; ++v) {
    const ChunkInputs in = make_chunk_inputs(m.context, rig_.views[v], rig_.views[0], condition[v],
                                             condition_arms, actions);
    cond.height = in.height;
    cond.width = in.width;
    const nn::Mat<float> c = in.cond.cast<float>();
    for (int k = 0; k < cond.frames; ++k)
      cond.at(k, v) = {c, in.actions[k].cast<float>(), in.rays[k].cast<float>()};
    const nn::Mat<float> delta =
        encode_delta_actions(m.net.resampler(), std::span<const ArmFrame>(in.segment));
    const nn::Mat<float> patches = in.patches.cast<float>();
    cond.tokens.push_back(context_tokens(reference_style_token(m.net.style(), patches), delta));
  }
  const ConditionedDenoiser<float> denoiser(m.net.denoiser(), m.schedule, m.config.sigma_data);
  std::mt19937_64 rng(seed);
  return sample_chunk(denoiser, cond, m.schedule, sampler_, rng);
}

FrameGrid LearnedBackend::generate(const GenerationRequest& request) {
  const int K = model_->config.chunk_size;
  require(!request.actions.empty(), "generation request has no actions");
  require(static_cast<int>(request.actions.size()) <= K, "more actions than the chunk size");
  std::vector<ArmFrame> actions(request.actions.begin(), request.actions.end());
  while (static_cast<int>(actions.size()) < K) actions.push_back(actions.back());

  const bool from_memory = request.memory != nullptr && !request.memory->empty();
  const std::vector<Image>& condition = from_memory ? request.memory->latest().views : request.condition;
  const ArmFrame& arms = from_memory ? request.memory->latest().arms : request.condition_arms;

  std::uint64_t seed = fnv1a_pod(request.chunk_index, seed_);
  for (const Image& img : condition) seed = fnv1a_pod(img.hash(), seed);
  const ChunkLatents<float> z = sample_latents(condition, arms, actions, seed);

  const int V = static_cast<int>(rig_.size());
  const int h = condition[0].height() / LatentCodec::kFactor;
  const int w = condition[0].width() / LatentCodec::kFactor;
  FrameGrid out(request.actions.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    for (int v = 0; v < V; ++v) {
      const FeatureMap<double> latent(model_->stats.denormalize(nn::Mat<double>(z[k * V + v].cast<double>())), h, w);
      out[k].push_back(model_->context.codec.decode_image(latent));
    }
  return out;
}

PredictionScore score_predictions(const LearnedBackend& backend, const std::vector<Episode>& episodes,
                                  const std::vector<std::pair<int, int>>& chunks, int chunk_size,
                                  std::uint64_t seed, int view) {
  const LatentCodec& codec = backend.model().context.codec;
  const LatentStats& stats = backend.model().stats;
  const int V = static_cast<int>(backend.rig().size());
  require(view >= 0 && view < V, "view index out of range");
  auto reconstruct = [&](const Image& img) { return codec.decode(codec.encode_image(img)).data; };
  PredictionScore score;
  double model_sum = 0.0, base_sum = 0.0;
  for (const auto& [e, c] : chunks) {
    const Episode& ep = episodes.at(e);
    const int begin = c * chunk_size;
    require(begin + chunk_size < static_cast<int>(ep.frames.size()), "chunk out of range");
    const ArmFrame cond_arms = c == 0 ? ArmFrame{ep.scenario.world.gripper} : ep.actions[begin - 1];
    const ChunkLatents<float> z = backend.sample_latents(
        ep.frames[begin], cond_arms,
        std::span<const ArmFrame>(ep.actions.data() + begin, chunk_size),
        fnv1a_pod(static_cast<std::uint64_t>(e) * 1000003u + c, seed));
    const Eigen::MatrixXd base = reconstruct(ep.frames[begin][view]);
    const int h = ep.frames[begin][view].height() / LatentCodec::kFactor;
    const int w = ep.frames[begin][view].width() / LatentCodec::kFactor;
    for (int k = 0; k < chunk_size; ++k) {
      const Eigen::MatrixXd truth = reconstruct(ep.frames[begin + k + 1][view]);
      if ((truth - base).cwiseAbs().maxCoeff() == 0.0) continue;
      const FeatureMap<double> latent(stats.denormalize(nn::Mat<double>(z[k * V + view].cast<double>())), h, w);
      const Eigen::MatrixXd pred = codec.decode(latent).data;
      model_sum += (pred - truth).cwiseAbs().mean();
      base_sum += (base - truth).cwiseAbs().mean();
      ++score.frames;
    }
  }
  if (score.frames > 0) {
    score.model_mae = model_sum / score.frames;
    score.baseline_mae = base_sum / score.frames;
  }
  return score;
}

// Checkpoints ----------------------------------------------------------------

void save_checkpoint(const fs::path& dir, const WorldModelNet<double>& net,
                     const WorldModelConfig& config, const LatentStats& stats, long step) {
  Json params = Json::array();
  for (const auto& p : net.parameters().all()) {
    const std::string file = "params/" + p.name + ".wmt";
    write_tensor(dir / file, tensor_from_matrix(p.value));
    params.push_back({{"name", p.name}, {"file", file}, {"shape", {p.value.rows(), p.value.cols()}}});
  }
  const Json manifest{{"format", "acwm-checkpoint-1"},
                      {"config", config.to_json()},
                      {"config_hash", config.hash()},
                      {"step", step},
                      {"latent_stats", stats.to_json()},
                      {"parameters", params}};
  write_json(dir / "manifest.json", manifest);
}

std::shared_ptr<WorldModel> load_checkpoint(const fs::path& dir) {
  const Json manifest = read_json(dir / "manifest.json");
  if (manifest.value("format", "") != "acwm-checkpoint-1")
    throw IoError(dir / "manifest.json", "not a checkpoint manifest");
  const WorldModelConfig config = WorldModelConfig::from_json(manifest.at("config"));
  if (manifest.at("config_hash").get<std::uint64_t>() != config.hash())
    throw IoError(dir / "manifest.json", "config hash does not match the stored config");
  auto model = std::make_shared<WorldModel>(config, LatentStats::from_json(manifest.at("latent_stats")));
  std::size_t loaded = 0;
  for (const Json& entry : manifest.at("parameters")) {
    const std::string name = entry.at("name").get<std::string>();
    auto* p = model->net.parameters().find(name);
    if (p == nullptr) throw IoError(dir, "checkpoint has unknown parameter " + name);
    const Eigen::MatrixXd m = matrix_from_tensor(read_tensor(dir / entry.at("file").get<std::string>()));
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
      throw IoError(dir, "shape mismatch for parameter " + name);
    p->value = m.cast<float>();
    ++loaded;
  }
  if (loaded != model->net.parameters().all().size())
    throw IoError(dir, "checkpoint is missing parameters");
  return model;
}

}  // namespace acwm
