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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "acwm/world_model.hpp"

using namespace acwm;
namespace fs = std::filesystem;

namespace {

WorldModelConfig small_config() {
  WorldModelConfig c;
  c.net.base_channels = 8;
  c.net.context_dim = 16;
  c.net.delta_tokens = 4;
  c.net.time_dim = 16;
  c.net.time_hidden = 16;
  return c;
}

CameraRig head_rig() {
  CameraRig rig;
  rig.views.push_back(default_rig().views[0]);
  return rig;
}

struct SmallSetup {
  std::vector<Episode> corpus;
  ConditioningContext ctx;
  std::vector<TrainingChunk> chunks;
};

const SmallSetup& setup() {
  static const SmallSetup s = [] {
    SmallSetup out;
    CorpusOptions co;
    co.episodes = 3;
    co.failure_fraction = 0.0;
    out.corpus = generate_corpus(co, head_rig());
    out.ctx.codec = LatentCodec(WorldModelConfig{}.codec_seed);
    out.ctx.stats = compute_latent_stats(out.corpus, out.ctx.codec);
    out.chunks = make_training_chunks(out.corpus, out.ctx, head_rig(), 0, 16);
    return out;
  }();
  return s;
}

}  // namespace

TEST_CASE("preconditioning") {
  const Preconditioning off = preconditioning(0.3, 0.0);
  CHECK(off.shift == 0.0);
  CHECK(off.c_skip == 0.0);
  CHECK(off.c_in == 1.0);
  CHECK(off.c_out == 1.0);
  CHECK(off.c_cond == 0.0);

  // F = 0 predicts the condition frame at every noise level.
  const NoiseSchedule sched = make_linear_schedule(1000, 0.00085, 0.012);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int t : {1, 62, 500, 1000}) {
    const Preconditioning p = preconditioning(sched.alpha_bar(t), 0.5);
    nn::Mat<double> zt(4, 6), c(4, 6);
    for (int i = 0; i < zt.size(); ++i) {
      zt(i) = n(rng);
      c(i) = n(rng);
    }
    const nn::Mat<double> v = p.c_skip * (zt - p.shift * c) - p.c_cond * c;
    const double ab = sched.alpha_bar(t);
    const nn::Mat<double> x0 = std::sqrt(ab) * zt - std::sqrt(1.0 - ab) * v;
    CHECK((x0 - c).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("latent statistics pool one standard deviation") {
  const SmallSetup& s = setup();
  CHECK(s.ctx.stats.stddev.minCoeff() == s.ctx.stats.stddev.maxCoeff());
  CHECK(s.ctx.stats.stddev[0] > 0.0);
  const LatentStats back = LatentStats::from_json(s.ctx.stats.to_json());
  CHECK(back.mean == s.ctx.stats.mean);
  CHECK(back.stddev == s.ctx.stats.stddev);
}

TEST_CASE("corpus") {
  const SmallSetup& s = setup();
  REQUIRE(s.corpus.size() == 3);
  for (const Episode& e : s.corpus) {
    CHECK(e.actions.size() % 16 == 0);
    CHECK(e.frames.size() == e.actions.size() + 1);
    CHECK_FALSE(e.failure);
  }
  std::size_t expected = 0;
  for (const Episode& e : s.corpus) expected += e.actions.size() / 16;
  CHECK(s.chunks.size() == expected);
  CHECK(s.chunks[0].targets.size() == 16);
  CHECK(s.chunks[0].inputs.actions.size() == 16);
  CHECK(s.chunks[0].inputs.segment.size() == 17);

  CorpusOptions co;
  co.episodes = 8;
  co.failure_fraction = 0.25;
  co.seed = 4;
  const std::vector<Episode> mixed = generate_corpus(co, head_rig());
  int failures = 0;
  for (const Episode& e : mixed) {
    if (!e.failure) continue;
    ++failures;
    WorldState w = e.scenario.world;
    bool attached = false;
    for (const ArmFrame& a : e.actions) {
      w = step(w, a.front());
      for (const WorldObject& o : w.objects) attached = attached || o.attached;
    }
    CHECK_FALSE(attached);
  }
  CHECK(failures == 2);
}

TEST_CASE("zero head without preconditioning gives the mean squared target") {
  const SmallSetup& s = setup();
  WorldModelNet<double> net(small_config().net);
  const NoiseSchedule sched = make_linear_schedule(1000, 0.00085, 0.012);
  std::mt19937_64 rng(9);
  const std::vector<TrainingSample> batch = draw_batch(s.chunks, 4, sched, 0.5, 16, rng);
  double expected = 0.0;
  for (const TrainingSample& b : batch) {
    const nn::Mat<double>& z0 = b.chunk->targets[b.frame];
    expected += v_target(z0, b.noise, b.t, sched).squaredNorm() / z0.size() / batch.size();
  }
  CHECK(batch_loss(net, batch, sched, 0.0, false) == doctest::Approx(expected).epsilon(1e-12));
  const std::vector<int> grid = sampling_timesteps(sched.steps(), 16);
  for (const TrainingSample& b : batch) CHECK(std::count(grid.begin(), grid.end(), b.t) == 1);
}

TEST_CASE("overfits a single sample") {
  const SmallSetup& s = setup();
  WorldModelNet<double> net(small_config().net);
  const NoiseSchedule sched = make_linear_schedule(1000, 0.00085, 0.012);
  std::mt19937_64 rng(1);
  const std::vector<TrainingSample> batch = draw_batch(s.chunks, 1, sched, 0.0, 16, rng);
  nn::AdamState<double> state;
  const nn::AdamConfig adam{1e-2, 0.9, 0.999, 1e-8, 0.0};
  const double first = batch_loss(net, batch, sched, 0.5, false);
  double last = first;
  for (int i = 0; i < 200; ++i) last = train_step(net, state, batch, sched, 0.5, adam);
  last = batch_loss(net, batch, sched, 0.5, false);
  MESSAGE("loss " << first << " -> " << last);
  CHECK(last < 0.1 * first);
}

TEST_CASE("checkpoints") {
  const WorldModelConfig cfg = small_config();
  WorldModelNet<double> net(cfg.net, false);
  LatentStats stats;
  stats.mean << 0.1, 0.2, 0.3, 0.4;
  stats.stddev.setConstant(0.7);
  const fs::path dir = fs::temp_directory_path() / "acwm_test_ckpt";
  fs::remove_all(dir);
  save_checkpoint(dir, net, cfg, stats, 42);
  const std::shared_ptr<WorldModel> m = load_checkpoint(dir);
  CHECK(m->config.hash() == cfg.hash());
  CHECK(m->stats.mean == stats.mean);
  for (const auto& p : net.parameters().all())
    CHECK(m->net.parameters().find(p.name)->value == p.value.cast<float>());

  // The float model is what the backend uses.
  WorldModelNet<float> direct(cfg.net, false);
  net.copy_parameters_to(direct);
  for (const auto& p : direct.parameters().all()) CHECK(m->net.parameters().find(p.name)->value == p.value);

  Json manifest = read_json(dir / "manifest.json");
  manifest["config_hash"] = manifest["config_hash"].get<std::uint64_t>() + 1;
  write_json(dir / "manifest.json", manifest);
  CHECK_THROWS_AS(load_checkpoint(dir), IoError);

  save_checkpoint(dir, net, cfg, stats, 42);
  const std::string first_param = read_json(dir / "manifest.json")["parameters"][0]["file"];
  { std::ofstream(dir / first_param, std::ios::binary) << "garbage"; }
  CHECK_THROWS_AS(load_checkpoint(dir), IoError);

  save_checkpoint(dir, net, cfg, stats, 42);
  manifest = read_json(dir / "manifest.json");
  manifest["parameters"].erase(0);
  write_json(dir / "manifest.json", manifest);
  CHECK_THROWS_AS(load_checkpoint(dir), IoError);
  CHECK_THROWS_AS(load_checkpoint(dir / "nowhere"), IoError);
}

TEST_CASE("learned backend") {
  const SmallSetup& s = setup();
  const WorldModelConfig cfg = small_config();
  WorldModelNet<double> net(cfg.net);  // zero head: copies the condition frame
  auto model = WorldModel::from_trained(net, cfg, s.ctx.stats);
  const CameraRig rig = head_rig();
  LearnedBackend a(model, rig, SamplerOptions{4}, 3);
  LearnedBackend b(model, rig, SamplerOptions{4}, 3);
  const Episode& e = s.corpus[0];
  const std::vector<Image> cond = e.frames[0];
  const ArmFrame arms{e.scenario.world.gripper};
  const std::span<const ArmFrame> actions(e.actions.data(), 16);
  const FrameGrid fa = a.generate({cond, arms, nullptr, actions, 0});
  const FrameGrid fb = b.generate({cond, arms, nullptr, actions, 0});
  REQUIRE(fa.size() == 16);
  REQUIRE(fa[0].size() == 1);
  CHECK(fa == fb);
  CHECK(fa[0][0].width() == cond[0].width());
  // Short requests are padded with the last action and trimmed back.
  const FrameGrid partial = a.generate({cond, arms, nullptr, std::span<const ArmFrame>(e.actions.data(), 5), 0});
  CHECK(partial.size() == 5);
  CHECK_THROWS_AS(a.generate({cond, arms, nullptr, std::span<const ArmFrame>(e.actions.data(), 17), 0}),
                  ValidationError);

  const PredictionScore score = score_predictions(a, s.corpus, {{0, 0}, {1, 1}}, 16, 5);
  CHECK(score.frames > 0);
  CHECK(score.model_mae == doctest::Approx(score.baseline_mae).epsilon(1e-4));
}
