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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//
//   acceptance [--work DIR] [--only name,name,...]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "acwm/eval.hpp"
#include "acwm/geometry.hpp"
#include "acwm/trajectory.hpp"
#include "acwm/world_model.hpp"
#include "support/gradcheck.hpp"

using namespace acwm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Clock {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

CameraRig head_rig() {
  CameraRig rig;
  rig.views.push_back(default_rig().at("head"));
  return rig;
}

// Criteria --------------------------------------------------------------------

Outcome schedule_algebra() {
  Clock clock;
  const NoiseSchedule s = make_linear_schedule(1000, 0.00085, 0.0120);
  bool ok = s.steps() == 1000;
  ok = ok && std::abs(s.alpha_bar(1) - 0.99915) < 1e-12;
  const double beta500 = 0.00085 + 499.0 / 999.0 * (0.0120 - 0.00085);
  ok = ok && std::abs(s.beta(500) - beta500) < 1e-12;
  for (int t = 2; t <= 1000; ++t) ok = ok && s.alpha_bar(t) < s.alpha_bar(t - 1);
  const double sec = clock.seconds();
  return {ok && sec < 1.0, fmt("abar_1=%.15f beta_500=%.12g (%.3fs)", s.alpha_bar(1), s.beta(500), sec)};
}

Outcome v_identity() {
  Clock clock;
  const NoiseSchedule s = make_linear_schedule(1000, 0.00085, 0.0120);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::uniform_int_distribution<int> t(1, 1000);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Eigen::Matrix<double, 4, 1> z0, eps;
    for (int k = 0; k < 4; ++k) {
      z0[k] = n(rng);
      eps[k] = n(rng);
    }
    const int ti = t(rng);
    const Eigen::Matrix<double, 4, 1> zt = q_sample(z0, eps, ti, s);
    const Eigen::Matrix<double, 4, 1> v = v_target(z0, eps, ti, s);
    worst = std::max(worst, (predict_z0_from_v(zt, v, ti, s) - z0).cwiseAbs().maxCoeff());
  }
  const double sec = clock.seconds();
  return {worst < 1e-10 && sec < 5.0, fmt("10000 draws, worst |z0 error| %.3g (%.2fs)", worst, sec)};
}

Outcome gradient_check() {
  Clock clock;
  ModelConfig cfg;
  cfg.base_channels = 8;
  cfg.context_dim = 16;
  cfg.delta_tokens = 4;
  cfg.time_dim = 16;
  cfg.time_hidden = 16;
  WorldModelNet<double> net(cfg, false);
  int checked = 0, tensors = 0;
  double worst = 0.0;
  std::string where;
  for (int views : {1, 2}) {
    const auto r = acwm::testing::check_gradients(net, acwm::testing::make_grad_problem(views, 40 + views), 4);
    checked += r.checked;
    tensors = std::max(tensors, r.tensors);
    if (r.worst_rel >= worst) {
      worst = r.worst_rel;
      where = r.worst_name;
    }
  }
  const std::size_t all = net.parameters().all().size();
  const double sec = clock.seconds();
  const bool ok = checked >= 100 && worst < 1e-4 && tensors == static_cast<int>(all) && sec < 120.0;
  return {ok, fmt("%d entries over %d/%zu tensors, worst rel %.2g at %s (%.1fs)", checked, tensors, all, worst,
                  where.c_str(), sec)};
}

Outcome geometry_round_trips() {
  Clock clock;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dd(0.2, 3.0);
  const Eigen::Isometry3d pose = look_at({0.2, -0.4, 0.5}, {0, 0, 0});
  const Eigen::Isometry3d anchor = look_at({0.0, -0.4, 0.5}, {0, 0, 0});
  double worst[2] = {0, 0}, ray_worst[2] = {0, 0};
  for (int k = 0; k < 2; ++k) {
    CameraModel cam;
    if (k == 1) {
      cam.kind = CameraKind::kEquidistantFisheye;
      cam.fx = cam.fy = 60.0;  // keeps every pixel inside the field
    }
    std::uniform_real_distribution<double> uu(0.0, cam.width), vv(0.0, cam.height);
    for (int i = 0; i < 20000; ++i) {
      const double u = uu(rng), v = vv(rng);
      const PixelProjection p = project(pose * (dd(rng) * back_project(u, v, cam)), cam, pose);
      worst[k] = std::max(worst[k], std::hypot(p.u - u, p.v - v));
    }
    const RayMap r = compute_ray_map(cam, pose, anchor, cam.height, cam.width);
    for (int row = 0; row < r.height; ++row)
      for (int col = 0; col < r.width; ++col) {
        const int i = row * r.width + col;
        const PixelProjection p = project(anchor * (r.origins.col(i) + 0.7 * r.directions.col(i)), cam, pose);
        ray_worst[k] = std::max(ray_worst[k], std::hypot(p.u - (col + 0.5), p.v - (row + 0.5)));
      }
  }
  const double sec = clock.seconds();
  const bool ok = worst[0] < 1e-6 && worst[1] < 1e-4 && ray_worst[0] < 0.5 && ray_worst[1] < 0.5 && sec < 10.0;
  return {ok, fmt("pinhole %.2g px, fisheye %.2g px, ray map %.2g/%.2g px (%.2fs)", worst[0], worst[1], ray_worst[0],
                  ray_worst[1], sec)};
}

Outcome oracle_rollout() {
  Clock clock;
  const CameraRig rig = default_rig();
  const Scenario sc = default_scenario();
  std::mt19937_64 rng(2);
  std::vector<ArmFrame> actions;
  for (const ActionState& a : plan_pick_place(sc.world, sc.task, PolicyNoise{}, rng)) actions.push_back({a});
  // Keep moving after the placement so that all 30 chunks carry motion.
  while (actions.size() < 30 * 16) {
    ActionState a = actions.back().front();
    a.pose.position.z() = 0.2 + 0.05 * std::sin(0.1 * static_cast<double>(actions.size()));
    actions.push_back({a});
  }
  WorldState direct = sc.world;
  const FrameGrid truth = simulate(direct, actions, rig);
  OracleBackend oracle(sc.world, rig);
  const RolloutVideo video =
      rollout_chunks(oracle, render_views(sc.world, rig), {sc.world.gripper}, actions, RolloutConfig{});
  int matched = 0;
  for (int c = 0; c < video.chunks && c < 30; ++c) {
    const FrameGrid chunk(truth.begin() + 16 * c, truth.begin() + 16 * (c + 1));
    matched += video.chunk_hashes[c] == hash_frames(chunk);
  }
  const double sec = clock.seconds();
  const bool ok = video.chunks == 30 && matched == 30 && video.frames == truth && rig.size() == 2 && sec < 60.0;
  return {ok, fmt("%d/30 chunk hashes equal over %zu views (%.1fs)", matched, rig.size(), sec)};
}

std::optional<ContactPhase> brute_force_contact(const std::vector<double>& x, double tc, double to) {
  const int n = static_cast<int>(x.size());
  for (int b = 0; b < n; ++b) {
    bool opened_before = false;
    for (int j = 0; j < b; ++j) opened_before = opened_before || x[j] >= to;
    if (!(x[b] < tc && opened_before)) continue;
    for (int e = b + 1; e < n; ++e)
      if (x[e] >= to) return ContactPhase{b, e, false};
    if (b == n - 1) return std::nullopt;
    return ContactPhase{b, n - 1, true};
  }
  return std::nullopt;
}

Outcome segmentation_oracle() {
  Clock clock;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(3, 60);
  int agree = 0, contacts = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(len(rng));
    double level = u(rng) < 0.7 ? 1.0 : 0.3;
    for (double& v : x) {
      if (u(rng) < 0.25) level = u(rng) < 0.5 ? 0.95 + 0.05 * u(rng) : 0.6 * u(rng);
      v = std::clamp(level + 0.08 * (u(rng) - 0.5), 0.0, 1.0);
    }
    const auto want = brute_force_contact(x, 0.5, 0.9);
    std::optional<ContactPhase> got;
    try {
      got = detect_contact_phase(x);
    } catch (const NoContactError&) {
    }
    contacts += want.has_value();
    agree += want.has_value() == got.has_value() &&
             (!want || (want->t_b == got->t_b && want->t_e == got->t_e && want->open_ended == got->open_ended));
  }
  const double sec = clock.seconds();
  return {agree == 1000 && sec < 5.0, fmt("%d/1000 agree (%d with contact) (%.2fs)", agree, contacts, sec)};
}

Outcome data_engine() {
  Clock clock;
  const CameraRig rig = default_rig();
  AugmentationSpec spec;
  spec.samples = 3;
  int produced = 0, endpoint_exact = 0, kinematic = 0, reversed_equal = 0;
  for (int i = 0; i < 5; ++i) {
    std::mt19937_64 layout(100 + i);
    const Scenario sc = random_scenario(layout);
    const Episode ep = run_scripted_episode(sc, PolicyNoise{}, 100 + i, rig, 16);
    ActionTrajectory traj;
    traj.frames.push_back({sc.world.gripper});
    traj.frames.insert(traj.frames.end(), ep.actions.begin(), ep.actions.end());
    for (std::size_t k = 0; k < traj.frames.size(); ++k) traj.timestamps.push_back(0.1 * static_cast<double>(k));
    const ContactPhase phase = detect_contact_phase(traj);
    WorldState contact = sc.world;
    for (int k = 1; k <= phase.t_b; ++k) contact = step(contact, traj.frames[k].front());
    AugmentationSpec s = spec;
    s.seed = 31 + i;
    for (const ActionTrajectory& aug : augment_fetch(traj, phase, s)) {
      ++produced;
      endpoint_exact += aug.frames.back() == traj.frames[phase.t_b];
      kinematic += kinematically_valid(aug, s);
      OracleBackend oracle(contact, rig);
      const FrameSequence seq = generate_reversed(ep.frames[phase.t_b], aug, oracle, 16);
      WorldState fwd = sc.world;
      fwd.gripper = aug.frames.front().front();
      FrameGrid want{render_views(fwd, rig)};
      const FrameGrid rest = simulate(fwd, std::span<const ArmFrame>(aug.frames).subspan(1), rig);
      want.insert(want.end(), rest.begin(), rest.end());
      reversed_equal += seq.frames == want && seq.frames.back() == ep.frames[phase.t_b];
    }
  }
  const double sec = clock.seconds();
  const bool ok = produced == 15 && endpoint_exact == 15 && kinematic == 15 && reversed_equal == 15 && sec < 120.0;
  return {ok, fmt("%d augmented, endpoint exact %d, kinematic %d, reversed = forward %d (%.1fs)", produced,
                  endpoint_exact, kinematic, reversed_equal, sec)};
}

// Learned model ------------------------------------------------------------------

struct LearnedRun {
  WorldModelConfig config;
  TrainedModel model;
  int chunks = 0;
  int failures = 0;
  int episodes = 0;
  double corpus_seconds = 0.0;
};

LearnedRun train_model(double failure_fraction, const fs::path& checkpoint) {
  LearnedRun run;
  Clock clock;
  const CameraRig rig = head_rig();
  CorpusOptions co;
  co.failure_fraction = failure_fraction;
  const std::vector<Episode> corpus = generate_corpus(co, rig);
  run.episodes = static_cast<int>(corpus.size());
  for (const Episode& e : corpus) {
    run.failures += e.failure;
    run.chunks += static_cast<int>(e.actions.size()) / co.chunk_size;
  }
  run.corpus_seconds = clock.seconds();
  TrainConfig tc;
  tc.log_every = 1000;
  run.model = train_on_corpus(corpus, rig, run.config, tc);
  save_checkpoint(checkpoint, *run.model.net, run.config, run.model.stats, tc.steps);
  return run;
}

std::shared_ptr<WorldModel> inference_model(const LearnedRun& run) {
  return WorldModel::from_trained(*run.model.net, run.config, run.model.stats);
}

// Exact structural properties of the trained net.
bool structural_checks(WorldModelNet<double>& net, std::string& detail) {
  const acwm::testing::GradProblem one = acwm::testing::make_grad_problem(1, 5);
  const int D = net.config().context_dim, M = net.config().delta_tokens;
  std::vector<nn::Mat<double>> tokens{nn::Mat<double>::Ones(D, M + 1)};
  TinyDenoiser<double>::Tape tape;
  net.denoiser().forward(one.inputs, one.height, one.width, one.t, tokens, &tape);
  const bool noop = tape.views[0].h4 == tape.views[0].h3;

  const acwm::testing::GradProblem three = acwm::testing::make_grad_problem(3, 11);
  std::vector<nn::Mat<double>> tok;
  for (int v = 0; v < 3; ++v)
    tok.push_back(context_tokens(reference_style_token(net.style(), three.patches[v]),
                                 encode_delta_actions(net.resampler(), std::span<const ArmFrame>(three.segments[v]))));
  const auto out = net.denoiser().predict_v(three.inputs, three.height, three.width, three.t, tok);
  const std::vector<int> perm{2, 0, 1};
  std::vector<nn::Mat<double>> pin, ptok;
  for (int i : perm) {
    pin.push_back(three.inputs[i]);
    ptok.push_back(tok[i]);
  }
  const auto pout = net.denoiser().predict_v(pin, three.height, three.width, three.t, ptok);
  bool equivariant = true;
  for (int j = 0; j < 3; ++j) equivariant = equivariant && pout[j] == out[perm[j]];
  detail = fmt("single-view no-op %s, permutation equivariance %s", noop ? "exact" : "BROKEN",
               equivariant ? "exact" : "BROKEN");
  return noop && equivariant;
}

Outcome learned_utility(const LearnedRun& a) {
  Clock clock;
  const CameraRig rig = head_rig();
  CorpusOptions ho;
  ho.episodes = 20;
  ho.seed = 999;
  const std::vector<Episode> held = generate_corpus(ho, rig);
  std::vector<std::pair<int, int>> list;
  for (int e = 0; e < static_cast<int>(held.size()); ++e)
    for (int c = 0; c < static_cast<int>(held[e].actions.size()) / 16; ++c) list.push_back({e, c});
  const LearnedBackend backend(inference_model(a), rig);
  const PredictionScore s = score_predictions(backend, held, list, 16, 3);
  const double improvement = 1.0 - s.model_mae / s.baseline_mae;
  std::string structure;
  const bool structural = structural_checks(*a.model.net, structure);
  const double failure_share = static_cast<double>(a.failures) / a.episodes;
  const bool ok = a.model.report.seconds <= 1800.0 && failure_share >= 0.2 && improvement >= 0.2 && structural;
  return {ok, fmt("trained %.0fs on %d episodes (%.0f%% failures, %d chunks); held-out MAE %.5f vs baseline %.5f "
                  "over %d motion frames, improvement %.1f%%; %s (scoring %.0fs)",
                  a.model.report.seconds, a.episodes, 100.0 * failure_share, a.chunks, s.model_mae, s.baseline_mae,
                  s.frames, 100.0 * improvement, structure.c_str(), clock.seconds())};
}

Outcome failure_contrast(const LearnedRun& with_failures, const LearnedRun& success_only) {
  Clock clock;
  const CameraRig rig = head_rig();
  const LearnedBackend a(inference_model(with_failures), rig);
  const LearnedBackend b(inference_model(success_only), rig);
  std::vector<Episode> probes;
  std::vector<std::pair<int, int>> chunks;
  int stationary = 0;
  for (int i = 0; static_cast<int>(probes.size()) < 40; ++i) {
    std::mt19937_64 layout(5000 + i);
    const Scenario sc = random_scenario(layout);
    PolicyNoise noise;
    noise.sigma = 0.003;
    noise.empty_grasp = true;
    Episode ep = run_scripted_episode(sc, noise, 5000 + i, rig, 16);
    ep.failure = true;
    // Oracle ground truth: nothing attaches and nothing moves.
    WorldState w = sc.world;
    bool still = true;
    for (const ArmFrame& f : ep.actions) {
      w = step(w, f.front());
      for (std::size_t o = 0; o < w.objects.size(); ++o)
        still = still && !w.objects[o].attached && w.objects[o].position == sc.world.objects[o].position;
    }
    stationary += still;
    std::vector<double> open{sc.world.gripper.openness};
    for (const ArmFrame& f : ep.actions) open.push_back(f.front().openness);
    const ContactPhase phase = detect_contact_phase(open);
    chunks.push_back({static_cast<int>(probes.size()), (phase.t_b - 1) / 16});
    probes.push_back(std::move(ep));
  }
  int a_better = 0;
  double sum_a = 0.0, sum_b = 0.0;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const std::vector<std::pair<int, int>> one{chunks[p]};
    const PredictionScore sa = score_predictions(a, probes, one, 16, 17 + p);
    const PredictionScore sb = score_predictions(b, probes, one, 16, 17 + p);
    sum_a += sa.model_mae;
    sum_b += sb.model_mae;
    a_better += sa.model_mae < sb.model_mae;
  }
  const int n = static_cast<int>(probes.size());
  const bool ok = n >= 30 && stationary == n && sum_a < sum_b;
  return {ok, fmt("%d probes, object stationary in %d; mean MAE with failures %.5f vs success-only %.5f, "
                  "lower on %d/%d (%.0fs)",
                  n, stationary, sum_a / n, sum_b / n, a_better, n, clock.seconds())};
}

// Evaluator ----------------------------------------------------------------------

class HoldPolicy : public Policy {
 public:
  explicit HoldPolicy(ActionState s) : s_(s) {}
  std::vector<ArmFrame> next_chunk(const Observation&) override { return std::vector<ArmFrame>(16, ArmFrame{s_}); }

 private:
  ActionState s_;
};

Outcome evaluator_loop() {
  Clock clock;
  const Scenario sc = default_scenario();
  const CameraRig rig = head_rig();
  OracleBackend oracle(sc.world, rig);
  HoldPolicy hold(sc.world.gripper);
  const RolloutRecord r = run_episode(hold, oracle, render_views(sc.world, rig), {sc.world.gripper}, "hold", "default",
                                      EpisodeConfig{});
  const bool threshold = r.chunks() == 1 && r.termination == Termination::kThreshold;

  auto verdict = [](const std::string& who, Label l) { return Verdict{"r", who, l, ""}; };
  const std::vector<Verdict> ssf{verdict("a", Label::kSuccess), verdict("b", Label::kSuccess),
                                 verdict("c", Label::kFailure)};
  const std::vector<Verdict> sf{verdict("a", Label::kSuccess), verdict("b", Label::kFailure)};
  const bool voting = majority(ssf) == Label::kSuccess && majority(sf) == Label::kFailure;

  const std::vector<PolicyCase> policies{{"sigma_0", PolicyNoise{0.0}},
                                         {"sigma_0.01", PolicyNoise{0.01}},
                                         {"sigma_0.02", PolicyNoise{0.02}}};
  std::mt19937_64 layout(21);
  const std::vector<TaskCase> tasks{{"default", default_scenario()}, {"random", random_scenario(layout)}};
  const BackendFactory factory = [&rig](const Scenario& s) -> std::unique_ptr<WorldModelBackend> {
    return std::make_unique<OracleBackend>(s.world, rig);
  };
  EvaluationConfig cfg;
  cfg.episodes = 200;
  const ConsistencyReport rep = compare_backends(policies, tasks, factory, factory, cfg);
  const Eigen::VectorXd sr = rep.oracle.rate.colwise().mean().transpose();
  const bool ordered = sr[0] > sr[1] && sr[1] > sr[2];
  const bool ranks = rep.rank_correlation_policies == 1.0 && rep.rank_correlation_tasks == 1.0;
  const double sec = clock.seconds();
  const bool ok = threshold && voting && ordered && ranks && sec < 300.0;
  return {ok, fmt("threshold stop %s, majority %s, spearman %.2f/%.2f, SR %.3f > %.3f > %.3f over %d episodes (%.0fs)",
                  threshold ? "ok" : "BROKEN", voting ? "ok" : "BROKEN", rep.rank_correlation_policies,
                  rep.rank_correlation_tasks, sr[0], sr[1], sr[2], cfg.episodes, sec)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acwm acceptance run"};
  std::string work = "acceptance_work";
  std::string only;
  app.add_option("--work", work, "directory for checkpoints and the report");
  app.add_option("--only", only, "comma-separated subset of criteria");
  CLI11_PARSE(app, argc, argv);
  std::set<std::string> selected;
  {
    std::stringstream ss(only);
    for (std::string s; std::getline(ss, s, ',');)
      if (!s.empty()) selected.insert(s);
  }
  fs::create_directories(work);

  std::optional<LearnedRun> with_failures, success_only;
  auto model_a = [&]() -> const LearnedRun& {
    if (!with_failures) with_failures = train_model(0.25, fs::path(work) / "model_with_failures");
    return *with_failures;
  };
  auto model_b = [&]() -> const LearnedRun& {
    if (!success_only) success_only = train_model(0.0, fs::path(work) / "model_success_only");
    return *success_only;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"schedule_algebra", schedule_algebra},
      {"v_identity", v_identity},
      {"gradient_check", gradient_check},
      {"geometry_round_trips", geometry_round_trips},
      {"oracle_rollout_30_chunks", oracle_rollout},
      {"segmentation_oracle", segmentation_oracle},
      {"data_engine", data_engine},
      {"learned_utility", [&] { return learned_utility(model_a()); }},
      {"failure_data_contrast", [&] { return failure_contrast(model_a(), model_b()); }},
      {"evaluator_loop", evaluator_loop},
  };

  Json report = Json::object();
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!selected.empty() && !selected.count(name)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    report[name] = {{"pass", o.pass}, {"detail", o.detail}};
  }
  write_json(fs::path(work) / "report.json", report);
  return failed == 0 ? 0 : 1;
}
