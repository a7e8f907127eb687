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

// Command-line front end. Exit codes: 0 success, 2 validation error (bad
// flags, bad input files), 1 anything else.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "acwm/action_map.hpp"
#include "acwm/eval.hpp"
#include "acwm/io.hpp"
#include "acwm/service.hpp"
#include "acwm/trajectory.hpp"
#include "acwm/world_model.hpp"

namespace fs = std::filesystem;
using namespace acwm;

namespace {

// Settings shared by several subcommands; configs/default.json mirrors them.
struct Settings {
  int chunk_size = 16;
  int max_chunks = 30;
  double eps_term = 1e-3;
  SamplerOptions sampler;
  WorldModelConfig model;
  TrainConfig train;
  CorpusOptions corpus;

  static Settings from_json(const Json& j) {
    Settings s;
    s.chunk_size = j.value("chunk_size", s.chunk_size);
    s.max_chunks = j.value("max_chunks", s.max_chunks);
    s.eps_term = j.value("eps_term", s.eps_term);
    s.sampler.steps = j.value("sampler_steps", s.sampler.steps);
    s.sampler.guidance_scale = j.value("guidance_scale", s.sampler.guidance_scale);
    if (j.contains("model")) {
      Json m = s.model.to_json();
      m.merge_patch(j.at("model"));
      s.model = WorldModelConfig::from_json(m);
    }
    s.model.chunk_size = s.chunk_size;
    if (j.contains("train")) {
      const Json& t = j.at("train");
      s.train.steps = t.value("steps", s.train.steps);
      s.train.batch = t.value("batch", s.train.batch);
      s.train.adam.learning_rate = t.value("learning_rate", s.train.adam.learning_rate);
      s.train.adam.clip_norm = t.value("clip_norm", s.train.adam.clip_norm);
      s.train.p_drop = t.value("p_drop", s.train.p_drop);
      s.train.timestep_grid = t.value("timestep_grid", s.train.timestep_grid);
      s.train.cosine_decay = t.value("cosine_decay", s.train.cosine_decay);
    }
    if (j.contains("corpus")) {
      const Json& c = j.at("corpus");
      s.corpus.episodes = c.value("episodes", s.corpus.episodes);
      s.corpus.failure_fraction = c.value("failure_fraction", s.corpus.failure_fraction);
      s.corpus.sigma = c.value("sigma", s.corpus.sigma);
    }
    s.corpus.chunk_size = s.chunk_size;
    require(s.chunk_size >= 1 && s.max_chunks >= 1 && s.eps_term > 0, "bad chunk settings in config");
    return s;
  }
};

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";
  Settings settings;
};

CameraRig rig_from_names(const std::vector<std::string>& names) {
  const CameraRig all = default_rig(true);
  CameraRig rig;
  for (const std::string& n : names) {
    try {
      rig.views.push_back(all.at(n));
    } catch (const std::exception&) {
      throw ValidationError("unknown view '" + n + "'");
    }
  }
  require(!rig.views.empty(), "at least one view is required");
  return rig;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');)
    if (!part.empty()) out.push_back(part);
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const std::string& part : split_csv(s)) {
    try {
      out.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw ValidationError("not a number: '" + part + "'");
    }
  }
  return out;
}

void write_grid(const fs::path& dir, const FrameGrid& frames, const CameraRig& rig, std::size_t offset = 0) {
  for (std::size_t k = 0; k < frames.size(); ++k)
    for (std::size_t v = 0; v < rig.size(); ++v) {
      char name[32];
      std::snprintf(name, sizeof(name), "%04zu.png", offset + k);
      write_png(dir / rig.views[v].name / name, frames[k][v]);
    }
}

ActionTrajectory to_trajectory(const std::vector<ArmFrame>& actions, double dt = 0.1) {
  ActionTrajectory t;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    t.frames.push_back(actions[i]);
    t.timestamps.push_back(static_cast<double>(i) * dt);
  }
  return t;
}

Image ray_direction_image(const RayMap& ray) {
  Image img(ray.width, ray.height);
  for (int r = 0; r < ray.height; ++r)
    for (int c = 0; c < ray.width; ++c) {
      const Eigen::Vector3d d = ray.directions.col(r * ray.width + c);
      auto q = [](double x) { return static_cast<std::uint8_t>(std::lround(std::clamp((x + 1.0) * 127.5, 0.0, 255.0))); };
      img.set(r, c, Rgb{q(d.x()), q(d.y()), q(d.z())});
    }
  return img;
}

void print_json(const Json& j) { std::cout << j.dump(2) << std::endl; }

// Subcommands ----------------------------------------------------------------

int cmd_simulate(const Globals& g, const std::string& task, int episodes, double sigma, bool empty_grasp,
                 const std::string& views) {
  require(episodes >= 1, "--episodes must be positive");
  const CameraRig rig = rig_from_names(split_csv(views));
  Json rows = Json::array();
  for (int e = 0; e < episodes; ++e) {
    const std::string t = task == "random" ? "random:" + std::to_string(g.seed + e) : task;
    const Scenario sc = scenario_for_task(t);
    PolicyNoise noise{sigma, empty_grasp, 0.08};
    const Episode ep = run_scripted_episode(sc, noise, g.seed + e, rig, g.settings.chunk_size);
    WorldState state = sc.world;
    for (const ArmFrame& a : ep.actions) state = step(state, a.front());
    const std::string id = "ep" + std::to_string(e);
    const fs::path dir = fs::path(g.out) / id;
    write_trajectory(dir / "trajectory.json", to_trajectory(ep.actions));
    write_grid(dir / "frames", ep.frames, rig);
    rows.push_back({{"id", id}, {"task", t}, {"frames", ep.frames.size()}, {"success", success(state, sc.task)}});
  }
  const Json summary{{"episodes", rows}};
  write_json(fs::path(g.out) / "summary.json", summary);
  print_json(summary);
  return 0;
}

int cmd_render_maps(const Globals& g, const std::string& in, const std::string& views) {
  const ActionTrajectory traj = read_trajectory(in);
  const CameraRig rig = rig_from_names(split_csv(views));
  const auto maps = render_action_map_sequence(traj, rig);
  write_grid(fs::path(g.out) / "action_maps", maps, rig);
  const Eigen::Isometry3d anchor = rig.views[0].extrinsics.resolve(traj.frames.front());
  for (std::size_t v = 0; v < rig.size(); ++v) {
    const CameraView& cam = rig.views[v];
    const RayMap ray = compute_ray_map(cam.model, cam.extrinsics.resolve(traj.frames.front()), anchor,
                                       cam.model.height, cam.model.width);
    write_png(fs::path(g.out) / "ray_maps" / (cam.name + ".png"), ray_direction_image(ray));
  }
  print_json({{"frames", traj.size()}, {"views", split_csv(views)}, {"out", g.out}});
  return 0;
}

int cmd_segment(const std::string& in, double theta_close, double theta_open) {
  const ActionTrajectory traj = read_trajectory(in);
  const ContactPhase p = detect_contact_phase(traj, traj.frames.front().front().arm, theta_close, theta_open);
  Json j{{"t_b", p.t_b}, {"t_e", p.t_e}};
  if (p.open_ended) j["open_ended"] = true;
  std::cout << j.dump() << std::endl;
  return 0;
}

int cmd_augment(const Globals& g, int samples, int seeds, int look_back, const std::string& views) {
  require(seeds >= 1, "--seeds must be positive");
  const CameraRig rig = rig_from_names(split_csv(views));
  AugmentationSpec spec;
  spec.samples = samples;
  spec.look_back = look_back;
  spec.seed = g.seed;
  spec.validate();
  std::vector<SeedRecord> seed_records;
  std::vector<AugmentedRecord> augmented;
  for (int i = 0; i < seeds; ++i) {
    const Scenario sc = scenario_for_task("random:" + std::to_string(g.seed + i));
    const Episode ep = run_scripted_episode(sc, PolicyNoise{}, g.seed + i, rig, g.settings.chunk_size);
    // Seed trajectory: the initial state then every commanded action.
    std::vector<ArmFrame> frames{{sc.world.gripper}};
    frames.insert(frames.end(), ep.actions.begin(), ep.actions.end());
    const ActionTrajectory traj = to_trajectory(frames);
    const std::string id = "seed" + std::to_string(i);
    seed_records.push_back({id, traj, ep.frames});
    const ContactPhase phase = detect_contact_phase(traj);
    AugmentationSpec s = spec;
    s.seed = spec.seed * 1000003u + static_cast<std::uint64_t>(i);
    for (const ActionTrajectory& aug : augment_fetch(traj, phase, s)) {
      // The oracle needs the true state at the contact frame.
      WorldState contact = sc.world;
      for (int k = 1; k <= phase.t_b; ++k) contact = step(contact, traj.frames[k].front());
      OracleBackend oracle(contact, rig);
      const FrameSequence seq = generate_reversed(ep.frames[phase.t_b], aug, oracle, g.settings.chunk_size);
      augmented.push_back({id, aug, seq.frames});
    }
  }
  const DatasetSummary summary = emit_dataset(seed_records, augmented, spec, rig, g.out);
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(summary.manifest_hash));
  print_json({{"seed_count", seed_records.size()}, {"augmented_count", augmented.size()}, {"manifest_hash", hash}});
  return 0;
}

int cmd_train(const Globals& g, int episodes, int steps, double failure_fraction) {
  Settings s = g.settings;
  if (episodes > 0) s.corpus.episodes = episodes;
  if (steps >= 0) s.train.steps = steps;
  if (failure_fraction >= 0) s.corpus.failure_fraction = failure_fraction;
  s.corpus.seed = g.seed;
  s.train.seed = g.seed + 1;
  set_log_level(LogLevel::kInfo);
  CameraRig rig = rig_from_names({"head"});
  const std::vector<Episode> corpus = generate_corpus(s.corpus, rig);
  const TrainedModel m = train_on_corpus(corpus, rig, s.model, s.train);
  save_checkpoint(g.out, *m.net, s.model, m.stats, s.train.steps);
  const double last = m.report.losses.empty() ? 0.0 : m.report.losses.back();
  print_json({{"checkpoint", g.out}, {"steps", s.train.steps}, {"episodes", corpus.size()},
              {"final_loss", last}, {"seconds", m.report.seconds}});
  return 0;
}

std::unique_ptr<WorldModelBackend> make_backend(const std::string& kind, const Scenario& sc,
                                                const CameraRig& rig, const std::string& checkpoint,
                                                const SamplerOptions& sampler, std::uint64_t seed) {
  if (kind == "oracle") return std::make_unique<OracleBackend>(sc.world, rig);
  if (kind == "learned") {
    require(!checkpoint.empty(), "the learned backend needs --checkpoint");
    return std::make_unique<LearnedBackend>(load_checkpoint(checkpoint), rig, sampler, seed);
  }
  throw ValidationError("unknown backend '" + kind + "'");
}

int cmd_rollout(const Globals& g, const std::string& backend_kind, int chunks, const std::string& task,
                const std::string& views, double sigma, const std::string& checkpoint, bool closed_loop) {
  require(chunks >= 1, "--chunks must be positive");
  const Settings& s = g.settings;
  const CameraRig rig = rig_from_names(split_csv(views));
  const Scenario sc = scenario_for_task(task);
  auto backend = make_backend(backend_kind, sc, rig, checkpoint, s.sampler, g.seed);
  const std::vector<Image> init = render_views(sc.world, rig);
  const ArmFrame arms{sc.world.gripper};
  const PolicyNoise noise{sigma, false, 0.08};
  RolloutRecord rec;
  if (closed_loop) {
    ScriptedPolicy policy(sc.world, sc.task, noise, g.seed, s.chunk_size);
    rec = run_episode(policy, *backend, init, arms, "rollout", task,
                      EpisodeConfig{s.eps_term, chunks, s.chunk_size, true});
  } else {
    // Open loop: the scripted plan, held at its last pose to fill every chunk.
    std::mt19937_64 rng(g.seed);
    std::vector<ArmFrame> actions;
    for (const ActionState& a : plan_pick_place(sc.world, sc.task, noise, rng)) actions.push_back({a});
    actions.resize(static_cast<std::size_t>(chunks) * s.chunk_size, actions.back());
    RolloutConfig rc;
    rc.chunk_size = s.chunk_size;
    rc.max_chunks = chunks;
    rc.sampler = s.sampler;
    const RolloutVideo video = rollout_chunks(*backend, init, arms, actions, rc);
    rec.episode_id = "rollout";
    rec.task_id = task;
    rec.backend_id = backend->id();
    for (int c = 0; c < video.chunks; ++c) {
      std::vector<ArmFrame> chunk(actions.begin() + c * s.chunk_size, actions.begin() + (c + 1) * s.chunk_size);
      rec.chunk_norms.push_back(mean_delta_norm(c == 0 ? arms : actions[c * s.chunk_size - 1], chunk));
      rec.chunk_actions.push_back(std::move(chunk));
    }
    rec.frames = video.frames;
    rec.termination = Termination::kMaxChunks;
  }
  const fs::path dir = fs::path(g.out) / "rollouts" / rec.episode_id;
  write_json(dir / "record.json", rec.to_json());
  write_grid(dir / "frames", rec.frames, rig);
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(rec.hash()));
  Json out{{"record", (dir / "record.json").string()}, {"chunks", rec.chunks()},
           {"termination", to_string(rec.termination)}, {"hash", hash}};
  if (auto* oracle = dynamic_cast<OracleBackend*>(backend.get()))
    out["success"] = success(oracle->state(), sc.task);
  print_json(out);
  return 0;
}

std::vector<PolicyCase> policy_cases(const std::string& sigmas) {
  std::vector<PolicyCase> out;
  for (double s : parse_doubles(sigmas)) {
    char id[32];
    std::snprintf(id, sizeof(id), "sigma=%g", s);
    out.push_back({id, PolicyNoise{s, false, 0.08}});
  }
  require(!out.empty(), "need at least one policy sigma");
  return out;
}

std::vector<TaskCase> task_cases(const std::string& tasks) {
  std::vector<TaskCase> out;
  for (const std::string& t : split_csv(tasks)) out.push_back({t, scenario_for_task(t)});
  require(!out.empty(), "need at least one task");
  return out;
}

Json table_json(const SrTable& t) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < t.tasks.size(); ++i)
    for (std::size_t j = 0; j < t.policies.size(); ++j)
      rows.push_back({{"task", t.tasks[i]}, {"policy", t.policies[j]}, {"rate", t.rate(i, j)}});
  return Json{{"episodes", t.episodes}, {"cells", rows}};
}

int cmd_evaluate(const Globals& g, const std::string& sigmas, const std::string& tasks, int episodes,
                 const std::string& views) {
  const CameraRig rig = rig_from_names(split_csv(views));
  EvaluationConfig cfg;
  cfg.episodes = episodes;
  cfg.seed = g.seed;
  cfg.episode = {g.settings.eps_term, g.settings.max_chunks, g.settings.chunk_size, false};
  const SrTable t = evaluate_success_rates(
      policy_cases(sigmas), task_cases(tasks),
      [&](const Scenario& sc) { return std::make_unique<OracleBackend>(sc.world, rig); }, cfg);
  const Json j = table_json(t);
  write_json(fs::path(g.out) / "success_rates.json", j);
  print_json(j);
  return 0;
}

int cmd_compare(const Globals& g, const std::string& candidate, const std::string& checkpoint,
                const std::string& sigmas, const std::string& tasks, int episodes, const std::string& views) {
  const CameraRig rig = rig_from_names(split_csv(views));
  EvaluationConfig cfg;
  cfg.episodes = episodes;
  cfg.seed = g.seed;
  cfg.episode = {g.settings.eps_term, g.settings.max_chunks, g.settings.chunk_size, false};
  std::shared_ptr<const WorldModel> model;
  if (candidate == "learned") {
    require(!checkpoint.empty(), "the learned candidate needs --checkpoint");
    model = load_checkpoint(checkpoint);
  } else {
    require(candidate == "oracle", "unknown candidate backend '" + candidate + "'");
  }
  const BackendFactory oracle = [&](const Scenario& sc) -> std::unique_ptr<WorldModelBackend> {
    return std::make_unique<OracleBackend>(sc.world, rig);
  };
  const BackendFactory cand = [&](const Scenario& sc) -> std::unique_ptr<WorldModelBackend> {
    if (model) return std::make_unique<LearnedBackend>(model, rig, g.settings.sampler, g.seed);
    return std::make_unique<OracleBackend>(sc.world, rig);
  };
  const ConsistencyReport r = compare_backends(policy_cases(sigmas), task_cases(tasks), oracle, cand, cfg);
  write_json(fs::path(g.out) / "consistency.json", r.to_json());
  print_json(r.to_json());
  return 0;
}

int cmd_serve(const Globals& g, const std::string& host, int port, const std::string& checkpoint) {
  if (const char* env = std::getenv("ACWM_PORT")) {
    try {
      port = std::stoi(env);
    } catch (const std::exception&) {
      throw ValidationError("ACWM_PORT is not a port number");
    }
  }
  require(port > 0 && port < 65536, "port outside 1..65535");
  std::shared_ptr<const WorldModel> model;
  if (!checkpoint.empty()) model = load_checkpoint(checkpoint);
  ServiceOptions opt;
  opt.root = g.out;
  opt.chunk_size = g.settings.chunk_size;
  opt.max_chunks = g.settings.max_chunks;
  opt.eps_term = g.settings.eps_term;
  const SamplerOptions sampler = g.settings.sampler;
  const std::uint64_t seed = g.seed;
  opt.backends = [model, sampler, seed](const SessionSpec& spec) -> std::unique_ptr<WorldModelBackend> {
    if (spec.backend == "oracle") return std::make_unique<OracleBackend>(spec.scenario.world, spec.rig);
    if (spec.backend == "learned") {
      require(model != nullptr, "no checkpoint loaded for the learned backend");
      return std::make_unique<LearnedBackend>(model, spec.rig, sampler, seed);
    }
    throw ValidationError("unknown backend '" + spec.backend + "'");
  };
  Service service(opt);
  set_log_level(LogLevel::kInfo);
  serve(service, host, port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acwm: action-conditioned world model toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON settings file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output directory");

  std::string task = "default", views = "head", in, sigmas = "0,0.01,0.03", tasks = "default";
  std::string checkpoint, backend = "oracle", candidate = "oracle", host = "127.0.0.1";
  int episodes = 1, steps = -1, samples = 3, seeds = 5, look_back = 8, chunks = 30, port = 8080;
  double sigma = 0.0, theta_close = 0.5, theta_open = 0.9, failure_fraction = -1.0;
  bool empty_grasp = false, closed_loop = false;

  auto* simulate = app.add_subcommand("simulate", "Run scripted synthetic episodes");
  simulate->add_option("--task", task, "default | random | random:<seed>");
  simulate->add_option("--episodes", episodes);
  simulate->add_option("--sigma", sigma, "Waypoint jitter std, meters");
  simulate->add_flag("--empty-grasp", empty_grasp, "Grasp beside the target");
  simulate->add_option("--views", views, "Comma-separated view names");

  auto* maps = app.add_subcommand("render-maps", "Write action-map and ray-map PNGs for a trajectory");
  maps->add_option("--in", in, "Trajectory JSON")->required();
  maps->add_option("--views", views);

  auto* segment = app.add_subcommand("segment", "Detect the contact phase of a trajectory");
  segment->add_option("--in", in, "Trajectory JSON")->required();
  segment->add_option("--theta-close", theta_close);
  segment->add_option("--theta-open", theta_open);

  auto* augment = app.add_subcommand("augment", "Fetch-phase augmentation with reversed generation");
  augment->add_option("--samples", samples);
  augment->add_option("--seeds", seeds);
  augment->add_option("--look-back", look_back);
  augment->add_option("--views", views);

  auto* train = app.add_subcommand("train", "Train the world model on a synthetic corpus");
  train->add_option("--episodes", episodes);
  train->add_option("--steps", steps);
  train->add_option("--failure-fraction", failure_fraction);

  auto* rollout = app.add_subcommand("rollout", "Roll the scripted plan through a backend");
  rollout->add_option("--backend", backend, "oracle | learned");
  rollout->add_option("--chunks", chunks);
  rollout->add_option("--task", task);
  rollout->add_option("--views", views);
  rollout->add_option("--sigma", sigma);
  rollout->add_option("--checkpoint", checkpoint);
  rollout->add_flag("--closed-loop", closed_loop, "Stop at the termination threshold");

  auto* evaluate = app.add_subcommand("evaluate", "Success rates of noise-graded scripted policies");
  evaluate->add_option("--sigmas", sigmas);
  evaluate->add_option("--tasks", tasks);
  evaluate->add_option("--episodes", episodes);
  evaluate->add_option("--views", views);

  auto* compare = app.add_subcommand("compare", "Rank consistency of a backend against the oracle");
  compare->add_option("--candidate", candidate, "oracle | learned");
  compare->add_option("--checkpoint", checkpoint);
  compare->add_option("--sigmas", sigmas);
  compare->add_option("--tasks", tasks);
  compare->add_option("--episodes", episodes);
  compare->add_option("--views", views);

  auto* serve_cmd = app.add_subcommand("serve", "HTTP API for interactive stepping and verdicts");
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--checkpoint", checkpoint);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    g.settings = g.config.empty() ? Settings{} : Settings::from_json(read_json(g.config));
    if (*simulate) return cmd_simulate(g, task, episodes, sigma, empty_grasp, views);
    if (*maps) return cmd_render_maps(g, in, views);
    if (*segment) return cmd_segment(in, theta_close, theta_open);
    if (*augment) return cmd_augment(g, samples, seeds, look_back, views);
    if (*train) return cmd_train(g, episodes > 1 ? episodes : 0, steps, failure_fraction);
    if (*rollout) return cmd_rollout(g, backend, chunks, task, views, sigma, checkpoint, closed_loop);
    if (*evaluate) return cmd_evaluate(g, sigmas, tasks, episodes > 1 ? episodes : 200, views);
    if (*compare) return cmd_compare(g, candidate, checkpoint, sigmas, tasks, episodes > 1 ? episodes : 200, views);
    if (*serve_cmd) return cmd_serve(g, host, port, checkpoint);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
