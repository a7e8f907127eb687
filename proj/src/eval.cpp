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

#include "acwm/eval.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <numeric>

namespace acwm {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::kThreshold: return "threshold";
    case Termination::kMaxChunks: return "max_chunks";
    case Termination::kBackendError: return "backend_error";
    case Termination::kPolicyError: return "policy_error";
  }
  return "unknown";
}

Termination termination_from_string(std::string_view s) {
  for (Termination t : {Termination::kThreshold, Termination::kMaxChunks, Termination::kBackendError,
                        Termination::kPolicyError})
    if (s == to_string(t)) return t;
  throw ValidationError("unknown termination reason '" + std::string(s) + "'");
}

const char* to_string(Label l) { return l == Label::kSuccess ? "success" : "failure"; }

Label label_from_string(std::string_view s) {
  if (s == "success") return Label::kSuccess;
  if (s == "failure") return Label::kFailure;
  throw ValidationError("label must be 'success' or 'failure'");
}

std::uint64_t RolloutRecord::hash() const {
  std::uint64_t h = fnv1a(episode_id);
  h = fnv1a(task_id, h);
  h = fnv1a(backend_id, h);
  for (const auto& chunk : chunk_actions)
    for (const ArmFrame& f : chunk)
      for (const ActionState& s : f) {
        for (int i = 0; i < 3; ++i) h = fnv1a_pod(s.pose.position[i], h);
        for (int i = 0; i < 3; ++i) h = fnv1a_pod(s.pose.rpy[i], h);
        h = fnv1a_pod(s.openness, h);
      }
  for (double n : chunk_norms) h = fnv1a_pod(n, h);
  h = hash_frames(frames, h);
  h = fnv1a_pod(termination, h);
  return fnv1a(error, h);
}

Json RolloutRecord::to_json() const {
  Json chunks = Json::array();
  for (const auto& chunk : chunk_actions) {
    Json rows = Json::array();
    for (const ArmFrame& f : chunk) {
      Json row = Json::array();
      for (const ActionState& s : f) {
        for (int i = 0; i < 3; ++i) row.push_back(s.pose.position[i]);
        for (int i = 0; i < 3; ++i) row.push_back(s.pose.rpy[i]);
        row.push_back(s.openness);
      }
      rows.push_back(std::move(row));
    }
    chunks.push_back(std::move(rows));
  }
  return Json{{"episode_id", episode_id}, {"task_id", task_id},   {"backend_id", backend_id},
              {"chunks", chunk_actions.size()}, {"chunk_actions", chunks},
              {"chunk_norms", chunk_norms}, {"termination", to_string(termination)},
              {"error", error},           {"seconds", seconds},   {"frames", frames.size()}};
}

RolloutRecord RolloutRecord::from_json(const Json& j) {
  RolloutRecord r;
  try {
    r.episode_id = j.at("episode_id").get<std::string>();
    r.task_id = j.at("task_id").get<std::string>();
    r.backend_id = j.at("backend_id").get<std::string>();
    r.termination = termination_from_string(j.at("termination").get<std::string>());
    r.error = j.value("error", "");
    r.seconds = j.value("seconds", 0.0);
    if (j.contains("chunk_norms")) r.chunk_norms = j.at("chunk_norms").get<std::vector<double>>();
    for (const Json& chunk : j.at("chunk_actions")) {
      std::vector<ArmFrame> frames;
      for (const Json& row : chunk) {
        require(row.size() % 7 == 0 && !row.empty(), "action row width must be a multiple of 7");
        ArmFrame f;
        for (std::size_t a = 0; a < row.size() / 7; ++a) {
          ActionState s;
          s.arm = row.size() == 7 ? ArmId::kRight : static_cast<ArmId>(a);
          auto at = [&](std::size_t i) { return row.at(7 * a + i).get<double>(); };
          s.pose.position = Eigen::Vector3d(at(0), at(1), at(2));
          s.pose.rpy = Eigen::Vector3d(at(3), at(4), at(5));
          s.openness = at(6);
          f.push_back(s);
        }
        frames.push_back(std::move(f));
      }
      r.chunk_actions.push_back(std::move(frames));
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed rollout record: ") + e.what());
  }
  return r;
}

void EpisodeConfig::validate() const {
  require(eps_term > 0.0, "termination threshold must be positive");
  require(max_chunks >= 1 && chunk_size >= 1, "bad chunk limits");
}

double mean_delta_norm(const ArmFrame& previous, std::span<const ArmFrame> chunk) {
  require(!chunk.empty(), "empty chunk");
  double total = 0.0;
  const ArmFrame* prev = &previous;
  for (const ArmFrame& f : chunk) {
    require(f.size() == prev->size(), "arm count changes within the chunk");
    double sq = 0.0;
    for (std::size_t a = 0; a < f.size(); ++a)
      sq += delta_action(f[a], (*prev)[a]).as_vector().squaredNorm();
    total += std::sqrt(sq);
    prev = &f;
  }
  return total / static_cast<double>(chunk.size());
}

RolloutRecord run_episode(Policy& policy, WorldModelBackend& backend,
                          const std::vector<Image>& initial_frames, const ArmFrame& initial_arms,
                          const std::string& episode_id, const std::string& task_id,
                          const EpisodeConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RolloutRecord rec;
  rec.episode_id = episode_id;
  rec.task_id = task_id;
  rec.backend_id = backend.id();
  Observation obs{initial_frames, initial_arms, 0};
  SparseMemory memory;
  rec.termination = Termination::kMaxChunks;
  for (int c = 0; c < config.max_chunks; ++c) {
    std::vector<ArmFrame> actions;
    try {
      actions = policy.next_chunk(obs);
      require(actions.size() == static_cast<std::size_t>(config.chunk_size),
              "policy returned the wrong chunk length");
    } catch (const std::exception& e) {
      rec.termination = Termination::kPolicyError;
      rec.error = e.what();
      break;
    }
    FrameGrid frames;
    try {
      frames = backend.generate({obs.frames, obs.arms, &memory, actions, c});
      if (frames.size() != actions.size()) throw Error("backend returned the wrong frame count");
    } catch (const std::exception& e) {
      rec.termination = Termination::kBackendError;
      rec.error = BackendError(c, e.what()).what();
      break;
    }
    const double norm = mean_delta_norm(obs.arms, actions);
    if (static_cast<int>(actions.size()) >= memory.capacity()) memory.update(frames, actions);
    obs = Observation{frames.back(), actions.back(), c + 1};
    rec.chunk_actions.push_back(std::move(actions));
    rec.chunk_norms.push_back(norm);
    if (config.keep_frames)
      for (auto& f : frames) rec.frames.push_back(std::move(f));
    if (norm < config.eps_term) {
      rec.termination = Termination::kThreshold;
      break;
    }
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

Json Verdict::to_json() const {
  return Json{{"rollout_id", rollout_id}, {"evaluator", evaluator}, {"label", to_string(label)},
              {"timestamp", timestamp}};
}

Verdict Verdict::from_json(const Json& j) {
  try {
    Verdict v{j.at("rollout_id").get<std::string>(), j.at("evaluator").get<std::string>(),
              label_from_string(j.at("label").get<std::string>()), j.value("timestamp", "")};
    require(!v.evaluator.empty(), "evaluator must be non-empty");
    return v;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed verdict: ") + e.what());
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Verdict adjudicate_auto(const RolloutRecord& record, const WorldModelBackend& backend,
                        const TaskSpec& task) {
  const auto* oracle = dynamic_cast<const OracleBackend*>(&backend);
  if (oracle == nullptr || record.backend_id != "oracle")
    throw NotAdjudicableError("rollout " + record.episode_id + " ran on backend '" +
                              record.backend_id + "', which has no ground truth");
  return {record.episode_id, "auto", success(oracle->state(), task) ? Label::kSuccess : Label::kFailure,
          utc_timestamp()};
}

Label majority(std::span<const Verdict> verdicts) {
  require(!verdicts.empty(), "majority of no verdicts");
  const auto wins = std::count_if(verdicts.begin(), verdicts.end(),
                                  [](const Verdict& v) { return v.label == Label::kSuccess; });
  return 2 * wins > static_cast<std::ptrdiff_t>(verdicts.size()) ? Label::kSuccess : Label::kFailure;
}

SuccessRate aggregate_sr(const std::map<std::string, std::vector<Verdict>>& by_rollout) {
  require(!by_rollout.empty(), "no episodes to aggregate");
  SuccessRate sr;
  for (const auto& [id, verdicts] : by_rollout) {
    require(!verdicts.empty(), "rollout " + id + " has no verdicts");
    ++sr.episodes;
    if (majority(verdicts) == Label::kSuccess) ++sr.successes;
  }
  sr.rate = static_cast<double>(sr.successes) / sr.episodes;
  return sr;
}

void VerdictBook::add(const Verdict& v) {
  require(!v.rollout_id.empty() && !v.evaluator.empty(), "verdict needs a rollout and an evaluator");
  if (contains(v.rollout_id, v.evaluator))
    throw DuplicateVerdictError("evaluator '" + v.evaluator + "' already judged rollout " + v.rollout_id);
  verdicts_[v.rollout_id].push_back(v);
}

bool VerdictBook::contains(const std::string& rollout, const std::string& evaluator) const {
  const auto it = verdicts_.find(rollout);
  if (it == verdicts_.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [&](const Verdict& v) { return v.evaluator == evaluator; });
}

// Backend comparison -----------------------------------------------------------

SrTable evaluate_success_rates(const std::vector<PolicyCase>& policies,
                               const std::vector<TaskCase>& tasks, const BackendFactory& backend,
                               const EvaluationConfig& config) {
  require(!policies.empty() && !tasks.empty(), "need at least one policy and one task");
  require(config.episodes >= 1, "need at least one episode per cell");
  SrTable table;
  table.episodes = config.episodes;
  table.rate.setZero(static_cast<Eigen::Index>(tasks.size()), static_cast<Eigen::Index>(policies.size()));
  for (const TaskCase& t : tasks) table.tasks.push_back(t.id);
  for (const PolicyCase& p : policies) table.policies.push_back(p.id);
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const Scenario& sc = tasks[ti].scenario;
    for (std::size_t pi = 0; pi < policies.size(); ++pi) {
      std::map<std::string, std::vector<Verdict>> verdicts;
      for (int e = 0; e < config.episodes; ++e) {
        auto be = backend(sc);
        const std::string id = tasks[ti].id + "/" + policies[pi].id + "/" + std::to_string(e);
        ScriptedPolicy policy(sc.world, sc.task, policies[pi].noise, config.seed + e,
                              config.episode.chunk_size);
        const RolloutRecord rec = run_episode(policy, *be, render_views(sc.world, be->rig()),
                                              {sc.world.gripper}, id, tasks[ti].id, config.episode);
        verdicts[id].push_back(adjudicate_auto(rec, *be, sc.task));
      }
      table.rate(ti, pi) = aggregate_sr(verdicts).rate;
    }
  }
  return table;
}

Eigen::VectorXd average_ranks(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x[a] < x[b]; });
  Eigen::VectorXd ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  require(a.size() == b.size() && a.size() >= 1, "rank correlation needs equal, non-empty inputs");
  const Eigen::VectorXd ra = average_ranks(a), rb = average_ranks(b);
  const Eigen::VectorXd ca = ra.array() - ra.mean(), cb = rb.array() - rb.mean();
  const double va = ca.squaredNorm(), vb = cb.squaredNorm();
  if (va == 0.0 || vb == 0.0) return ra == rb ? 1.0 : 0.0;
  return ca.dot(cb) / std::sqrt(va * vb);
}

ConsistencyReport compare_tables(const SrTable& oracle, const SrTable& candidate) {
  require(oracle.tasks == candidate.tasks, "oracle and candidate task sets differ");
  require(oracle.policies == candidate.policies, "oracle and candidate policy sets differ");
  ConsistencyReport r{oracle, candidate, 0.0, 0.0};
  r.rank_correlation_tasks = spearman(oracle.rate.rowwise().mean(), candidate.rate.rowwise().mean());
  r.rank_correlation_policies =
      spearman(oracle.rate.colwise().mean().transpose(), candidate.rate.colwise().mean().transpose());
  return r;
}

ConsistencyReport compare_backends(const std::vector<PolicyCase>& policies,
                                   const std::vector<TaskCase>& tasks, const BackendFactory& oracle,
                                   const BackendFactory& candidate, const EvaluationConfig& config) {
  return compare_tables(evaluate_success_rates(policies, tasks, oracle, config),
                        evaluate_success_rates(policies, tasks, candidate, config));
}

Json ConsistencyReport::to_json() const {
  auto table_json = [](const SrTable& t) {
    Json cells = Json::array();
    const Eigen::VectorXd task_mean = t.rate.rowwise().mean();
    const Eigen::VectorXd policy_mean = t.rate.colwise().mean().transpose();
    const Eigen::VectorXd task_rank = average_ranks(task_mean);
    const Eigen::VectorXd policy_rank = average_ranks(policy_mean);
    for (std::size_t i = 0; i < t.tasks.size(); ++i)
      for (std::size_t j = 0; j < t.policies.size(); ++j)
        cells.push_back({{"task", t.tasks[i]}, {"policy", t.policies[j]}, {"sr", t.rate(i, j)}});
    Json tasks = Json::array(), pols = Json::array();
    for (std::size_t i = 0; i < t.tasks.size(); ++i)
      tasks.push_back({{"task", t.tasks[i]}, {"sr", task_mean[i]}, {"rank", task_rank[i]}});
    for (std::size_t j = 0; j < t.policies.size(); ++j)
      pols.push_back({{"policy", t.policies[j]}, {"sr", policy_mean[j]}, {"rank", policy_rank[j]}});
    return Json{{"episodes_per_cell", t.episodes}, {"cells", cells}, {"tasks", tasks}, {"policies", pols}};
  };
  return Json{{"oracle", table_json(oracle)},
              {"candidate", table_json(candidate)},
              {"spearman_tasks", rank_correlation_tasks},
              {"spearman_policies", rank_correlation_policies}};
}

}  // namespace acwm
