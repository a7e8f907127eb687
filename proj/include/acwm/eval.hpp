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

// Closed-loop policy evaluation through a world-model backend: episodes,
// termination, verdicts, success-rate aggregation and backend comparison.

#ifndef ACWM_EVAL_HPP_
#define ACWM_EVAL_HPP_

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "acwm/backend.hpp"
#include "acwm/io.hpp"
#include "acwm/world.hpp"

namespace acwm {

enum class Termination { kThreshold, kMaxChunks, kBackendError, kPolicyError };
const char* to_string(Termination t);
Termination termination_from_string(std::string_view s);

struct RolloutRecord {
  std::string episode_id;
  std::string task_id;
  std::string backend_id;
  std::vector<std::vector<ArmFrame>> chunk_actions;
  std::vector<double> chunk_norms;  // mean per-step delta norm per chunk
  FrameGrid frames;                 // chunks * K frames (empty if not kept)
  Termination termination = Termination::kMaxChunks;
  std::string error;
  double seconds = 0.0;

  int chunks() const { return static_cast<int>(chunk_actions.size()); }
  // Everything but timing.
  std::uint64_t hash() const;
  Json to_json() const;  // frames excluded
  static RolloutRecord from_json(const Json& j);
};

struct EpisodeConfig {
  double eps_term = 1e-3;
  int max_chunks = 30;
  int chunk_size = 16;
  bool keep_frames = true;

  void validate() const;
};

// Mean over the chunk of the per-step delta norm (unweighted root sum of
// squares of position, wrapped rpy and openness deltas over all arms). The
// first step is taken from `previous`.
double mean_delta_norm(const ArmFrame& previous, std::span<const ArmFrame> chunk);

// Loop: policy -> K actions -> backend -> K frames -> observation. The chunk
// is generated before the termination test, so a record never continues
// past a chunk that met the threshold.
RolloutRecord run_episode(Policy& policy, WorldModelBackend& backend,
                          const std::vector<Image>& initial_frames, const ArmFrame& initial_arms,
                          const std::string& episode_id, const std::string& task_id,
                          const EpisodeConfig& config);

enum class Label { kSuccess, kFailure };
const char* to_string(Label l);
Label label_from_string(std::string_view s);

struct Verdict {
  std::string rollout_id;
  std::string evaluator;  // a person, or "auto"
  Label label = Label::kFailure;
  std::string timestamp;  // ISO-8601 UTC

  Json to_json() const;
  static Verdict from_json(const Json& j);
};

std::string utc_timestamp();

class NotAdjudicableError : public Error {
 public:
  using Error::Error;
};

// Success of the final true state. Only the oracle backend carries ground
// truth; anything else needs human verdicts.
Verdict adjudicate_auto(const RolloutRecord& record, const WorldModelBackend& backend,
                        const TaskSpec& task);

// Strict majority; ties count as failure.
Label majority(std::span<const Verdict> verdicts);

struct SuccessRate {
  int episodes = 0;
  int successes = 0;
  double rate = 0.0;
};

SuccessRate aggregate_sr(const std::map<std::string, std::vector<Verdict>>& by_rollout);

class DuplicateVerdictError : public Error {
 public:
  using Error::Error;
};

// In-memory verdict set keyed by rollout; one label per (rollout, evaluator).
class VerdictBook {
 public:
  void add(const Verdict& v);
  bool contains(const std::string& rollout, const std::string& evaluator) const;
  const std::map<std::string, std::vector<Verdict>>& by_rollout() const { return verdicts_; }

 private:
  std::map<std::string, std::vector<Verdict>> verdicts_;
};

// Backend comparison -----------------------------------------------------------

struct PolicyCase {
  std::string id;
  PolicyNoise noise;
};

struct TaskCase {
  std::string id;
  Scenario scenario;
};

using BackendFactory = std::function<std::unique_ptr<WorldModelBackend>(const Scenario&)>;

struct SrTable {
  std::vector<std::string> tasks;
  std::vector<std::string> policies;
  Eigen::MatrixXd rate;  // tasks x policies
  int episodes = 0;
};

struct EvaluationConfig {
  int episodes = 200;
  std::uint64_t seed = 1;
  EpisodeConfig episode{1e-3, 30, 16, false};
};

// Auto-adjudicated success rates, one cell per (task, policy). Episode e of
// every cell uses policy seed `seed + e` so tables are paired across backends.
SrTable evaluate_success_rates(const std::vector<PolicyCase>& policies,
                               const std::vector<TaskCase>& tasks, const BackendFactory& backend,
                               const EvaluationConfig& config);

// Average ranks (ties share the mean rank).
Eigen::VectorXd average_ranks(const Eigen::VectorXd& x);
// Pearson correlation of average ranks. When either side is constant the
// correlation is 1 if the rank vectors are identical and 0 otherwise.
double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct ConsistencyReport {
  SrTable oracle;
  SrTable candidate;
  double rank_correlation_tasks = 0.0;     // over per-task mean SR
  double rank_correlation_policies = 0.0;  // over per-policy mean SR
  Json to_json() const;
};

ConsistencyReport compare_tables(const SrTable& oracle, const SrTable& candidate);
ConsistencyReport compare_backends(const std::vector<PolicyCase>& policies,
                                   const std::vector<TaskCase>& tasks,
                                   const BackendFactory& oracle, const BackendFactory& candidate,
                                   const EvaluationConfig& config);

}  // namespace acwm

#endif  // ACWM_EVAL_HPP_
