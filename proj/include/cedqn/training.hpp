#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cedqn/agent.hpp"
#include "cedqn/gridworld.hpp"

namespace cedqn {

enum class AlgoKind { kDqn, kCeDqn };

std::string algo_name(AlgoKind algo);
AlgoKind algo_from_name(const std::string& name);

// Table 1 team compositions; the only legal (standard, disturbance) pairs.
struct TeamSpec {
  int team_id = 1;
  int standard_count = 6;
  int disturbance_count = 0;
};

TeamSpec team_from_id(int team_id);
TeamSpec team_from_counts(int standard_count, int disturbance_count);

struct RunConfig {
  AlgoKind algo = AlgoKind::kCeDqn;
  TeamSpec team;
  EnvConfig env;
  HyperParams hyper;
  int episodes = 3000;
  uint64_t seed = 1;
  double eval_epsilon = 0.0;
  double standard_capacity = 3.0;
  double disturbance_capacity = 0.0;

  // Fills env.num_robots and env.capacities from the team spec
  // (standard robots first).
  void resolve();
  void validate() const;
};

struct EpisodeStats {
  int episode = 0;
  std::vector<double> robot_rewards;
  double team_reward = 0.0;
  double discounted_return = 0.0;
  int steps = 0;
  int boxes_lifted = 0;
  int64_t messages_sent = 0;
  int64_t gate_decisions = 0;
  double mean_q_loss = 0.0;
  double mean_comm_loss = 0.0;
};

struct MetricsLog {
  std::string run_id;
  AlgoKind algo = AlgoKind::kDqn;
  int team_id = 1;
  int task_size = 0;
  uint64_t seed = 0;
  uint64_t config_hash = 0;
  std::vector<EpisodeStats> episodes;
};

// Sum of gamma^t * rewards[t]; gamma must lie in [0, 1).
double discounted_return(std::span<const double> rewards, double gamma);

enum class RunMode { kTrain, kEval };

// One episode of the two-phase step loop: every communicating agent gates
// and broadcasts, then every agent collects, augments, and acts; the
// environment advances; in train mode transitions are stored (next states
// carry the message observed alongside them), each agent takes one
// mini-batch step per environment step, and the gate updates at episode
// end. Eval mode touches no parameters.
EpisodeStats run_episode(std::vector<DqnAgent>& agents, const EnvConfig& env_config,
                         RunMode mode, const HyperParams& hyper, double eval_epsilon,
                         int64_t& global_env_steps);

std::vector<DqnAgent> make_agents(const RunConfig& config);

struct TrainResult {
  MetricsLog log;
  std::vector<DqnAgent> agents;
};

TrainResult train_run_with_agents(const RunConfig& config);
MetricsLog train_run(const RunConfig& config);

struct CompletionResult {
  std::vector<int> per_trial_steps;
  std::vector<bool> timed_out;
  double mean_steps = 0.0;
  double timeout_fraction = 0.0;
};

// Eval-mode episodes on fresh derived seeds; incomplete episodes count at
// max_steps and set a timeout flag.
CompletionResult evaluate_completion_time(std::vector<DqnAgent>& agents,
                                          const EnvConfig& env_config, int trials,
                                          uint64_t seed, double eval_epsilon,
                                          const HyperParams& hyper);

struct ComparisonSpec {
  std::vector<AlgoKind> algos;
  std::vector<int> team_ids;
  std::vector<int> task_sizes;
  std::vector<uint64_t> seeds;
  int episodes = 3000;
  int trials = 10;
  int train_task_size = 0;  // 0: train at base.env.task_size
  RunConfig base;
};

struct ComparisonRow {
  AlgoKind algo = AlgoKind::kDqn;
  int team_id = 1;
  int task_size = 0;
  uint64_t seed = 0;
  double mean_completion_steps = 0.0;
  double timeout_fraction = 0.0;
  double final_reward_ma = 0.0;
  bool failed = false;
  std::string error;
};

// Trains one team per (algo, team, seed) at the training task size, then
// evaluates it frozen on every task size in the sweep. Cells are
// independent; rows come back sorted by (algo, team, task_size, seed)
// regardless of worker scheduling. Failed cells carry an error marker and
// do not stop the run.
std::vector<ComparisonRow> run_comparison(const ComparisonSpec& spec, int jobs,
                                          std::vector<MetricsLog>* cell_logs = nullptr);

// Agent checkpointing: <prefix>_q.ckpt, <prefix>_target.ckpt,
// <prefix>_comm.ckpt plus a <prefix>.json manifest.
void save_agent(const DqnAgent& agent, const std::string& dir, const std::string& prefix);
DqnAgent load_agent(const std::string& dir, const std::string& prefix, uint64_t draw_seed);

}  // namespace cedqn
