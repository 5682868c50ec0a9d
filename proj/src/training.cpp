#include "cedqn/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "cedqn/errors.hpp"
#include "cedqn/metrics.hpp"

namespace cedqn {

std::string algo_name(AlgoKind algo) { return algo == AlgoKind::kDqn ? "dqn" : "cedqn"; }

AlgoKind algo_from_name(const std::string& name) {
  if (name == "dqn") return AlgoKind::kDqn;
  if (name == "cedqn") return AlgoKind::kCeDqn;
  throw ConfigError("algo: expected \"dqn\" or \"cedqn\", got \"" + name + "\"");
}

TeamSpec team_from_id(int team_id) {
  switch (team_id) {
    case 1: return {1, 6, 0};
    case 2: return {2, 5, 1};
    case 3: return {3, 4, 2};
    case 4: return {4, 3, 3};
    default: throw ConfigError("team: team_id must be 1..4");
  }
}

TeamSpec team_from_counts(int standard_count, int disturbance_count) {
  for (int id = 1; id <= 4; ++id) {
    const TeamSpec t = team_from_id(id);
    if (t.standard_count == standard_count && t.disturbance_count == disturbance_count)
      return t;
  }
  throw ConfigError("team: composition (" + std::to_string(standard_count) + "," +
                    std::to_string(disturbance_count) + ") is not one of the four team rows");
}

void RunConfig::resolve() {
  env.num_robots = team.standard_count + team.disturbance_count;
  env.capacities.clear();
  env.capacities.insert(env.capacities.end(), team.standard_count, standard_capacity);
  env.capacities.insert(env.capacities.end(), team.disturbance_count, disturbance_capacity);
}

void RunConfig::validate() const {
  if (episodes < 1) throw ConfigError("episodes: must be >= 1");
  if (!(eval_epsilon >= 0.0 && eval_epsilon <= 1.0))
    throw ConfigError("eval_epsilon: must stay in [0,1]");
  team_from_counts(team.standard_count, team.disturbance_count);
  env.validate();
  hyper.validate();
}

double discounted_return(std::span<const double> rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("discounted_return: gamma must satisfy 0 <= gamma < 1");
  double total = 0.0;
  double weight = 1.0;
  for (double r : rewards) {
    total += weight * r;
    weight *= gamma;
  }
  return total;
}

EpisodeStats run_episode(std::vector<DqnAgent>& agents, const EnvConfig& env_config,
                         RunMode mode, const HyperParams& hyper, double eval_epsilon,
                         int64_t& global_env_steps) {
  const int n = env_config.num_robots;
  if (static_cast<int>(agents.size()) != n)
    throw std::invalid_argument("run_episode: one agent per robot required");
  const bool train = mode == RunMode::kTrain;

  auto [world, obs] = reset(env_config);
  MessageBus bus;
  EpisodeStats stats;
  stats.robot_rewards.assign(n, 0.0);
  std::vector<EpisodeTrace> traces(n);
  std::vector<double> team_reward_per_step;

  struct PendingTransition {
    std::array<double, kAugDim> state{};
    int action = 0;
    double reward = 0.0;
    bool active = false;
  };
  std::vector<PendingTransition> pending(n);
  std::vector<std::array<double, kAugDim>> aug(n);
  std::vector<double> gate_probs(n, 0.0);
  std::vector<char> gate_sends(n, 0);
  std::vector<Action> actions(n, Action::kStay);
  double q_loss_sum = 0.0;
  int64_t q_loss_count = 0;

  bool done = false;
  while (!done) {
    bus.flush();
    for (int i = 0; i < n; ++i) {
      if (!agents[i].comm_enabled()) continue;
      const auto [probability, send] = agents[i].comm_gate(obs[i]);
      gate_probs[i] = probability;
      gate_sends[i] = send ? 1 : 0;
      stats.gate_decisions += 1;
      if (send) {
        bus.broadcast({i, message_payload(obs[i])});
        stats.messages_sent += 1;
      }
    }

    const double epsilon =
        train ? epsilon_at(hyper.epsilon, global_env_steps) : eval_epsilon;
    for (int i = 0; i < n; ++i) {
      AggregatedMessage agg;
      if (agents[i].comm_enabled()) agg = bus.collect(i);
      aug[i] = augment(obs[i], agg.values);
      if (train && pending[i].active) {
        // The previous step's transition completes now that the message
        // observed with the new state is known.
        agents[i].store_transition(
            {pending[i].state, pending[i].action, pending[i].reward, aug[i], false});
        pending[i].active = false;
      }
      actions[i] = agents[i].select_action(aug[i], epsilon, agents[i].draw_rng());
    }

    const StepOutcome outcome = world.step(actions);
    global_env_steps += 1;
    done = outcome.done;

    double team_r = 0.0;
    for (int i = 0; i < n; ++i) {
      stats.robot_rewards[i] += outcome.rewards[i];
      team_r += outcome.rewards[i];
    }
    team_reward_per_step.push_back(team_r);

    if (train) {
      for (int i = 0; i < n; ++i) {
        if (done) {
          const std::array<double, kMsgDim> zero{};
          agents[i].store_transition({aug[i], static_cast<int>(actions[i]),
                                      outcome.rewards[i],
                                      augment(outcome.observations[i], zero), true});
        } else {
          pending[i] = {aug[i], static_cast<int>(actions[i]), outcome.rewards[i], true};
        }
      }
      for (int i = 0; i < n; ++i) {
        if (const auto loss = agents[i].train_batch(agents[i].draw_rng())) {
          q_loss_sum += *loss;
          q_loss_count += 1;
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      if (agents[i].comm_enabled())
        traces[i].push_back(
            {obs[i], gate_probs[i], gate_sends[i] != 0, outcome.rewards[i]});
    }
    obs = outcome.observations;
  }

  stats.steps = world.step_count();
  stats.boxes_lifted = world.boxes_lifted();
  for (double r : stats.robot_rewards) stats.team_reward += r;
  stats.discounted_return = discounted_return(team_reward_per_step, hyper.gamma);
  stats.mean_q_loss = q_loss_count > 0 ? q_loss_sum / q_loss_count : 0.0;
  if (train) {
    double comm_sum = 0.0;
    int comm_agents = 0;
    for (int i = 0; i < n; ++i) {
      if (!agents[i].comm_enabled()) continue;
      comm_sum += agents[i].update_comm_policy(traces[i]);
      comm_agents += 1;
    }
    stats.mean_comm_loss = comm_agents > 0 ? comm_sum / comm_agents : 0.0;
  }
  return stats;
}

std::vector<DqnAgent> make_agents(const RunConfig& config) {
  const Rng root(config.seed);
  const bool comm = config.algo == AlgoKind::kCeDqn;
  std::vector<DqnAgent> agents;
  agents.reserve(config.env.num_robots);
  for (int i = 0; i < config.env.num_robots; ++i)
    agents.emplace_back(i, comm, config.hyper,
                        root.derive(stream::kAgentBase + i).root_seed());
  return agents;
}

namespace {

std::string make_run_id(const RunConfig& config) {
  // Deliberately excludes the algorithm so paired dqn/cedqn runs share ids.
  return "t" + std::to_string(config.team.team_id) + "-k" +
         std::to_string(config.env.task_size) + "-e" + std::to_string(config.episodes) +
         "-s" + std::to_string(config.seed);
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t config_hash(const RunConfig& c) {
  std::string s = algo_name(c.algo) + "|" + std::to_string(c.team.team_id) + "|" +
                  std::to_string(c.env.task_size) + "|" + std::to_string(c.episodes) +
                  "|" + std::to_string(c.seed) + "|" + std::to_string(c.hyper.gamma) +
                  "|" + std::to_string(c.env.grid_width) + "x" +
                  std::to_string(c.env.grid_height);
  return fnv1a(s);
}

}  // namespace

TrainResult train_run_with_agents(const RunConfig& config) {
  config.validate();
  if (static_cast<int>(config.env.capacities.size()) != config.env.num_robots)
    throw std::invalid_argument("train_run: config not resolved");

  TrainResult result;
  result.agents = make_agents(config);
  result.log.run_id = make_run_id(config);
  result.log.algo = config.algo;
  result.log.team_id = config.team.team_id;
  result.log.task_size = config.env.task_size;
  result.log.seed = config.seed;
  result.log.config_hash = config_hash(config);
  result.log.episodes.reserve(config.episodes);

  const Rng root(config.seed);
  int64_t global_env_steps = 0;
  for (int ep = 0; ep < config.episodes; ++ep) {
    EnvConfig ep_env = config.env;
    ep_env.seed = root.derive(stream::kEpisodeBase + static_cast<uint64_t>(ep)).root_seed();
    EpisodeStats stats = run_episode(result.agents, ep_env, RunMode::kTrain, config.hyper,
                                     config.eval_epsilon, global_env_steps);
    stats.episode = ep;
    result.log.episodes.push_back(std::move(stats));
  }
  return result;
}

MetricsLog train_run(const RunConfig& config) { return train_run_with_agents(config).log; }

CompletionResult evaluate_completion_time(std::vector<DqnAgent>& agents,
                                          const EnvConfig& env_config, int trials,
                                          uint64_t seed, double eval_epsilon,
                                          const HyperParams& hyper) {
  if (trials < 1) throw std::invalid_argument("evaluate: trials must be >= 1");
  const Rng root(seed);
  CompletionResult result;
  int64_t scratch_steps = 0;
  for (int trial = 0; trial < trials; ++trial) {
    EnvConfig trial_env = env_config;
    trial_env.seed = root.derive(stream::kEvalBase + static_cast<uint64_t>(trial)).root_seed();
    const EpisodeStats stats = run_episode(agents, trial_env, RunMode::kEval, hyper,
                                           eval_epsilon, scratch_steps);
    const bool completed = stats.boxes_lifted >= env_config.task_size;
    result.per_trial_steps.push_back(completed ? stats.steps
                                               : trial_env.resolved_max_steps());
    result.timed_out.push_back(!completed);
  }
  double total = 0.0;
  int timeouts = 0;
  for (size_t i = 0; i < result.per_trial_steps.size(); ++i) {
    total += result.per_trial_steps[i];
    if (result.timed_out[i]) timeouts += 1;
  }
  result.mean_steps = total / trials;
  result.timeout_fraction = static_cast<double>(timeouts) / trials;
  return result;
}

std::vector<ComparisonRow> run_comparison(const ComparisonSpec& spec, int jobs,
                                          std::vector<MetricsLog>* cell_logs) {
  if (spec.algos.empty() || spec.team_ids.empty() || spec.task_sizes.empty() ||
      spec.seeds.empty())
    throw ConfigError("compare: algos, teams, task_sizes and seeds must be non-empty");
  if (spec.episodes < 1) throw ConfigError("compare: episodes must be >= 1");
  if (spec.trials < 1) throw ConfigError("compare: trials must be >= 1");

  struct Unit {
    AlgoKind algo;
    int team_id;
    uint64_t seed;
  };
  std::vector<Unit> units;
  for (AlgoKind algo : spec.algos)
    for (int team_id : spec.team_ids)
      for (uint64_t seed : spec.seeds) units.push_back({algo, team_id, seed});

  std::vector<std::vector<ComparisonRow>> unit_rows(units.size());
  std::vector<MetricsLog> unit_logs(units.size());

  auto run_unit = [&](size_t u) {
    const Unit& unit = units[u];
    RunConfig config = spec.base;
    config.algo = unit.algo;
    config.team = team_from_id(unit.team_id);
    config.seed = unit.seed;
    config.episodes = spec.episodes;
    if (spec.train_task_size > 0) config.env.task_size = spec.train_task_size;
    config.resolve();

    std::vector<ComparisonRow>& rows = unit_rows[u];
    try {
      TrainResult trained = train_run_with_agents(config);
      unit_logs[u] = trained.log;

      const int window = std::min<int>(100, static_cast<int>(trained.log.episodes.size()));
      double final_ma = 0.0;
      for (size_t e = trained.log.episodes.size() - window; e < trained.log.episodes.size();
           ++e)
        final_ma += trained.log.episodes[e].team_reward;
      final_ma /= window;

      for (int task_size : spec.task_sizes) {
        EnvConfig eval_env = config.env;
        eval_env.task_size = task_size;
        eval_env.validate();
        const uint64_t eval_seed =
            Rng(unit.seed).derive(stream::kEvalBase + static_cast<uint64_t>(task_size))
                .root_seed();
        const CompletionResult completion = evaluate_completion_time(
            trained.agents, eval_env, spec.trials, eval_seed, spec.base.eval_epsilon,
            config.hyper);
        rows.push_back({unit.algo, unit.team_id, task_size, unit.seed,
                        completion.mean_steps, completion.timeout_fraction, final_ma,
                        false, ""});
      }
    } catch (const std::exception& e) {
      rows.clear();
      for (int task_size : spec.task_sizes)
        rows.push_back({unit.algo, unit.team_id, task_size, unit.seed, 0.0, 0.0, 0.0,
                        true, e.what()});
    }
  };

  const int worker_count =
      std::max(1, std::min<int>(jobs > 0 ? jobs : static_cast<int>(
                                                      std::thread::hardware_concurrency()),
                                static_cast<int>(units.size())));
  if (worker_count == 1) {
    for (size_t u = 0; u < units.size(); ++u) run_unit(u);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(worker_count);
    for (int w = 0; w < worker_count; ++w) {
      workers.emplace_back([&] {
        while (true) {
          const size_t u = next.fetch_add(1);
          if (u >= units.size()) return;
          run_unit(u);
        }
      });
    }
    for (auto& t : workers) t.join();
  }

  std::vector<ComparisonRow> rows;
  for (auto& cell : unit_rows) rows.insert(rows.end(), cell.begin(), cell.end());
  std::sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    return std::tie(a.algo, a.team_id, a.task_size, a.seed) <
           std::tie(b.algo, b.team_id, b.task_size, b.seed);
  });
  if (cell_logs) *cell_logs = std::move(unit_logs);
  return rows;
}

void save_agent(const DqnAgent& agent, const std::string& dir, const std::string& prefix) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string base = (fs::path(dir) / prefix).string();
  save_mlp(agent.q_net, base + "_q.ckpt");
  save_mlp(agent.target_net, base + "_target.ckpt");
  save_mlp(agent.comm_net, base + "_comm.ckpt");

  const HyperParams& h = agent.hyper();
  nlohmann::json manifest = {
      {"robot_id", agent.robot_id()},
      {"comm_enabled", agent.comm_enabled()},
      {"train_step", agent.train_steps()},
      {"comm_baseline", agent.comm_baseline},
      {"networks",
       {{"q", prefix + "_q.ckpt"},
        {"target", prefix + "_target.ckpt"},
        {"comm", prefix + "_comm.ckpt"}}},
      {"hyperparams",
       {{"gamma", h.gamma},
        {"epsilon_start", h.epsilon.start},
        {"epsilon_end", h.epsilon.end},
        {"epsilon_decay_steps", h.epsilon.decay_steps},
        {"batch_size", h.batch_size},
        {"buffer_capacity", h.buffer_capacity},
        {"target_sync_interval", h.target_sync_interval},
        {"q_learning_rate", h.q_learning_rate},
        {"comm_learning_rate", h.comm_learning_rate},
        {"comm_threshold", h.comm_threshold}}},
  };
  std::ofstream out(base + ".json", std::ios::trunc);
  if (!out) throw IoError("cannot write agent manifest: " + base + ".json");
  out << manifest.dump(2) << '\n';
}

DqnAgent load_agent(const std::string& dir, const std::string& prefix, uint64_t draw_seed) {
  namespace fs = std::filesystem;
  const std::string base = (fs::path(dir) / prefix).string();
  std::ifstream in(base + ".json");
  if (!in) throw IoError("missing checkpoints: cannot open " + base + ".json");
  nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
  if (manifest.is_discarded())
    throw CheckpointError(CheckpointError::Kind::kMalformed,
                          "malformed checkpoint: invalid agent manifest " + base + ".json");
  HyperParams h;
  try {
    const nlohmann::json& hj = manifest.at("hyperparams");
    h.gamma = hj.at("gamma").get<double>();
    h.epsilon.start = hj.at("epsilon_start").get<double>();
    h.epsilon.end = hj.at("epsilon_end").get<double>();
    h.epsilon.decay_steps = hj.at("epsilon_decay_steps").get<int64_t>();
    h.batch_size = hj.at("batch_size").get<int>();
    h.buffer_capacity = hj.at("buffer_capacity").get<int>();
    h.target_sync_interval = hj.at("target_sync_interval").get<int>();
    h.q_learning_rate = hj.at("q_learning_rate").get<double>();
    h.comm_learning_rate = hj.at("comm_learning_rate").get<double>();
    h.comm_threshold = hj.at("comm_threshold").get<double>();

    DqnAgent agent(manifest.at("robot_id").get<int>(),
                   manifest.at("comm_enabled").get<bool>(), h, draw_seed);
    const nlohmann::json& nets = manifest.at("networks");
    Mlp q = load_mlp((fs::path(dir) / nets.at("q").get<std::string>()).string());
    Mlp target = load_mlp((fs::path(dir) / nets.at("target").get<std::string>()).string());
    Mlp comm = load_mlp((fs::path(dir) / nets.at("comm").get<std::string>()).string());
    copy_weights(q, agent.q_net);
    copy_weights(target, agent.target_net);
    copy_weights(comm, agent.comm_net);
    agent.train_steps_ = manifest.at("train_step").get<int64_t>();
    agent.comm_baseline = manifest.value("comm_baseline", 0.0);
    agent.draw_rng() = Rng(draw_seed);
    return agent;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kMalformed,
                          std::string("malformed checkpoint: agent manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                          std::string("checkpoint shape mismatch: ") + e.what());
  }
}

}  // namespace cedqn
