#include "cedqn/config.hpp"

#include <fstream>
#include <set>

#include "cedqn/errors.hpp"

namespace cedqn {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + path + ": " + what);
}

void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key))
      fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

double get_number(const json& obj, const std::string& path, const std::string& key,
                  double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) fail(path + key, "expected a number");
  return obj[key].get<double>();
}

int64_t get_integer(const json& obj, const std::string& path, const std::string& key,
                    int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) fail(path + key, "expected an integer");
  return obj[key].get<int64_t>();
}

std::string get_string(const json& obj, const std::string& path, const std::string& key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) fail(path + key, "expected a string");
  return obj[key].get<std::string>();
}

EnvConfig parse_env(const json& obj, RunConfig& run) {
  EnvConfig env;
  if (obj.is_null()) return env;
  if (!obj.is_object()) fail("env", "expected an object");
  check_keys(obj, "env",
             {"grid_width", "grid_height", "task_size", "max_active_boxes",
              "box_weight_min", "box_weight_max", "max_steps_per_episode", "step_penalty",
              "lift_reward", "main_task_bonus", "standard_capacity",
              "disturbance_capacity"});
  env.grid_width = static_cast<int>(get_integer(obj, "env.", "grid_width", env.grid_width));
  env.grid_height =
      static_cast<int>(get_integer(obj, "env.", "grid_height", env.grid_height));
  env.task_size = static_cast<int>(get_integer(obj, "env.", "task_size", env.task_size));
  env.max_active_boxes =
      static_cast<int>(get_integer(obj, "env.", "max_active_boxes", env.max_active_boxes));
  env.box_weight_min = get_number(obj, "env.", "box_weight_min", env.box_weight_min);
  env.box_weight_max = get_number(obj, "env.", "box_weight_max", env.box_weight_max);
  env.max_steps_per_episode = static_cast<int>(
      get_integer(obj, "env.", "max_steps_per_episode", env.max_steps_per_episode));
  env.step_penalty = get_number(obj, "env.", "step_penalty", env.step_penalty);
  env.lift_reward = get_number(obj, "env.", "lift_reward", env.lift_reward);
  env.main_task_bonus = get_number(obj, "env.", "main_task_bonus", env.main_task_bonus);
  run.standard_capacity =
      get_number(obj, "env.", "standard_capacity", run.standard_capacity);
  run.disturbance_capacity =
      get_number(obj, "env.", "disturbance_capacity", run.disturbance_capacity);

  if (env.grid_width < 1) fail("env.grid_width", "must be >= 1");
  if (env.grid_height < 1) fail("env.grid_height", "must be >= 1");
  if (env.task_size < 1) fail("env.task_size", "must be >= 1");
  if (env.max_active_boxes < 1) fail("env.max_active_boxes", "must be >= 1");
  if (!(env.box_weight_min > 0.0)) fail("env.box_weight_min", "must be > 0");
  if (env.box_weight_max < env.box_weight_min)
    fail("env.box_weight_max", "must be >= box_weight_min");
  if (env.max_steps_per_episode < 0)
    fail("env.max_steps_per_episode", "must be >= 0 (0 = automatic)");
  if (!(run.standard_capacity >= 0.0)) fail("env.standard_capacity", "must be >= 0");
  if (!(run.disturbance_capacity >= 0.0)) fail("env.disturbance_capacity", "must be >= 0");
  return env;
}

HyperParams parse_hyper(const json& obj) {
  HyperParams h;
  if (obj.is_null()) return h;
  if (!obj.is_object()) fail("hyper", "expected an object");
  check_keys(obj, "hyper",
             {"gamma", "epsilon_start", "epsilon_end", "epsilon_decay_steps", "batch_size",
              "buffer_capacity", "target_sync_interval", "q_learning_rate",
              "comm_learning_rate", "comm_threshold"});
  h.gamma = get_number(obj, "hyper.", "gamma", h.gamma);
  h.epsilon.start = get_number(obj, "hyper.", "epsilon_start", h.epsilon.start);
  h.epsilon.end = get_number(obj, "hyper.", "epsilon_end", h.epsilon.end);
  h.epsilon.decay_steps =
      get_integer(obj, "hyper.", "epsilon_decay_steps", h.epsilon.decay_steps);
  h.batch_size = static_cast<int>(get_integer(obj, "hyper.", "batch_size", h.batch_size));
  h.buffer_capacity =
      static_cast<int>(get_integer(obj, "hyper.", "buffer_capacity", h.buffer_capacity));
  h.target_sync_interval = static_cast<int>(
      get_integer(obj, "hyper.", "target_sync_interval", h.target_sync_interval));
  h.q_learning_rate = get_number(obj, "hyper.", "q_learning_rate", h.q_learning_rate);
  h.comm_learning_rate =
      get_number(obj, "hyper.", "comm_learning_rate", h.comm_learning_rate);
  h.comm_threshold = get_number(obj, "hyper.", "comm_threshold", h.comm_threshold);

  if (!(h.gamma >= 0.0 && h.gamma < 1.0)) fail("hyper.gamma", "must satisfy 0 <= gamma < 1");
  if (!(h.epsilon.start >= 0.0 && h.epsilon.start <= 1.0))
    fail("hyper.epsilon_start", "must stay in [0,1]");
  if (!(h.epsilon.end >= 0.0 && h.epsilon.end <= 1.0))
    fail("hyper.epsilon_end", "must stay in [0,1]");
  if (h.epsilon.decay_steps < 0) fail("hyper.epsilon_decay_steps", "must be >= 0");
  if (h.batch_size < 1) fail("hyper.batch_size", "must be >= 1");
  if (h.buffer_capacity < 1) fail("hyper.buffer_capacity", "must be >= 1");
  if (h.target_sync_interval < 1) fail("hyper.target_sync_interval", "must be >= 1");
  if (!(h.q_learning_rate > 0.0)) fail("hyper.q_learning_rate", "must be > 0");
  if (!(h.comm_learning_rate > 0.0)) fail("hyper.comm_learning_rate", "must be > 0");
  if (!(h.comm_threshold >= 0.0 && h.comm_threshold <= 1.0))
    fail("hyper.comm_threshold", "must stay in [0,1]");
  return h;
}

TeamSpec parse_team(const json& value, const std::string& path) {
  if (value.is_number_integer()) {
    const int id = value.get<int>();
    if (id < 1 || id > 4) fail(path, "team_id must be 1..4");
    return team_from_id(id);
  }
  if (value.is_object()) {
    check_keys(value, path, {"standard", "disturbance"});
    if (!value.contains("standard") || !value.contains("disturbance"))
      fail(path, "needs both standard and disturbance counts");
    if (!value["standard"].is_number_integer() || !value["disturbance"].is_number_integer())
      fail(path, "counts must be integers");
    try {
      return team_from_counts(value["standard"].get<int>(),
                              value["disturbance"].get<int>());
    } catch (const ConfigError&) {
      fail(path, "composition must match one of the four team rows: "
                 "(6,0), (5,1), (4,2), (3,3)");
    }
  }
  fail(path, "expected a team id (1..4) or {standard, disturbance}");
}

ComparisonSpec parse_compare(const json& obj, const RunConfig& base, int trials) {
  if (!obj.is_object()) fail("compare", "expected an object");
  check_keys(obj, "compare",
             {"algos", "teams", "task_sizes", "seeds", "episodes", "trials",
              "train_task_size"});
  ComparisonSpec spec;
  spec.base = base;

  const json algos = obj.value("algos", json::array({"dqn", "cedqn"}));
  if (!algos.is_array() || algos.empty()) fail("compare.algos", "expected a non-empty array");
  for (const json& a : algos) {
    if (!a.is_string()) fail("compare.algos", "expected strings");
    spec.algos.push_back(algo_from_name(a.get<std::string>()));
  }

  const json teams = obj.value("teams", json::array({1, 2, 3, 4}));
  if (!teams.is_array() || teams.empty()) fail("compare.teams", "expected a non-empty array");
  for (const json& t : teams) spec.team_ids.push_back(parse_team(t, "compare.teams").team_id);

  const json sizes = obj.value("task_sizes", json::array({20, 40, 60, 80, 100}));
  if (!sizes.is_array() || sizes.empty())
    fail("compare.task_sizes", "expected a non-empty array");
  for (const json& s : sizes) {
    if (!s.is_number_integer() || s.get<int>() < 1)
      fail("compare.task_sizes", "expected positive integers");
    spec.task_sizes.push_back(s.get<int>());
  }

  const json seeds = obj.value("seeds", json::array({1, 2, 3, 4, 5}));
  if (!seeds.is_array() || seeds.empty()) fail("compare.seeds", "expected a non-empty array");
  for (const json& s : seeds) {
    if (!s.is_number_integer()) fail("compare.seeds", "expected integers");
    spec.seeds.push_back(s.get<uint64_t>());
  }

  spec.episodes = static_cast<int>(get_integer(obj, "compare.", "episodes", base.episodes));
  if (spec.episodes < 1) fail("compare.episodes", "must be >= 1");
  spec.trials = static_cast<int>(get_integer(obj, "compare.", "trials", trials));
  if (spec.trials < 1) fail("compare.trials", "must be >= 1");
  spec.train_task_size =
      static_cast<int>(get_integer(obj, "compare.", "train_task_size", 0));
  if (spec.train_task_size < 0) fail("compare.train_task_size", "must be >= 0");
  return spec;
}

json resolved_json(const LoadedConfig& config) {
  const RunConfig& r = config.run;
  json out = {
      {"algo", algo_name(r.algo)},
      {"team", {{"standard", r.team.standard_count}, {"disturbance", r.team.disturbance_count}}},
      {"episodes", r.episodes},
      {"seed", r.seed},
      {"eval_epsilon", r.eval_epsilon},
      {"trials", config.trials},
      {"env",
       {{"grid_width", r.env.grid_width},
        {"grid_height", r.env.grid_height},
        {"task_size", r.env.task_size},
        {"max_active_boxes", r.env.max_active_boxes},
        {"box_weight_min", r.env.box_weight_min},
        {"box_weight_max", r.env.box_weight_max},
        {"max_steps_per_episode", r.env.resolved_max_steps()},
        {"step_penalty", r.env.step_penalty},
        {"lift_reward", r.env.lift_reward},
        {"main_task_bonus", r.env.main_task_bonus},
        {"standard_capacity", r.standard_capacity},
        {"disturbance_capacity", r.disturbance_capacity}}},
      {"hyper",
       {{"gamma", r.hyper.gamma},
        {"epsilon_start", r.hyper.epsilon.start},
        {"epsilon_end", r.hyper.epsilon.end},
        {"epsilon_decay_steps", r.hyper.epsilon.decay_steps},
        {"batch_size", r.hyper.batch_size},
        {"buffer_capacity", r.hyper.buffer_capacity},
        {"target_sync_interval", r.hyper.target_sync_interval},
        {"q_learning_rate", r.hyper.q_learning_rate},
        {"comm_learning_rate", r.hyper.comm_learning_rate},
        {"comm_threshold", r.hyper.comm_threshold}}},
  };
  if (!config.checkpoint_dir.empty()) out["checkpoint_dir"] = config.checkpoint_dir;
  if (config.compare) {
    const ComparisonSpec& c = *config.compare;
    json algos = json::array();
    for (AlgoKind a : c.algos) algos.push_back(algo_name(a));
    out["compare"] = {{"algos", algos},
                      {"teams", c.team_ids},
                      {"task_sizes", c.task_sizes},
                      {"seeds", c.seeds},
                      {"episodes", c.episodes},
                      {"trials", c.trials},
                      {"train_task_size", c.train_task_size}};
  }
  return out;
}

}  // namespace

LoadedConfig config_from_json(const json& root) {
  if (!root.is_object()) throw ConfigError("config: top level must be a JSON object");
  check_keys(root, "",
             {"algo", "team", "episodes", "seed", "eval_epsilon", "trials",
              "checkpoint_dir", "env", "hyper", "compare"});

  LoadedConfig config;
  RunConfig& run = config.run;
  run.algo = algo_from_name(get_string(root, "", "algo", "cedqn"));
  if (root.contains("team")) run.team = parse_team(root["team"], "team");
  const int64_t episodes = get_integer(root, "", "episodes", run.episodes);
  if (episodes < 1) fail("episodes", "must be >= 1");
  run.episodes = static_cast<int>(episodes);
  if (root.contains("seed")) {
    if (!root["seed"].is_number_integer()) fail("seed", "expected an integer");
    run.seed = root["seed"].get<uint64_t>();
  }
  run.eval_epsilon = get_number(root, "", "eval_epsilon", run.eval_epsilon);
  if (!(run.eval_epsilon >= 0.0 && run.eval_epsilon <= 1.0))
    fail("eval_epsilon", "must stay in [0,1]");
  const int64_t trials = get_integer(root, "", "trials", config.trials);
  if (trials < 1) fail("trials", "must be >= 1");
  config.trials = static_cast<int>(trials);
  config.checkpoint_dir = get_string(root, "", "checkpoint_dir", "");

  run.env = parse_env(root.value("env", json()), run);
  run.hyper = parse_hyper(root.value("hyper", json()));
  run.resolve();
  try {
    run.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (root.contains("compare"))
    config.compare = parse_compare(root["compare"], run, config.trials);

  config.resolved = resolved_json(config);
  return config;
}

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json root = json::parse(in, nullptr, false);
  if (root.is_discarded()) throw ConfigError("config: " + path + " is not valid JSON");
  return config_from_json(root);
}

void apply_overrides(LoadedConfig& config, const ConfigOverrides& overrides) {
  if (overrides.seed) config.run.seed = *overrides.seed;
  if (overrides.algo) config.run.algo = algo_from_name(*overrides.algo);
  if (overrides.team) config.run.team = team_from_id(*overrides.team);
  if (overrides.task_size) {
    if (*overrides.task_size < 1) throw ConfigError("config: task-size must be >= 1");
    config.run.env.task_size = *overrides.task_size;
  }
  if (overrides.episodes) {
    if (*overrides.episodes < 1) throw ConfigError("config: episodes must be >= 1");
    config.run.episodes = *overrides.episodes;
  }
  config.run.resolve();
  try {
    config.run.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (config.compare) {
    config.compare->base = config.run;
    if (overrides.episodes) config.compare->episodes = *overrides.episodes;
  }
  config.resolved = resolved_json(config);
}

}  // namespace cedqn
