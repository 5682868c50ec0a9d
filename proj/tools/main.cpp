#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cedqn/config.hpp"
#include "cedqn/errors.hpp"
#include "cedqn/metrics.hpp"
#include "cedqn/mlp.hpp"
#include "cedqn/training.hpp"

namespace fs = std::filesystem;
using namespace cedqn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

std::string strip_prefix(std::string message, const std::string& prefix) {
  if (message.rfind(prefix, 0) == 0) message.erase(0, prefix.size());
  return "config: " + message;
}

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::string checkpoint_dir;
  std::string inspect_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> algo;
  std::optional<int> team;
  std::optional<int> task_size;
  std::optional<int> episodes;
  int jobs = 0;
};

std::string resolve_out_dir(const CliOptions& opts) {
  if (!opts.out_dir.empty()) return opts.out_dir;
  if (const char* env = std::getenv("CEDQN_OUT"); env != nullptr && *env != '\0')
    return env;
  throw ConfigError("output directory required: pass --out or set CEDQN_OUT");
}

LoadedConfig load_with_overrides(const CliOptions& opts) {
  LoadedConfig config = load_config(opts.config_path);
  ConfigOverrides overrides;
  overrides.seed = opts.seed;
  overrides.algo = opts.algo;
  overrides.team = opts.team;
  overrides.task_size = opts.task_size;
  overrides.episodes = opts.episodes;
  apply_overrides(config, overrides);
  return config;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_resolved_config(const LoadedConfig& config, const fs::path& dir) {
  write_text_file(dir / "resolved_config.json", config.resolved.dump(2) + "\n");
}

int cmd_train(const CliOptions& opts) {
  const LoadedConfig config = load_with_overrides(opts);
  const fs::path out_dir = resolve_out_dir(opts);
  fs::create_directories(out_dir);

  const TrainResult result = train_run_with_agents(config.run);
  write_text_file(out_dir / "metrics.csv", metrics_csv(result.log));
  const fs::path ckpt_dir = out_dir / "checkpoints";
  for (const DqnAgent& agent : result.agents)
    save_agent(agent, ckpt_dir.string(), "agent" + std::to_string(agent.robot_id()));
  write_resolved_config(config, out_dir);

  double final_ma = 0.0;
  const int window = std::min<int>(100, static_cast<int>(result.log.episodes.size()));
  for (size_t e = result.log.episodes.size() - window; e < result.log.episodes.size(); ++e)
    final_ma += result.log.episodes[e].team_reward;
  final_ma /= window;
  std::cout << "train: " << algo_name(config.run.algo) << " team "
            << config.run.team.team_id << " episodes " << config.run.episodes << " seed "
            << config.run.seed << "\n"
            << "final " << window << "-episode mean team reward: " << format_g6(final_ma)
            << "\n"
            << "outputs: " << (out_dir / "metrics.csv").string() << ", "
            << ckpt_dir.string() << "\n";
  return kExitOk;
}

int cmd_eval(const CliOptions& opts) {
  const LoadedConfig config = load_with_overrides(opts);
  const fs::path out_dir = resolve_out_dir(opts);
  std::string ckpt_dir = opts.checkpoint_dir;
  if (ckpt_dir.empty()) ckpt_dir = config.checkpoint_dir;
  if (ckpt_dir.empty())
    throw ConfigError("eval needs checkpoints: pass --checkpoints or set checkpoint_dir");
  fs::create_directories(out_dir);

  const RunConfig& run = config.run;
  const Rng root(run.seed);
  std::vector<DqnAgent> agents;
  for (int i = 0; i < run.env.num_robots; ++i)
    agents.push_back(load_agent(ckpt_dir, "agent" + std::to_string(i),
                                root.derive(stream::kAgentBase + i).root_seed()));

  const CompletionResult result = evaluate_completion_time(
      agents, run.env, config.trials, run.seed, run.eval_epsilon, run.hyper);

  std::ostringstream csv;
  csv << "algo,team_id,task_size,seed,trial,completion_steps,timed_out\n";
  for (size_t t = 0; t < result.per_trial_steps.size(); ++t)
    csv << algo_name(run.algo) << ',' << run.team.team_id << ',' << run.env.task_size << ','
        << run.seed << ',' << t << ',' << result.per_trial_steps[t] << ','
        << (result.timed_out[t] ? 1 : 0) << '\n';
  write_text_file(out_dir / "completion.csv", csv.str());
  write_resolved_config(config, out_dir);

  std::cout << "eval: " << algo_name(run.algo) << " team " << run.team.team_id
            << " task_size " << run.env.task_size << " trials " << config.trials << "\n"
            << "mean completion steps: " << format_g6(result.mean_steps)
            << ", timeout fraction: " << format_g6(result.timeout_fraction) << "\n"
            << "outputs: " << (out_dir / "completion.csv").string() << "\n";
  return kExitOk;
}

int cmd_compare(const CliOptions& opts) {
  const LoadedConfig config = load_with_overrides(opts);
  if (!config.compare)
    throw ConfigError("compare: config has no \"compare\" block");
  const fs::path out_dir = resolve_out_dir(opts);
  fs::create_directories(out_dir);

  std::vector<MetricsLog> cell_logs;
  const std::vector<ComparisonRow> rows =
      run_comparison(*config.compare, opts.jobs, &cell_logs);

  std::ostringstream csv;
  write_comparison_csv(rows, csv);
  write_text_file(out_dir / "comparison.csv", csv.str());

  const fs::path cells_dir = out_dir / "cells";
  fs::create_directories(cells_dir);
  for (const MetricsLog& log : cell_logs) {
    if (log.episodes.empty()) continue;
    const std::string name =
        algo_name(log.algo) + "_t" + std::to_string(log.team_id) + "_s" +
        std::to_string(log.seed) + ".csv";
    write_text_file(cells_dir / name, metrics_csv(log));
  }
  write_resolved_config(config, out_dir);

  int failed = 0;
  for (const ComparisonRow& r : rows)
    if (r.failed) failed += 1;
  std::cout << "compare: " << rows.size() << " rows written to "
            << (out_dir / "comparison.csv").string() << "\n";
  if (failed > 0) std::cout << "cells with errors: " << failed << "\n";
  return kExitOk;
}

void inspect_net(const std::string& label, const Mlp& mlp) {
  double sq = 0.0;
  for (const auto& w : mlp.weights)
    for (double x : w) sq += x * x;
  for (const auto& b : mlp.biases)
    for (double x : b) sq += x * x;
  std::cout << label << ": layers [";
  for (size_t i = 0; i < mlp.layer_sizes.size(); ++i)
    std::cout << (i ? ", " : "") << mlp.layer_sizes[i];
  std::cout << "], output "
            << (mlp.output_activation == OutputActivation::kSigmoid ? "sigmoid"
                                                                    : "identity")
            << ", parameters " << mlp.parameter_count() << ", l2 norm "
            << format_g6(std::sqrt(sq)) << "\n";
}

int cmd_inspect(const CliOptions& opts) {
  const fs::path path = opts.inspect_path;
  if (path.extension() == ".json") {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
    if (manifest.is_discarded())
      throw CheckpointError(CheckpointError::Kind::kMalformed,
                            "malformed checkpoint: invalid manifest JSON");
    std::cout << "agent manifest: " << path.string() << "\n"
              << "robot_id: " << manifest.value("robot_id", -1) << "\n"
              << "comm_enabled: " << (manifest.value("comm_enabled", false) ? "true" : "false")
              << "\n"
              << "train_step: " << manifest.value("train_step", int64_t{0}) << "\n";
    if (manifest.contains("networks")) {
      for (const auto& [key, file] : manifest["networks"].items())
        inspect_net(key, load_mlp((path.parent_path() / file.get<std::string>()).string()));
    }
    return kExitOk;
  }
  std::cout << "checkpoint: " << path.string() << "\n";
  inspect_net("network", load_mlp(path.string()));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized multi-robot box-lifting lab: DQN and CE-DQN"};
  app.require_subcommand(1);
  CliOptions opts;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* config_opt = cmd->add_option("--config", opts.config_path, "experiment JSON");
    if (needs_config) config_opt->required();
    cmd->add_option("--out", opts.out_dir, "output directory (or CEDQN_OUT)");
    cmd->add_option("--seed", opts.seed, "seed override");
    cmd->add_option("--algo", opts.algo, "algo override: dqn|cedqn");
    cmd->add_option("--team", opts.team, "team override: 1..4");
    cmd->add_option("--task-size", opts.task_size, "task size override");
    cmd->add_option("--episodes", opts.episodes, "episode count override");
    cmd->add_option("--jobs", opts.jobs, "worker pool size (compare)");
  };

  CLI::App* train = app.add_subcommand("train", "train a team and write metrics + checkpoints");
  add_common(train, true);
  CLI::App* eval = app.add_subcommand("eval", "evaluate checkpoints: completion-time CSV");
  add_common(eval, true);
  eval->add_option("--checkpoints", opts.checkpoint_dir, "checkpoint directory");
  CLI::App* compare = app.add_subcommand("compare", "run the comparison matrix");
  add_common(compare, true);
  CLI::App* inspect = app.add_subcommand("inspect", "summarize a checkpoint or manifest");
  inspect->add_option("path", opts.inspect_path, "checkpoint (.ckpt) or manifest (.json)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: usage: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(opts);
    if (eval->parsed()) return cmd_eval(opts);
    if (compare->parsed()) return cmd_compare(opts);
    if (inspect->parsed()) return cmd_inspect(opts);
    std::cerr << "error: usage: no subcommand\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << strip_prefix(e.what(), "config: ") << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "error: numeric: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}
