#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cedqn/agent.hpp"
#include "cedqn/comms.hpp"
#include "cedqn/config.hpp"
#include "cedqn/gridworld.hpp"
#include "cedqn/metrics.hpp"
#include "cedqn/mlp.hpp"
#include "cedqn/rng.hpp"
#include "cedqn/training.hpp"

namespace py = pybind11;
using namespace cedqn;

namespace {

std::vector<Action> to_actions(const std::vector<int>& raw) {
  std::vector<Action> actions;
  actions.reserve(raw.size());
  for (int a : raw) {
    if (a < 0 || a >= kNumActions) throw std::invalid_argument("action index out of range");
    actions.push_back(static_cast<Action>(a));
  }
  return actions;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Decentralized multi-robot box-lifting lab: DQN and CE-DQN";

  m.attr("OBS_DIM") = kObsDim;
  m.attr("MSG_DIM") = kMsgDim;
  m.attr("AUG_DIM") = kAugDim;
  m.attr("NUM_ACTIONS") = kNumActions;

  py::class_<Rng>(m, "Rng")
      .def(py::init<uint64_t>(), py::arg("seed"))
      .def("next_u64", &Rng::next_u64)
      .def("next_double", &Rng::next_double)
      .def("next_below", &Rng::next_below, py::arg("bound"))
      .def("uniform", &Rng::uniform, py::arg("lo"), py::arg("hi"))
      .def("derive", &Rng::derive, py::arg("key"));

  py::enum_<OutputActivation>(m, "OutputActivation")
      .value("IDENTITY", OutputActivation::kIdentity)
      .value("SIGMOID", OutputActivation::kSigmoid);

  py::class_<Mlp>(m, "Mlp")
      .def_readonly("layer_sizes", &Mlp::layer_sizes)
      .def_readwrite("weights", &Mlp::weights)
      .def_readwrite("biases", &Mlp::biases)
      .def_readonly("output_activation", &Mlp::output_activation)
      .def("parameter_count", &Mlp::parameter_count)
      .def("forward",
           [](const Mlp& mlp, const std::vector<double>& input) {
             return forward(mlp, input);
           },
           py::arg("input"));

  m.def("mlp_init", &mlp_init, py::arg("layer_sizes"), py::arg("output_activation"),
        py::arg("seed"));
  m.def("sigmoid", &sigmoid, py::arg("x"));
  m.def("save_mlp", &save_mlp, py::arg("mlp"), py::arg("path"));
  m.def("load_mlp", &load_mlp, py::arg("path"));
  m.def("copy_weights", &copy_weights, py::arg("source"), py::arg("target"));

  py::enum_<Action>(m, "Action")
      .value("MOVE_NORTH", Action::kMoveNorth)
      .value("MOVE_SOUTH", Action::kMoveSouth)
      .value("MOVE_EAST", Action::kMoveEast)
      .value("MOVE_WEST", Action::kMoveWest)
      .value("LIFT", Action::kLift)
      .value("STAY", Action::kStay);

  py::class_<EnvConfig>(m, "EnvConfig")
      .def(py::init<>())
      .def_readwrite("grid_width", &EnvConfig::grid_width)
      .def_readwrite("grid_height", &EnvConfig::grid_height)
      .def_readwrite("num_robots", &EnvConfig::num_robots)
      .def_readwrite("capacities", &EnvConfig::capacities)
      .def_readwrite("task_size", &EnvConfig::task_size)
      .def_readwrite("max_active_boxes", &EnvConfig::max_active_boxes)
      .def_readwrite("box_weight_min", &EnvConfig::box_weight_min)
      .def_readwrite("box_weight_max", &EnvConfig::box_weight_max)
      .def_readwrite("max_steps_per_episode", &EnvConfig::max_steps_per_episode)
      .def_readwrite("step_penalty", &EnvConfig::step_penalty)
      .def_readwrite("lift_reward", &EnvConfig::lift_reward)
      .def_readwrite("main_task_bonus", &EnvConfig::main_task_bonus)
      .def_readwrite("seed", &EnvConfig::seed)
      .def("resolved_max_steps", &EnvConfig::resolved_max_steps)
      .def("validate", &EnvConfig::validate);

  py::class_<Robot>(m, "Robot")
      .def_readonly("id", &Robot::id)
      .def_readonly("x", &Robot::x)
      .def_readonly("y", &Robot::y)
      .def_readonly("capacity", &Robot::capacity)
      .def_readonly("is_disturbance", &Robot::is_disturbance)
      .def_readonly("lifting", &Robot::lifting);

  py::class_<Crate>(m, "Crate")
      .def_readonly("id", &Crate::id)
      .def_readonly("x", &Crate::x)
      .def_readonly("y", &Crate::y)
      .def_readonly("weight", &Crate::weight)
      .def_readonly("lifted", &Crate::lifted);

  py::enum_<DoneReason>(m, "DoneReason")
      .value("NONE", DoneReason::kNone)
      .value("MAIN_TASK_COMPLETE", DoneReason::kMainTaskComplete)
      .value("STEP_LIMIT", DoneReason::kStepLimit);

  py::class_<StepOutcome>(m, "StepOutcome")
      .def_readonly("rewards", &StepOutcome::rewards)
      .def_readonly("observations", &StepOutcome::observations)
      .def_readonly("subtasks_completed", &StepOutcome::subtasks_completed)
      .def_readonly("done", &StepOutcome::done)
      .def_readonly("done_reason", &StepOutcome::done_reason);

  py::class_<GridWorld>(m, "GridWorld")
      .def(py::init<const EnvConfig&>(), py::arg("config"))
      .def("step",
           [](GridWorld& world, const std::vector<int>& actions) {
             return world.step(to_actions(actions));
           },
           py::arg("actions"))
      .def("encode_observation", &GridWorld::encode_observation, py::arg("robot_id"))
      .def("observe_all", &GridWorld::observe_all)
      .def_property_readonly("robots", &GridWorld::robots)
      .def_property_readonly("crates", &GridWorld::crates)
      .def_property_readonly("boxes_lifted", &GridWorld::boxes_lifted)
      .def_property_readonly("spawned_total", &GridWorld::spawned_total)
      .def_property_readonly("step_count", &GridWorld::step_count)
      .def_property_readonly("done", &GridWorld::done)
      .def_property_readonly("done_reason", &GridWorld::done_reason);

  m.def("reset", &reset, py::arg("config"));
  m.def("optimal_steps_oracle", &optimal_steps_oracle, py::arg("config"));

  py::class_<Message>(m, "Message")
      .def(py::init([](int sender_id, const std::vector<double>& payload) {
             return Message{sender_id, payload};
           }),
           py::arg("sender_id"), py::arg("payload"))
      .def_readonly("sender_id", &Message::sender_id)
      .def_readonly("payload", &Message::payload);

  py::class_<AggregatedMessage>(m, "AggregatedMessage")
      .def_readonly("values", &AggregatedMessage::values)
      .def_readonly("senders_count", &AggregatedMessage::senders_count);

  py::class_<MessageBus>(m, "MessageBus")
      .def(py::init<>())
      .def("broadcast", &MessageBus::broadcast, py::arg("message"))
      .def("collect", &MessageBus::collect, py::arg("receiver_id"))
      .def("flush", &MessageBus::flush)
      .def_property_readonly("outbox_size", &MessageBus::outbox_size);

  m.def("message_payload", &message_payload, py::arg("observation"));
  m.def("augment",
        [](const std::vector<double>& obs, const std::vector<double>& msg) {
          return augment(obs, msg);
        },
        py::arg("observation"), py::arg("message"));

  py::class_<EpsilonSchedule>(m, "EpsilonSchedule")
      .def(py::init<>())
      .def_readwrite("start", &EpsilonSchedule::start)
      .def_readwrite("end", &EpsilonSchedule::end)
      .def_readwrite("decay_steps", &EpsilonSchedule::decay_steps);
  m.def("epsilon_at", &epsilon_at, py::arg("schedule"), py::arg("global_step"));

  py::class_<HyperParams>(m, "HyperParams")
      .def(py::init<>())
      .def_readwrite("gamma", &HyperParams::gamma)
      .def_readwrite("epsilon", &HyperParams::epsilon)
      .def_readwrite("batch_size", &HyperParams::batch_size)
      .def_readwrite("buffer_capacity", &HyperParams::buffer_capacity)
      .def_readwrite("target_sync_interval", &HyperParams::target_sync_interval)
      .def_readwrite("q_learning_rate", &HyperParams::q_learning_rate)
      .def_readwrite("comm_learning_rate", &HyperParams::comm_learning_rate)
      .def_readwrite("comm_threshold", &HyperParams::comm_threshold);

  py::class_<Transition>(m, "Transition")
      .def(py::init<>())
      .def_readwrite("state", &Transition::state)
      .def_readwrite("action", &Transition::action)
      .def_readwrite("reward", &Transition::reward)
      .def_readwrite("next_state", &Transition::next_state)
      .def_readwrite("done", &Transition::done);

  py::class_<DqnAgent>(m, "DqnAgent")
      .def(py::init<int, bool, const HyperParams&, uint64_t>(), py::arg("robot_id"),
           py::arg("comm_enabled"), py::arg("hyper"), py::arg("seed"))
      .def("comm_gate", &DqnAgent::comm_gate, py::arg("observation"))
      .def("select_action",
           [](DqnAgent& agent, const std::vector<double>& aug, double epsilon, Rng& rng) {
             return agent.select_action(aug, epsilon, rng);
           },
           py::arg("augmented_state"), py::arg("epsilon"), py::arg("rng"))
      .def("store_transition", &DqnAgent::store_transition, py::arg("transition"))
      .def("train_batch", &DqnAgent::train_batch, py::arg("rng"))
      .def("sync_target", &DqnAgent::sync_target)
      .def_property_readonly("robot_id", &DqnAgent::robot_id)
      .def_property_readonly("comm_enabled", &DqnAgent::comm_enabled)
      .def_property_readonly("train_steps", &DqnAgent::train_steps)
      .def_readwrite("q_net", &DqnAgent::q_net)
      .def_readwrite("target_net", &DqnAgent::target_net)
      .def_readwrite("comm_net", &DqnAgent::comm_net);

  m.def("bellman_target",
        [](double reward, bool done, const Mlp& target_net,
           const std::vector<double>& next_state, double gamma) {
          return bellman_target(reward, done, target_net, next_state, gamma);
        },
        py::arg("reward"), py::arg("done"), py::arg("target_net"), py::arg("next_state"),
        py::arg("gamma"));

  py::enum_<AlgoKind>(m, "AlgoKind")
      .value("DQN", AlgoKind::kDqn)
      .value("CEDQN", AlgoKind::kCeDqn);
  m.def("algo_name", &algo_name, py::arg("algo"));

  py::class_<TeamSpec>(m, "TeamSpec")
      .def_readonly("team_id", &TeamSpec::team_id)
      .def_readonly("standard_count", &TeamSpec::standard_count)
      .def_readonly("disturbance_count", &TeamSpec::disturbance_count);
  m.def("team_from_id", &team_from_id, py::arg("team_id"));
  m.def("team_from_counts", &team_from_counts, py::arg("standard_count"),
        py::arg("disturbance_count"));

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("algo", &RunConfig::algo)
      .def_readwrite("team", &RunConfig::team)
      .def_readwrite("env", &RunConfig::env)
      .def_readwrite("hyper", &RunConfig::hyper)
      .def_readwrite("episodes", &RunConfig::episodes)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("eval_epsilon", &RunConfig::eval_epsilon)
      .def_readwrite("standard_capacity", &RunConfig::standard_capacity)
      .def_readwrite("disturbance_capacity", &RunConfig::disturbance_capacity)
      .def("resolve", &RunConfig::resolve)
      .def("validate", &RunConfig::validate);

  py::class_<EpisodeStats>(m, "EpisodeStats")
      .def_readonly("episode", &EpisodeStats::episode)
      .def_readonly("robot_rewards", &EpisodeStats::robot_rewards)
      .def_readonly("team_reward", &EpisodeStats::team_reward)
      .def_readonly("discounted_return", &EpisodeStats::discounted_return)
      .def_readonly("steps", &EpisodeStats::steps)
      .def_readonly("boxes_lifted", &EpisodeStats::boxes_lifted)
      .def_readonly("messages_sent", &EpisodeStats::messages_sent)
      .def_readonly("gate_decisions", &EpisodeStats::gate_decisions)
      .def_readonly("mean_q_loss", &EpisodeStats::mean_q_loss)
      .def_readonly("mean_comm_loss", &EpisodeStats::mean_comm_loss);

  py::class_<MetricsLog>(m, "MetricsLog")
      .def_readonly("run_id", &MetricsLog::run_id)
      .def_readonly("algo", &MetricsLog::algo)
      .def_readonly("team_id", &MetricsLog::team_id)
      .def_readonly("task_size", &MetricsLog::task_size)
      .def_readonly("seed", &MetricsLog::seed)
      .def_readonly("episodes", &MetricsLog::episodes);

  m.def("discounted_return",
        [](const std::vector<double>& rewards, double gamma) {
          return discounted_return(rewards, gamma);
        },
        py::arg("rewards"), py::arg("gamma"));
  m.def("metrics_csv", &metrics_csv, py::arg("log"));

  py::class_<CompletionResult>(m, "CompletionResult")
      .def_readonly("per_trial_steps", &CompletionResult::per_trial_steps)
      .def_readonly("timed_out", &CompletionResult::timed_out)
      .def_readonly("mean_steps", &CompletionResult::mean_steps)
      .def_readonly("timeout_fraction", &CompletionResult::timeout_fraction);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("log", &TrainResult::log)
      .def("evaluate",
           [](TrainResult& result, const EnvConfig& env, int trials, uint64_t seed,
              double eval_epsilon, const HyperParams& hyper) {
             return evaluate_completion_time(result.agents, env, trials, seed,
                                             eval_epsilon, hyper);
           },
           py::arg("env"), py::arg("trials"), py::arg("seed"), py::arg("eval_epsilon"),
           py::arg("hyper"))
      .def("save_checkpoints", [](const TrainResult& result, const std::string& dir) {
        for (const DqnAgent& agent : result.agents)
          save_agent(agent, dir, "agent" + std::to_string(agent.robot_id()));
      });

  m.def("train_run", &train_run, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("train_run_with_agents", &train_run_with_agents, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<ComparisonSpec>(m, "ComparisonSpec")
      .def(py::init<>())
      .def_readwrite("algos", &ComparisonSpec::algos)
      .def_readwrite("team_ids", &ComparisonSpec::team_ids)
      .def_readwrite("task_sizes", &ComparisonSpec::task_sizes)
      .def_readwrite("seeds", &ComparisonSpec::seeds)
      .def_readwrite("episodes", &ComparisonSpec::episodes)
      .def_readwrite("trials", &ComparisonSpec::trials)
      .def_readwrite("train_task_size", &ComparisonSpec::train_task_size)
      .def_readwrite("base", &ComparisonSpec::base);

  py::class_<ComparisonRow>(m, "ComparisonRow")
      .def_readonly("algo", &ComparisonRow::algo)
      .def_readonly("team_id", &ComparisonRow::team_id)
      .def_readonly("task_size", &ComparisonRow::task_size)
      .def_readonly("seed", &ComparisonRow::seed)
      .def_readonly("mean_completion_steps", &ComparisonRow::mean_completion_steps)
      .def_readonly("timeout_fraction", &ComparisonRow::timeout_fraction)
      .def_readonly("final_reward_ma", &ComparisonRow::final_reward_ma)
      .def_readonly("failed", &ComparisonRow::failed)
      .def_readonly("error", &ComparisonRow::error);

  m.def("run_comparison",
        [](const ComparisonSpec& spec, int jobs) { return run_comparison(spec, jobs); },
        py::arg("spec"), py::arg("jobs") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("comparison_csv",
        [](const std::vector<ComparisonRow>& rows) { return comparison_csv(rows); },
        py::arg("rows"));
  m.def("moving_average",
        [](const std::vector<double>& values, int window) {
          return moving_average(values, window);
        },
        py::arg("values"), py::arg("window"));
}
