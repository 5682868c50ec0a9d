#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cedqn/rng.hpp"

namespace cedqn {

inline constexpr int kObsDim = 9;
inline constexpr int kNumActions = 6;

enum class Action : int {
  kMoveNorth = 0,
  kMoveSouth = 1,
  kMoveEast = 2,
  kMoveWest = 3,
  kLift = 4,
  kStay = 5,
};

enum class DoneReason { kNone, kMainTaskComplete, kStepLimit };

struct EnvConfig {
  int grid_width = 10;
  int grid_height = 10;
  int num_robots = 6;
  std::vector<double> capacities;  // one per robot, load units
  int task_size = 20;              // boxes to lift before the main task completes
  int max_active_boxes = 5;
  double box_weight_min = 2.0;
  double box_weight_max = 5.0;
  int max_steps_per_episode = 0;  // 0 = default formula
  double step_penalty = -0.01;
  double lift_reward = 1.0;
  double main_task_bonus = 10.0;
  uint64_t seed = 0;

  // max(200, 40 * task_size / num_robots) when not set explicitly.
  int resolved_max_steps() const;
  void validate() const;
};

struct Robot {
  int id = 0;
  int x = 0;
  int y = 0;
  double capacity = 0.0;
  bool is_disturbance = false;  // capacity below the minimum box weight
  bool lifting = false;         // took part in a successful lift last step
};

struct Crate {
  int id = 0;
  int x = 0;
  int y = 0;
  double weight = 0.0;
  bool lifted = false;
};

using Observation = std::array<double, kObsDim>;

struct StepOutcome {
  std::vector<double> rewards;            // one per robot
  std::vector<Observation> observations;  // one per robot
  int subtasks_completed = 0;
  bool done = false;
  DoneReason done_reason = DoneReason::kNone;
};

// The concrete MAMDP: a bounded grid, robots with load capacities, weighted
// crates spawning in waves of max_active_boxes until task_size have appeared.
// A Lift succeeds when the summed capacity of all co-located lifters covers
// the crate weight; lifting is instantaneous and completes the subtask.
// Moves clamp at the borders; robots may share cells, crates may not.
// The only stochasticity is initial and respawn crate placement.
class GridWorld {
 public:
  explicit GridWorld(const EnvConfig& config);

  StepOutcome step(const std::vector<Action>& joint_action);

  // Local state vector, all components bounded:
  //   [0..1] own position / (extent-1), in [0,1]
  //   [2]    own capacity / scale, in [0,1]
  //   [3]    lifting flag
  //   [4..5] nearest unlifted crate offset / (extent-1), in [-1,1]
  //          (nearest by Manhattan distance, ties to the lowest crate id)
  //   [6]    nearest crate weight / scale
  //   [7]    unlifted crate count / max_active_boxes
  //   [8]    remaining-task fraction
  // Components 4..6 are zero when no unlifted crate exists.
  Observation encode_observation(int robot_id) const;
  std::vector<Observation> observe_all() const;

  const EnvConfig& config() const { return config_; }
  const std::vector<Robot>& robots() const { return robots_; }
  const std::vector<Crate>& crates() const { return crates_; }
  int boxes_lifted() const { return boxes_lifted_; }
  int spawned_total() const { return spawned_total_; }
  int step_count() const { return step_count_; }
  bool done() const { return done_; }
  DoneReason done_reason() const { return done_reason_; }

 private:
  void spawn_crate();
  bool cell_free(int x, int y) const;

  EnvConfig config_;
  double norm_scale_ = 1.0;
  std::vector<Robot> robots_;
  std::vector<Crate> crates_;
  int boxes_lifted_ = 0;
  int spawned_total_ = 0;
  int step_count_ = 0;
  bool done_ = false;
  DoneReason done_reason_ = DoneReason::kNone;
  Rng rng_;
};

// Fresh world with robots and the first wave of crates placed; returns the
// initial per-robot observations alongside. Deterministic in config.seed.
std::pair<GridWorld, std::vector<Observation>> reset(const EnvConfig& config);

// Exact minimal completion steps by breadth-first search, for micro
// instances only: grid at most 4x4, one robot, one crate (task_size 1),
// robot capacity >= crate weight. Independent oracle for policy tests.
int optimal_steps_oracle(const EnvConfig& config);

}  // namespace cedqn
