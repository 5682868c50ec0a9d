#include "cedqn/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <stdexcept>

namespace cedqn {

int EnvConfig::resolved_max_steps() const {
  if (max_steps_per_episode > 0) return max_steps_per_episode;
  const int scaled = 40 * task_size / std::max(1, num_robots);
  return std::max(200, scaled);
}

void EnvConfig::validate() const {
  if (grid_width < 1 || grid_height < 1)
    throw std::invalid_argument("env: grid extents must be positive");
  if (num_robots < 1) throw std::invalid_argument("env: need at least one robot");
  if (static_cast<int>(capacities.size()) != num_robots)
    throw std::invalid_argument("env: capacities must list one entry per robot");
  for (double c : capacities)
    if (!(c >= 0.0)) throw std::invalid_argument("env: capacities must be non-negative");
  if (task_size < 1) throw std::invalid_argument("env: task_size must be >= 1");
  if (max_active_boxes < 1) throw std::invalid_argument("env: max_active_boxes must be >= 1");
  if (max_active_boxes > grid_width * grid_height - num_robots)
    throw std::invalid_argument("env: max_active_boxes exceeds free cells");
  if (!(box_weight_min > 0.0) || box_weight_max < box_weight_min)
    throw std::invalid_argument("env: invalid box weight range");
  if (max_steps_per_episode < 0)
    throw std::invalid_argument("env: max_steps_per_episode must be >= 0");
  if (!std::isfinite(step_penalty) || !std::isfinite(lift_reward) ||
      !std::isfinite(main_task_bonus))
    throw std::invalid_argument("env: rewards must be finite");
}

GridWorld::GridWorld(const EnvConfig& config) : config_(config), rng_(config.seed) {
  config_.validate();
  norm_scale_ = config_.box_weight_max;
  for (double c : config_.capacities) norm_scale_ = std::max(norm_scale_, c);

  // Robots first, on distinct cells, then the first wave of crates on cells
  // free of robots and other crates. Draw order is part of the seed contract.
  for (int i = 0; i < config_.num_robots; ++i) {
    Robot r;
    r.id = i;
    r.capacity = config_.capacities[i];
    r.is_disturbance = r.capacity < config_.box_weight_min;
    while (true) {
      r.x = static_cast<int>(rng_.next_below(config_.grid_width));
      r.y = static_cast<int>(rng_.next_below(config_.grid_height));
      bool taken = false;
      for (const Robot& other : robots_)
        if (other.x == r.x && other.y == r.y) taken = true;
      if (!taken) break;
    }
    robots_.push_back(r);
  }
  const int initial = std::min(config_.task_size, config_.max_active_boxes);
  for (int i = 0; i < initial; ++i) spawn_crate();
}

bool GridWorld::cell_free(int x, int y) const {
  for (const Robot& r : robots_)
    if (r.x == x && r.y == y) return false;
  for (const Crate& c : crates_)
    if (!c.lifted && c.x == x && c.y == y) return false;
  return true;
}

void GridWorld::spawn_crate() {
  // Uniform over free cells, enumerated row-major for a stable draw.
  std::vector<std::pair<int, int>> free;
  for (int y = 0; y < config_.grid_height; ++y)
    for (int x = 0; x < config_.grid_width; ++x)
      if (cell_free(x, y)) free.emplace_back(x, y);
  if (free.empty()) throw std::logic_error("gridworld: no free cell for crate spawn");
  const auto [x, y] = free[rng_.next_below(free.size())];
  Crate c;
  c.id = spawned_total_;
  c.x = x;
  c.y = y;
  c.weight = rng_.uniform(config_.box_weight_min, config_.box_weight_max);
  crates_.push_back(c);
  spawned_total_ += 1;
}

StepOutcome GridWorld::step(const std::vector<Action>& joint_action) {
  if (done_) throw std::logic_error("gridworld: step on a finished episode");
  if (static_cast<int>(joint_action.size()) != config_.num_robots)
    throw std::invalid_argument("gridworld: one action per robot required");

  step_count_ += 1;

  for (int i = 0; i < config_.num_robots; ++i) {
    Robot& r = robots_[i];
    switch (joint_action[i]) {
      case Action::kMoveNorth: r.y = std::min(r.y + 1, config_.grid_height - 1); break;
      case Action::kMoveSouth: r.y = std::max(r.y - 1, 0); break;
      case Action::kMoveEast: r.x = std::min(r.x + 1, config_.grid_width - 1); break;
      case Action::kMoveWest: r.x = std::max(r.x - 1, 0); break;
      case Action::kLift:
      case Action::kStay: break;
      default: throw std::invalid_argument("gridworld: unknown action");
    }
  }

  // Lift resolution, crates in id order. A crate is lifted when the summed
  // capacity of all co-located robots that chose Lift covers its weight.
  std::vector<bool> participated(config_.num_robots, false);
  int subtasks = 0;
  const size_t crates_at_step_start = crates_.size();
  for (size_t ci = 0; ci < crates_at_step_start; ++ci) {
    if (crates_[ci].lifted) continue;
    double total_capacity = 0.0;
    std::vector<int> lifters;
    for (int i = 0; i < config_.num_robots; ++i) {
      if (joint_action[i] == Action::kLift && robots_[i].x == crates_[ci].x &&
          robots_[i].y == crates_[ci].y) {
        lifters.push_back(i);
        total_capacity += robots_[i].capacity;
      }
    }
    if (!lifters.empty() && total_capacity >= crates_[ci].weight) {
      crates_[ci].lifted = true;
      boxes_lifted_ += 1;
      subtasks += 1;
      for (int i : lifters) participated[i] = true;
      if (spawned_total_ < config_.task_size) spawn_crate();
    }
  }
  for (int i = 0; i < config_.num_robots; ++i) robots_[i].lifting = participated[i];

  const bool main_done = boxes_lifted_ >= config_.task_size;
  StepOutcome outcome;
  outcome.rewards.resize(config_.num_robots);
  for (int i = 0; i < config_.num_robots; ++i) {
    double r = config_.step_penalty;
    if (participated[i]) r += config_.lift_reward;
    if (main_done) r += config_.main_task_bonus;
    outcome.rewards[i] = r;
  }
  outcome.subtasks_completed = subtasks;

  if (main_done) {
    done_ = true;
    done_reason_ = DoneReason::kMainTaskComplete;
  } else if (step_count_ >= config_.resolved_max_steps()) {
    done_ = true;
    done_reason_ = DoneReason::kStepLimit;
  }
  outcome.done = done_;
  outcome.done_reason = done_reason_;
  outcome.observations = observe_all();
  return outcome;
}

Observation GridWorld::encode_observation(int robot_id) const {
  if (robot_id < 0 || robot_id >= config_.num_robots)
    throw std::invalid_argument("encode_observation: unknown robot id");
  const Robot& r = robots_[robot_id];
  const double wx = config_.grid_width > 1 ? config_.grid_width - 1.0 : 1.0;
  const double wy = config_.grid_height > 1 ? config_.grid_height - 1.0 : 1.0;

  const Crate* nearest = nullptr;
  int best_dist = 0;
  int visible = 0;
  for (const Crate& c : crates_) {
    if (c.lifted) continue;
    visible += 1;
    const int dist = std::abs(c.x - r.x) + std::abs(c.y - r.y);
    if (nearest == nullptr || dist < best_dist) {
      nearest = &c;
      best_dist = dist;
    }
  }

  Observation obs{};
  obs[0] = r.x / wx;
  obs[1] = r.y / wy;
  obs[2] = r.capacity / norm_scale_;
  obs[3] = r.lifting ? 1.0 : 0.0;
  if (nearest != nullptr) {
    obs[4] = (nearest->x - r.x) / wx;
    obs[5] = (nearest->y - r.y) / wy;
    obs[6] = nearest->weight / norm_scale_;
  }
  obs[7] = static_cast<double>(visible) / config_.max_active_boxes;
  obs[8] = static_cast<double>(config_.task_size - boxes_lifted_) / config_.task_size;
  return obs;
}

std::vector<Observation> GridWorld::observe_all() const {
  std::vector<Observation> all;
  all.reserve(config_.num_robots);
  for (int i = 0; i < config_.num_robots; ++i) all.push_back(encode_observation(i));
  return all;
}

std::pair<GridWorld, std::vector<Observation>> reset(const EnvConfig& config) {
  GridWorld world(config);
  auto obs = world.observe_all();
  return {std::move(world), std::move(obs)};
}

int optimal_steps_oracle(const EnvConfig& config) {
  config.validate();
  if (config.grid_width > 4 || config.grid_height > 4)
    throw std::invalid_argument("oracle: grid larger than 4x4");
  if (config.num_robots != 1) throw std::invalid_argument("oracle: exactly one robot required");
  if (config.task_size != 1 || config.max_active_boxes != 1)
    throw std::invalid_argument("oracle: exactly one crate required");

  GridWorld world(config);
  const Robot& robot = world.robots()[0];
  const Crate& crate = world.crates()[0];
  if (robot.capacity < crate.weight)
    throw std::invalid_argument("oracle: robot cannot lift the crate");

  // BFS over (x, y, lifted). Moves clamp like the real dynamics; Lift on the
  // crate cell reaches the absorbing done state.
  const int w = config.grid_width, h = config.grid_height;
  std::vector<int> dist(static_cast<size_t>(w) * h * 2, -1);
  auto idx = [&](int x, int y, int lifted) { return (y * w + x) * 2 + lifted; };
  std::deque<std::array<int, 3>> queue;
  dist[idx(robot.x, robot.y, 0)] = 0;
  queue.push_back({robot.x, robot.y, 0});
  while (!queue.empty()) {
    auto [x, y, lifted] = queue.front();
    queue.pop_front();
    const int d = dist[idx(x, y, lifted)];
    if (lifted) return d;
    const std::array<std::array<int, 2>, 4> moves{{{x, std::min(y + 1, h - 1)},
                                                   {x, std::max(y - 1, 0)},
                                                   {std::min(x + 1, w - 1), y},
                                                   {std::max(x - 1, 0), y}}};
    for (const auto& [nx, ny] : moves) {
      if (dist[idx(nx, ny, 0)] < 0) {
        dist[idx(nx, ny, 0)] = d + 1;
        queue.push_back({nx, ny, 0});
      }
    }
    if (x == crate.x && y == crate.y && dist[idx(x, y, 1)] < 0) {
      dist[idx(x, y, 1)] = d + 1;
      queue.push_back({x, y, 1});
    }
  }
  throw std::logic_error("oracle: goal unreachable");
}

}  // namespace cedqn
