#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cedqn/comms.hpp"
#include "cedqn/gridworld.hpp"
#include "cedqn/mlp.hpp"
#include "cedqn/rng.hpp"

namespace cedqn {

inline constexpr int kAugDim = kObsDim + kMsgDim;

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  int64_t decay_steps = 50000;
};

// Linear start -> end over decay_steps environment steps, then constant end.
double epsilon_at(const EpsilonSchedule& schedule, int64_t global_step);

struct HyperParams {
  double gamma = 0.95;
  EpsilonSchedule epsilon;
  int batch_size = 64;
  int buffer_capacity = 50000;
  int target_sync_interval = 500;  // in train steps
  double q_learning_rate = 1e-3;
  double comm_learning_rate = 1e-3;
  double comm_threshold = 0.5;

  void validate() const;
};

struct Transition {
  std::array<double, kAugDim> state{};
  int action = 0;
  double reward = 0.0;
  std::array<double, kAugDim> next_state{};
  bool done = false;
};

// FIFO ring of transitions, sampled uniformly without replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);
  void push(const Transition& t);
  int size() const { return static_cast<int>(data_.size()); }
  int capacity() const { return capacity_; }
  const Transition& at(int i) const { return data_[i]; }
  void sample_indices(int count, Rng& rng, std::vector<int>& out);

 private:
  int capacity_;
  size_t cursor_ = 0;
  std::vector<Transition> data_;
  std::vector<int> scratch_;
};

// Observation (9) followed by the aggregated message (6).
std::array<double, kAugDim> augment(std::span<const double> observation,
                                    std::span<const double> message);

// Eq. 3 target: r for terminal transitions, r + gamma * max_a target(s', a)
// otherwise.
double bellman_target(double reward, bool done, const Mlp& target_net,
                      std::span<const double> next_state, double gamma);

// One gate decision and its episode context, for the end-of-episode
// communication update.
struct GateStep {
  Observation observation{};
  double probability = 0.0;
  bool send = false;
  double reward = 0.0;  // this robot's reward at that step
};
using EpisodeTrace = std::vector<GateStep>;

// Per-robot learner: behavior net Q, target net, communication gate C, and
// replay buffer. comm_enabled=false is the plain DQN baseline; the message
// block of its inputs is identically zero and the gate is never evaluated.
class DqnAgent {
 public:
  DqnAgent(int robot_id, bool comm_enabled, const HyperParams& hyper, uint64_t seed);

  // Gate probability and the strict-threshold send decision.
  std::pair<double, bool> comm_gate(const Observation& observation);

  // Epsilon-greedy over q_net; argmax ties break to the lowest action index.
  Action select_action(std::span<const double> augmented_state, double epsilon, Rng& rng);

  void store_transition(const Transition& t);

  // One uniform mini-batch step on q_net; no-op (nullopt) while the buffer
  // holds fewer than batch_size transitions. Syncs the target net every
  // target_sync_interval train steps.
  std::optional<double> train_batch(Rng& rng);

  // Advantage-weighted logistic update of the gate from an episode trace:
  // sends whose discounted reward-to-go beat the running baseline are
  // reinforced, others extinguished. Returns the weighted BCE loss
  // (0 when the trace holds no sends; the gate is untouched then).
  double update_comm_policy(const EpisodeTrace& trace);

  void sync_target();

  int robot_id() const { return robot_id_; }
  bool comm_enabled() const { return comm_enabled_; }
  int64_t train_steps() const { return train_steps_; }
  const HyperParams& hyper() const { return hyper_; }
  Rng& draw_rng() { return draw_rng_; }

  Mlp q_net;
  Mlp target_net;
  Mlp comm_net;
  OptimizerState q_opt;
  OptimizerState comm_opt;
  ReplayBuffer buffer;
  int64_t train_steps_ = 0;
  double comm_baseline = 0.0;  // EMA of discounted reward-to-go, decay 0.99

 private:
  int robot_id_;
  bool comm_enabled_;
  HyperParams hyper_;
  Rng draw_rng_;
  BatchBuffers q_buffers_;
  BatchBuffers target_buffers_;
  BatchBuffers comm_buffers_;
  Gradients grad_scratch_;
  Gradients comm_grad_scratch_;
  std::vector<int> index_scratch_;
  std::vector<double> batch_scratch_;
};

inline constexpr double kGradClipNorm = 10.0;

}  // namespace cedqn
