#include "cedqn/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cedqn/errors.hpp"

namespace cedqn {

double epsilon_at(const EpsilonSchedule& schedule, int64_t global_step) {
  if (global_step < 0) throw std::invalid_argument("epsilon_at: negative step");
  if (schedule.decay_steps <= 0 || global_step >= schedule.decay_steps) return schedule.end;
  const double frac = static_cast<double>(global_step) / schedule.decay_steps;
  return schedule.start + (schedule.end - schedule.start) * frac;
}

void HyperParams::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("hyper: gamma must satisfy 0 <= gamma < 1");
  if (!(epsilon.start >= 0.0 && epsilon.start <= 1.0 && epsilon.end >= 0.0 &&
        epsilon.end <= 1.0))
    throw std::invalid_argument("hyper: epsilon must stay in [0,1]");
  if (epsilon.decay_steps < 0) throw std::invalid_argument("hyper: negative decay_steps");
  if (batch_size < 1) throw std::invalid_argument("hyper: batch_size must be >= 1");
  if (buffer_capacity < 1) throw std::invalid_argument("hyper: buffer_capacity must be >= 1");
  if (target_sync_interval < 1)
    throw std::invalid_argument("hyper: target_sync_interval must be >= 1");
  if (!(q_learning_rate > 0.0) || !(comm_learning_rate > 0.0))
    throw std::invalid_argument("hyper: learning rates must be > 0");
  if (!(comm_threshold >= 0.0 && comm_threshold <= 1.0))
    throw std::invalid_argument("hyper: comm_threshold must stay in [0,1]");
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("replay: capacity must be >= 1");
  data_.reserve(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  if (t.action < 0 || t.action >= kNumActions)
    throw std::invalid_argument("replay: action index out of range");
  if (size() < capacity_) {
    data_.push_back(t);
  } else {
    data_[cursor_] = t;
    cursor_ = (cursor_ + 1) % capacity_;
  }
}

void ReplayBuffer::sample_indices(int count, Rng& rng, std::vector<int>& out) {
  const int n = size();
  if (count > n) throw std::invalid_argument("replay: not enough transitions to sample");
  // Partial Fisher-Yates over [0, n).
  scratch_.resize(n);
  for (int i = 0; i < n; ++i) scratch_[i] = i;
  out.resize(count);
  for (int i = 0; i < count; ++i) {
    const auto j = i + static_cast<int>(rng.next_below(static_cast<uint64_t>(n - i)));
    std::swap(scratch_[i], scratch_[j]);
    out[i] = scratch_[i];
  }
}

std::array<double, kAugDim> augment(std::span<const double> observation,
                                    std::span<const double> message) {
  if (observation.size() != kObsDim)
    throw std::invalid_argument("augment: observation must have 9 components");
  if (message.size() != kMsgDim)
    throw std::invalid_argument("augment: message must have 6 components");
  std::array<double, kAugDim> out{};
  std::copy(observation.begin(), observation.end(), out.begin());
  std::copy(message.begin(), message.end(), out.begin() + kObsDim);
  return out;
}

double bellman_target(double reward, bool done, const Mlp& target_net,
                      std::span<const double> next_state, double gamma) {
  if (done) return reward;
  const std::vector<double> q = forward(target_net, next_state);
  double best = q[0];
  for (double v : q) best = std::max(best, v);
  return reward + gamma * best;
}

DqnAgent::DqnAgent(int robot_id, bool comm_enabled, const HyperParams& hyper, uint64_t seed)
    : buffer(hyper.buffer_capacity),
      robot_id_(robot_id),
      comm_enabled_(comm_enabled),
      hyper_(hyper),
      draw_rng_(0) {
  hyper_.validate();
  const Rng root(seed);
  q_net = mlp_init({kAugDim, 64, 64, kNumActions}, OutputActivation::kIdentity,
                   root.derive(stream::kAgentQInit).root_seed());
  target_net = q_net;
  comm_net = mlp_init({kObsDim, 32, 1}, OutputActivation::kSigmoid,
                      root.derive(stream::kAgentCommInit).root_seed());
  q_opt = make_adam(q_net, hyper_.q_learning_rate);
  comm_opt = make_adam(comm_net, hyper_.comm_learning_rate);
  draw_rng_ = root.derive(stream::kAgentDraws);
  grad_scratch_ = make_gradients(q_net);
  comm_grad_scratch_ = make_gradients(comm_net);
}

std::pair<double, bool> DqnAgent::comm_gate(const Observation& observation) {
  if (!comm_enabled_)
    throw std::logic_error("comm_gate: communication disabled on this agent");
  const std::vector<double> out = forward(comm_net, observation);
  const double probability = out[0];
  return {probability, probability > hyper_.comm_threshold};
}

Action DqnAgent::select_action(std::span<const double> augmented_state, double epsilon,
                               Rng& rng) {
  if (augmented_state.size() != kAugDim)
    throw std::invalid_argument("select_action: augmented state must have 15 components");
  // One uniform draw per call keeps the stream layout identical across modes.
  const double u = rng.next_double();
  if (u < epsilon) return static_cast<Action>(rng.next_below(kNumActions));
  const std::vector<double> q = forward(q_net, augmented_state);
  int best = 0;
  for (int a = 1; a < kNumActions; ++a)
    if (q[a] > q[best]) best = a;
  return static_cast<Action>(best);
}

void DqnAgent::store_transition(const Transition& t) { buffer.push(t); }

std::optional<double> DqnAgent::train_batch(Rng& rng) {
  const int batch = hyper_.batch_size;
  if (buffer.size() < batch) return std::nullopt;
  buffer.sample_indices(batch, rng, index_scratch_);

  batch_scratch_.resize(static_cast<size_t>(batch) * kAugDim * 2);
  double* states = batch_scratch_.data();
  double* next_states = states + static_cast<size_t>(batch) * kAugDim;
  for (int b = 0; b < batch; ++b) {
    const Transition& t = buffer.at(index_scratch_[b]);
    std::copy(t.state.begin(), t.state.end(), states + static_cast<size_t>(b) * kAugDim);
    std::copy(t.next_state.begin(), t.next_state.end(),
              next_states + static_cast<size_t>(b) * kAugDim);
  }

  forward_batch(target_net, next_states, batch, target_buffers_);
  forward_batch(q_net, states, batch, q_buffers_);
  const double* target_q = target_buffers_.post.back().data();
  const double* q = q_buffers_.post.back().data();

  // Eq. 3 targets with terminal masking, Eq. 4 squared error on the taken
  // action only; the target side stays detached.
  std::vector<double> dout(static_cast<size_t>(batch) * kNumActions, 0.0);
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    const Transition& t = buffer.at(index_scratch_[b]);
    double y = t.reward;
    if (!t.done) {
      const double* row = target_q + static_cast<size_t>(b) * kNumActions;
      double best = row[0];
      for (int a = 1; a < kNumActions; ++a) best = std::max(best, row[a]);
      y += hyper_.gamma * best;
    }
    const double predicted = q[static_cast<size_t>(b) * kNumActions + t.action];
    const double err = predicted - y;
    loss += err * err;
    dout[static_cast<size_t>(b) * kNumActions + t.action] = 2.0 * err / batch;
  }
  loss /= batch;
  if (!std::isfinite(loss)) throw NumericError("train_batch: non-finite loss");

  grad_scratch_.zero();
  backward_batch(q_net, q_buffers_, dout.data(), grad_scratch_);
  clip_global_norm(grad_scratch_, kGradClipNorm);
  apply_update(q_net, grad_scratch_, q_opt);

  train_steps_ += 1;
  if (train_steps_ % hyper_.target_sync_interval == 0) sync_target();
  return loss;
}

double DqnAgent::update_comm_policy(const EpisodeTrace& trace) {
  if (!comm_enabled_)
    throw std::logic_error("update_comm_policy: communication disabled on this agent");

  // Discounted reward-to-go per step.
  std::vector<double> rtg(trace.size());
  double acc = 0.0;
  for (int t = static_cast<int>(trace.size()) - 1; t >= 0; --t) {
    acc = trace[t].reward + hyper_.gamma * acc;
    rtg[t] = acc;
  }

  // Stream the EMA baseline over every gate decision; collect send steps.
  std::vector<double> send_obs;
  std::vector<double> labels;
  std::vector<double> weights;
  for (size_t t = 0; t < trace.size(); ++t) {
    const double advantage = rtg[t] - comm_baseline;
    if (trace[t].send) {
      send_obs.insert(send_obs.end(), trace[t].observation.begin(),
                      trace[t].observation.end());
      labels.push_back(advantage > 0.0 ? 1.0 : 0.0);
      weights.push_back(std::abs(advantage));
    }
    comm_baseline = 0.99 * comm_baseline + 0.01 * rtg[t];
  }
  const int sends = static_cast<int>(labels.size());
  if (sends == 0) return 0.0;

  forward_batch(comm_net, send_obs.data(), sends, comm_buffers_);
  const double* p = comm_buffers_.post.back().data();
  std::vector<double> dout(sends);
  double loss = 0.0;
  for (int m = 0; m < sends; ++m) {
    const double pc = std::clamp(p[m], 1e-12, 1.0 - 1e-12);
    loss += weights[m] * -(labels[m] * std::log(pc) + (1.0 - labels[m]) * std::log(1.0 - pc));
    // d/dp of the weighted BCE; the sigmoid chain happens in backward_batch.
    dout[m] = weights[m] * (pc - labels[m]) / (pc * (1.0 - pc)) / sends;
  }
  loss /= sends;
  if (!std::isfinite(loss)) throw NumericError("update_comm_policy: non-finite loss");

  comm_grad_scratch_.zero();
  backward_batch(comm_net, comm_buffers_, dout.data(), comm_grad_scratch_);
  clip_global_norm(comm_grad_scratch_, kGradClipNorm);
  apply_update(comm_net, comm_grad_scratch_, comm_opt);
  return loss;
}

void DqnAgent::sync_target() { copy_weights(q_net, target_net); }

}  // namespace cedqn
