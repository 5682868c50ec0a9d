#pragma once

#include <array>
#include <vector>

#include "cedqn/gridworld.hpp"

namespace cedqn {

inline constexpr int kMsgDim = 6;

// Broadcast payload: sender position (2), sender capacity (1), sender's
// nearest-crate offset (2), nearest-crate weight (1), all in observation
// normalization.
struct Message {
  int sender_id = 0;
  std::vector<double> payload;
};

// Payload slice of a local observation (components 0,1,2,4,5,6).
std::vector<double> message_payload(const Observation& observation);

// Component-wise mean of the payloads received from other robots; zero
// vector when nothing was received.
struct AggregatedMessage {
  std::array<double, kMsgDim> values{};
  int senders_count = 0;
};

// Single-step broadcast medium: messages live exactly one time step and a
// robot never receives its own broadcast.
class MessageBus {
 public:
  void broadcast(Message message);
  AggregatedMessage collect(int receiver_id) const;
  void flush();
  int outbox_size() const { return static_cast<int>(outbox_.size()); }

 private:
  std::vector<Message> outbox_;
};

}  // namespace cedqn
