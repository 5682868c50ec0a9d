#include "cedqn/comms.hpp"

#include <stdexcept>

namespace cedqn {

std::vector<double> message_payload(const Observation& observation) {
  return {observation[0], observation[1], observation[2],
          observation[4], observation[5], observation[6]};
}

void MessageBus::broadcast(Message message) {
  if (static_cast<int>(message.payload.size()) != kMsgDim)
    throw std::invalid_argument("broadcast: payload must have 6 components");
  outbox_.push_back(std::move(message));
}

AggregatedMessage MessageBus::collect(int receiver_id) const {
  AggregatedMessage agg;
  for (const Message& m : outbox_) {
    if (m.sender_id == receiver_id) continue;
    for (int i = 0; i < kMsgDim; ++i) agg.values[i] += m.payload[i];
    agg.senders_count += 1;
  }
  if (agg.senders_count > 0)
    for (double& v : agg.values) v /= agg.senders_count;
  return agg;
}

void MessageBus::flush() { outbox_.clear(); }

}  // namespace cedqn
