#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cedqn/comms.hpp"

using namespace cedqn;

TEST_CASE("broadcast appends to the current-step outbox") {
  MessageBus bus;
  bus.broadcast({0, {1, 0, 0, 0, 0, 0}});
  bus.broadcast({1, {0, 1, 0, 0, 0, 0}});
  CHECK(bus.outbox_size() == 2);
}

TEST_CASE("broadcast rejects a wrong-arity payload") {
  MessageBus bus;
  CHECK_THROWS_AS(bus.broadcast({0, {1, 2, 3, 4, 5}}), std::invalid_argument);
  CHECK_THROWS_AS(bus.broadcast({0, {1, 2, 3, 4, 5, 6, 7}}), std::invalid_argument);
}

TEST_CASE("collect averages payloads from other senders") {
  MessageBus bus;
  bus.broadcast({0, {1, 0, 0, 0, 0, 0}});
  bus.broadcast({1, {0, 1, 0, 0, 0, 0}});
  const AggregatedMessage agg = bus.collect(2);
  CHECK(agg.senders_count == 2);
  CHECK(agg.values[0] == 0.5);
  CHECK(agg.values[1] == 0.5);
  for (int i = 2; i < kMsgDim; ++i) CHECK(agg.values[i] == 0.0);
}

TEST_CASE("collect with no messages is the zero vector") {
  MessageBus bus;
  const AggregatedMessage agg = bus.collect(0);
  CHECK(agg.senders_count == 0);
  for (double v : agg.values) CHECK(v == 0.0);
}

TEST_CASE("a robot never receives its own broadcast") {
  MessageBus bus;
  bus.broadcast({3, {1, 1, 1, 1, 1, 1}});
  const AggregatedMessage own = bus.collect(3);
  CHECK(own.senders_count == 0);
  for (double v : own.values) CHECK(v == 0.0);
  const AggregatedMessage other = bus.collect(4);
  CHECK(other.senders_count == 1);
  CHECK(other.values[0] == 1.0);
}

TEST_CASE("flush clears the outbox and is idempotent") {
  MessageBus bus;
  bus.broadcast({0, {1, 2, 3, 4, 5, 6}});
  bus.flush();
  CHECK(bus.outbox_size() == 0);
  CHECK(bus.collect(1).senders_count == 0);
  bus.flush();
  CHECK(bus.outbox_size() == 0);
  bus.broadcast({0, {1, 2, 3, 4, 5, 6}});
  CHECK(bus.outbox_size() == 1);
}

TEST_CASE("aggregated values stay within the payload component hull") {
  MessageBus bus;
  bus.broadcast({0, {0.2, 0.4, 0.6, -0.5, 0.5, 1.0}});
  bus.broadcast({1, {0.8, 0.0, 0.2, 0.5, -0.5, 0.0}});
  bus.broadcast({2, {0.5, 1.0, 0.4, 0.0, 0.0, 0.6}});
  const AggregatedMessage agg = bus.collect(9);
  const double lo[kMsgDim] = {0.2, 0.0, 0.2, -0.5, -0.5, 0.0};
  const double hi[kMsgDim] = {0.8, 1.0, 0.6, 0.5, 0.5, 1.0};
  for (int i = 0; i < kMsgDim; ++i) {
    CHECK(agg.values[i] >= lo[i]);
    CHECK(agg.values[i] <= hi[i]);
  }
}

TEST_CASE("message_payload slices the observation layout") {
  Observation obs{0.1, 0.2, 0.6, 1.0, -0.3, 0.4, 0.8, 0.4, 0.5};
  const auto payload = message_payload(obs);
  REQUIRE(payload.size() == kMsgDim);
  CHECK(payload[0] == 0.1);
  CHECK(payload[1] == 0.2);
  CHECK(payload[2] == 0.6);
  CHECK(payload[3] == -0.3);
  CHECK(payload[4] == 0.4);
  CHECK(payload[5] == 0.8);
}
