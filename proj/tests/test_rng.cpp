#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cedqn/rng.hpp"

using cedqn::Rng;

TEST_CASE("same seed gives the same sequence") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++equal;
  CHECK(equal == 0);
}

TEST_CASE("next_double stays in [0,1)") {
  Rng rng(7);
  for (int i = 0; i < 100000; ++i) {
    const double x = rng.next_double();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("next_below respects the bound and hits all residues") {
  Rng rng(9);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = rng.next_below(7);
    REQUIRE(v < 7);
    counts[v] += 1;
  }
  for (int c : counts) {
    CHECK(c > 9000);
    CHECK(c < 11000);
  }
}

TEST_CASE("derived streams are stable and independent of consumption") {
  Rng parent(1234);
  Rng child_before = parent.derive(5);
  for (int i = 0; i < 100; ++i) parent.next_u64();
  Rng child_after = parent.derive(5);
  for (int i = 0; i < 100; ++i) CHECK(child_before.next_u64() == child_after.next_u64());

  Rng c1 = parent.derive(1), c2 = parent.derive(2);
  int equal = 0;
  for (int i = 0; i < 64; ++i)
    if (c1.next_u64() == c2.next_u64()) ++equal;
  CHECK(equal == 0);
}

TEST_CASE("uniform covers the requested interval") {
  Rng rng(11);
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < 100000; ++i) {
    const double x = rng.uniform(2.0, 5.0);
    CHECK(x >= 2.0);
    CHECK(x < 5.0);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  CHECK(lo < 2.01);
  CHECK(hi > 4.99);
}
