#pragma once

#include <array>
#include <cstdint>

namespace cedqn {

// Deterministic PRNG used for every random draw in the project.
//
// Engine: xoshiro256++ seeded from a SplitMix64 expansion of a 64-bit seed.
// Independent streams (environment, each agent, each experiment cell,
// each episode) are derived with derive(key): the child seed is a hash of
// the parent's root seed and the key, so the whole tree of streams is a
// pure function of the top-level run seed and does not depend on how much
// the parent has been consumed or on execution order across threads.
class Rng {
 public:
  explicit Rng(uint64_t seed) : root_seed_(seed) {
    uint64_t z = seed;
    for (auto& word : state_) word = split_mix(z);
    // xoshiro must not start at the all-zero state.
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0,1) with 53 random mantissa bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Unbiased integer in [0, bound). bound must be > 0.
  uint64_t next_below(uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<uint64_t>(m);
    if (low < bound) {
      const uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        low = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  // Child stream keyed on (root seed, key); independent of consumption state.
  Rng derive(uint64_t key) const {
    uint64_t z = root_seed_ + 0x9E3779B97F4A7C15ull * (key + 1);
    return Rng(split_mix(z));
  }

  uint64_t root_seed() const { return root_seed_; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t split_mix(uint64_t& z) {
    z += 0x9E3779B97F4A7C15ull;
    uint64_t r = z;
    r = (r ^ (r >> 30)) * 0xBF58476D1CE4E5B9ull;
    r = (r ^ (r >> 27)) * 0x94D049BB133111EBull;
    return r ^ (r >> 31);
  }

  uint64_t root_seed_;
  std::array<uint64_t, 4> state_{};
};

// Stream keys: keep all derivations in one place so no two components
// can collide by accident.
namespace stream {
inline constexpr uint64_t kEnv = 0x01;
inline constexpr uint64_t kAgentBase = 0x100;       // + robot_id
inline constexpr uint64_t kAgentQInit = 0x1;       // from the agent stream
inline constexpr uint64_t kAgentCommInit = 0x2;    // from the agent stream
inline constexpr uint64_t kAgentDraws = 0x3;       // from the agent stream
inline constexpr uint64_t kEpisodeBase = 0x10000;  // + episode index
inline constexpr uint64_t kEvalBase = 0x200000;    // + trial/task-size key
}  // namespace stream

}  // namespace cedqn
