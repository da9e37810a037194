#pragma once

#include <cstdint>
#include <initializer_list>

namespace hartlab::rng {

// splitmix64 step. Used for seed expansion and stream derivation only.
inline constexpr std::uint64_t splitmix64_next(std::uint64_t& state) noexcept {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives a child seed from (seed, label path). Streams with distinct paths
// are statistically independent; the derivation is pure integer arithmetic
// and therefore identical on every platform.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                           std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t state = seed;
  for (std::uint64_t label : path) {
    state ^= 0x9e3779b97f4a7c15ull + (label << 6) + (label >> 2);
    (void)splitmix64_next(state);
  }
  return state;
}

// xoshiro256++ generator. All episode-level randomness flows through
// per-episode instances derived with stream() so rollouts can run in any
// order (or concurrently) without changing results.
class Xoshiro256pp {
 public:
  constexpr explicit Xoshiro256pp(std::uint64_t seed) noexcept : s_{} {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64_next(sm);
  }

  constexpr std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  constexpr double next_double() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). Lemire's multiply-shift with rejection.
  constexpr std::uint64_t next_below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
};

inline constexpr Xoshiro256pp stream(std::uint64_t seed,
                                     std::initializer_list<std::uint64_t> path) noexcept {
  return Xoshiro256pp(derive_seed(seed, path));
}

}  // namespace hartlab::rng
