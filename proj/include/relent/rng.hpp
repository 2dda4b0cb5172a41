#pragma once

#include <cstdint>

namespace relent {

// Counter-based generator: every draw is a pure function of (seed, stream, counter),
// so results do not depend on how work is scheduled across threads.

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream,
                                            std::uint64_t counter) noexcept {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc908ULL);
  h = splitmix64(h ^ stream);
  return splitmix64(h ^ (counter * 0xd1342543de82ef95ULL));
}

/// Uniform double in [0, 1) with 53 random bits.
inline constexpr double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                                        std::uint64_t counter) noexcept {
  return static_cast<double>(counter_hash(seed, stream, counter) >> 11) * 0x1.0p-53;
}

/// Sequential view over one (seed, stream) pair.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64() noexcept { return counter_hash(seed_, stream_, counter_++); }
  double uniform() noexcept { return counter_uniform(seed_, stream_, counter_++); }
  int bit() noexcept { return static_cast<int>(next_u64() >> 63); }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

/// Derives an independent stream id from a parent seed and a label.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(label + 0x243f6a8885a308d3ULL));
}

}  // namespace relent
