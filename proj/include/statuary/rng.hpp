#pragma once

#include <cstdint>

namespace statuary {

/// splitmix64. Output is fixed by the algorithm, unlike <random>
/// distributions, so seeded layouts match across standard libraries.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  auto next() -> std::uint64_t {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  auto uniform() -> double { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  auto uniform_open_closed() -> double { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

  /// Uniform integer in [0, bound).
  auto below(std::uint64_t bound) -> std::uint64_t {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound));
  }

private:
  std::uint64_t state_;
};

}  // namespace statuary
