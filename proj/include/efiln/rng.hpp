#pragma once

// Portable seeded randomness.
//
// The standard <random> engines are portable but the distributions are not,
// so every draw here goes through a fixed algorithm: SplitMix64 for the raw
// 64-bit stream, 53-bit mantissa uniforms, Box-Muller normals, and
// rejection-based bounded integers. Results are identical on every platform.

#include <cstdint>
#include <span>
#include <vector>

namespace efiln {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Independent stream for (seed, index), e.g. one per sample.
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer on [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

/// Fisher-Yates shuffle driven by rng.
void shuffle(std::span<std::size_t> items, Rng& rng);

/// 0..n-1 in a seed-determined order.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace efiln
