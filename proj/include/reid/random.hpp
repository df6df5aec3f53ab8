#pragma once

#include <cstdint>

namespace reid {

// Counter-based splittable PRNG. Draw i of a stream is
//   mix64(seed + (i+1) * 0x9E3779B97F4A7C15)
// where mix64 is the SplitMix64 finalizer, so every output is a pure
// function of (seed, counter). Child streams are derived as
//   child.seed = mix64(seed ^ mix64(label + 0x9E3779B97F4A7C15))
// which makes (seed, label) fully determine the child sequence.
struct RandomStream {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  RandomStream() = default;
  explicit RandomStream(std::uint64_t s) : seed(s) {}

  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t next_u64() {
    counter += 1;
    return mix64(seed + counter * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Standard normal via Box-Muller; consumes two draws per call.
  double next_normal();

  // Uniform integer in [0, n); n must be positive.
  std::int64_t next_below(std::int64_t n);

  RandomStream split(std::uint64_t label) const {
    return RandomStream(mix64(seed ^ mix64(label + 0x9E3779B97F4A7C15ULL)));
  }
};

}  // namespace reid
