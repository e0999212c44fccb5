// SPDX-License-Identifier: Apache-2.0
//
// Seeded RNG with hand-rolled output transforms. std::mt19937_64 has a
// standardized bit stream, but the standard distributions do not, so every
// draw here goes through our own mappings to keep runs bit-identical across
// platforms and library versions.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace semd {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range; the modulo bias is irrelevant at our span sizes.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  bool bernoulli(double p = 0.5) { return uniform() < p; }

  // Box-Muller; draws two uniforms per sample, no cached state.
  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * radius * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace semd
