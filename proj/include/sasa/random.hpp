// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace sasa {

// SplitMix64 step. Chosen over std::mt19937 + std distributions because the
// output sequence is identical on every platform/libstdc++ version, which the
// byte-for-byte reproducibility contracts rely on.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed and a tag. Used so that
// every consumer (corruption, shuffling, dropout masks, init) owns a stream
// that is a pure function of (base seed, purpose) instead of sharing state.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
  return splitmix64(s);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                              std::uint64_t d) {
  return mix_seed(mix_seed(a, b, c), d);
}

// Hands out per-op seeds derived from a base seed; each consumer in a forward
// pass takes the next seed so masks are reproducible without shared RNG state.
struct SeedStream {
  std::uint64_t base = 0;
  std::uint64_t counter = 0;

  explicit SeedStream(std::uint64_t b) : base(b) {}
  std::uint64_t next() { return mix_seed(base, counter++); }
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0x853C49E6748FEA9Bull) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Modulo bias is negligible at the id-table
  // sizes this project handles.
  std::uint64_t bounded(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller; draws two uniforms per call, no cached spare.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace sasa
