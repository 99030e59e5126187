#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace t3conv {

// Deterministic draws built directly on the standard-pinned mt19937_64
// output stream; the standard distributions are implementation-defined, so
// every transform here is hand-rolled.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t raw() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), unbiased
  int64_t uniform_int(int64_t n) {
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x = raw();
    while (x >= limit) x = raw();
    return static_cast<int64_t>(x % un);
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // splitmix64 of (seed, stream): cheap independent substreams, e.g. one per
  // clip so generation order never matters.
  static uint64_t mix(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static Rng stream(uint64_t seed, uint64_t idx) { return Rng(mix(seed, idx)); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace t3conv
