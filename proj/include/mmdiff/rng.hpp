// Deterministic random numbers: mt19937_64 driver, Box-Muller normals,
// and splitmix64-based stream derivation so independent consumers never
// share draws implicitly.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "mmdiff/core.hpp"

namespace mmdiff {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range, rejection sampling to avoid modulo bias.
  long uniform_int(long lo, long hi) {
    if (lo > hi) throw config_error("uniform_int: empty range");
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<long>(x % span);
  }

  // Standard normal via Box-Muller; generates pairs, caches the second.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  template <class S>
  void fill_normal(S* dst, long n) {
    for (long i = 0; i < n; ++i) dst[i] = static_cast<S>(normal());
  }

  // Independent child stream: mixes this stream's seed lineage with a tag.
  Rng derive(std::uint64_t stream_tag) {
    return Rng(splitmix64(gen_() ^ splitmix64(stream_tag)));
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stateless derivation from a base seed, for reproducible per-item streams.
inline Rng derive_rng(std::uint64_t base_seed, std::uint64_t stream_tag) {
  return Rng(splitmix64(splitmix64(base_seed) ^ splitmix64(~stream_tag)));
}

}  // namespace mmdiff
