#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "modinv/error.hpp"

namespace modinv {

// splitmix64 mixing step. Used both for seed derivation and to expand a
// single u64 seed into the xoshiro state.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives an independent child seed from a base seed and a tag. Streams
// derived with distinct tags are decorrelated; the same (base, tag) pair
// always yields the same child.
inline uint64_t derive_seed(uint64_t base, uint64_t tag) {
  uint64_t s = base ^ (0x9E3779B97F4A7C15ull * (tag + 1));
  uint64_t a = splitmix64(s);
  uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

inline uint64_t derive_seed(uint64_t base, uint64_t tag1, uint64_t tag2) {
  return derive_seed(derive_seed(base, tag1), tag2);
}

// xoshiro256++ with splitmix64 seeding. Self-contained so that every
// distribution below is bit-reproducible across compilers and platforms
// (std::normal_distribution et al. are not specified by the standard).
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
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

  // Uniform double in [0, 1), 53 mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n). n must be nonzero.
  uint64_t below(uint64_t n) {
    if (n == 0) throw_error(ErrorKind::contract, "Rng::below called with n=0");
    // Lemire's multiply-shift rejection method.
    uint64_t x = next_u64();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    auto lo = static_cast<uint64_t>(m);
    if (lo < n) {
      const uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        x = next_u64();
        m = static_cast<unsigned __int128>(x) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    // u1 in (0,1] so that log() stays finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  bool coin() { return (next_u64() >> 63) != 0; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t state_[4] = {};
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace modinv
