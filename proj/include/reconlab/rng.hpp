#pragma once

// Seedable, portable random number generation. Everything here is fully
// deterministic given a 64-bit seed, independent of platform and standard
// library: experiment outputs must be reproducible byte-for-byte, and the
// std:: distributions make no cross-implementation guarantees.
//
// Generator identity (recorded in output metadata): xoshiro256** seeded
// via splitmix64; stream splitting via derive_seed(master, index).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace reconlab {

// Finalizer of splitmix64; also used as a general 64-bit mixer.
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  return splitmix64_mix(state);
}

// Deterministic per-task seed derivation: element `index` of the splitmix64
// stream started at `master`. Constant time, no shared state, so concurrent
// workers can derive their own streams independently.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64_mix(master + (index + 1) * 0x9e3779b97f4a7c15ULL);
}

class Xoshiro256ss {
 public:
  explicit Xoshiro256ss(std::uint64_t seed) {
    // Seed the four state words from splitmix64 as recommended by the
    // generator's authors; avoids the all-zero state for every seed.
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64_next(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform double in [-w, w).
  double uniform_sym(double w) { return w * (2.0 * uniform01() - 1.0); }

  // Single fair bit.
  int bit() { return static_cast<int>(next() >> 63); }

  double rademacher() { return bit() ? 1.0 : -1.0; }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("below: bound must be positive");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via Box-Muller (pair cached).
  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  std::vector<std::uint8_t> random_bits(std::size_t n) {
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(bit());
    return out;
  }

  // First `k` elements of a random permutation of {0,..,n-1} (partial
  // Fisher-Yates); used to pick corruption positions without replacement.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

  static const char* name() { return "xoshiro256** (splitmix64 seeding)"; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace reconlab
