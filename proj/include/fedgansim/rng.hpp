#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace fedgan {

// splitmix64 step; used both as a PRNG seeder and as a seed-derivation hash.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives a child seed from a parent seed and one or more tag words.
// Used everywhere a module needs its own independent stream (per-client
// data, init, minibatch, GP interpolation, per-tree forest seeds, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t s = seed ^ (tag * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull);
  return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag_a, std::uint64_t tag_b) {
  return derive_seed(derive_seed(seed, tag_a), tag_b);
}

// Deterministic PRNG with hand-rolled distributions. std::<distribution>
// implementations are not pinned by the standard, so replay guarantees
// go through this wrapper instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : s0_(0), s1_(0) {
    std::uint64_t sm = seed;
    s0_ = splitmix64(sm);
    s1_ = splitmix64(sm);
  }

  // xoroshiro128++
  std::uint64_t next_u64() {
    const std::uint64_t a = s0_, b = s1_;
    std::uint64_t r = rotl(a + b, 17) + a;
    const std::uint64_t c = a ^ b;
    s0_ = rotl(a, 49) ^ c ^ (c << 21);
    s1_ = rotl(c, 28);
    return r;
  }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (one spare cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform integer in [0, n). Lemire's multiply-shift; n > 0.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s0_, s1_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fedgan
