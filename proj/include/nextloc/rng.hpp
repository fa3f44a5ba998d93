#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace nextloc {

// splitmix64, used to derive independent sub-stream seeds from one run seed.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d4a2fa9d049ac3ULL;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t stream_tag) {
  uint64_t s = seed ^ (0x5851f42d4c957f2dULL * (stream_tag + 1));
  return splitmix64(s);
}

// Deterministic RNG wrapper. The engine (mt19937_64) is fully specified by
// the standard; the integer/real helpers below avoid std::uniform_*_distribution,
// whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, n) via rejection.
  uint64_t uniform_below(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  int64_t uniform_int(int64_t lo, int64_t hi) {  // inclusive range
    return lo + static_cast<int64_t>(uniform_below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {  // Fisher-Yates, stable across platforms
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nextloc
