#pragma once

// Counter-derived random streams. Every logical unit (subject, replicate,
// fold shuffle, tree bootstrap) gets its own xoshiro256++ stream derived from
// a parent seed via splitmix64 mixing, so draws are independent of thread
// scheduling and of the order units are processed in.

#include <cstdint>
#include <cmath>

#include "pairlot/stats.hpp"

namespace pairlot {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stream splitting: child seed for unit `index` under `parent`.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  std::uint64_t s = parent ^ (0x9E3779B97F4A7C15ULL * (index + 1));
  return splitmix64_next(s);
}

class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t seed = 1) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64_next(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ULL; }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on (0,1), strictly interior so it can feed inverse CDFs.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  // Inverse-CDF normal: one uniform per draw, no hidden state.
  double normal() { return normal_quantile(uniform()); }

  bool bernoulli(double p) { return uniform() < p; }

  // Weibull with survival exp(-(x/scale)^shape).
  double weibull(double shape, double scale) {
    return scale * std::pow(-std::log(uniform()), 1.0 / shape);
  }

  int uniform_int(int n) {  // 0..n-1
    return static_cast<int>((*this)() % static_cast<std::uint64_t>(n));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

}  // namespace pairlot
