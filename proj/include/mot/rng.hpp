#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mot/common.hpp"

namespace mot {

namespace detail {

// splitmix64 finalizer (Steele, Lea, Flood 2014).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Deterministic seed derivation: the (index+1)-th output of a splitmix64
// sequence started at `master`. Used for replicate streams and for
// nested experiment levels (trial -> data/test seeds).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return detail::splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

// Seeded random stream. Replicate streams are derived from a master seed
// by a fixed splitting function, so parallel execution order never
// changes results: substream(master, r) is the (r+1)-th output of a
// splitmix64 sequence started at `master`.
//
// All samplers below consume the underlying mt19937_64 stream in a fixed,
// documented order; outputs are bit-reproducible for a given seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(detail::splitmix64(seed)) {}

  static RngStream substream(std::uint64_t master, std::uint64_t index) {
    return RngStream(derive_seed(master, index));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound) by rejection; bound >= 1.
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0) fail(Errc::invalid_size, "uniform_below(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % bound;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return v % bound;
  }

  // Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Multinomial counts: m draws over `weights` (nonnegative, summing to
  // ~1) by inverse-CDF lookup per draw.
  std::vector<std::uint64_t> multinomial(std::uint64_t m,
                                         const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    std::vector<double> cum(n);
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (weights[j] > 0.0) last_positive = j;
      acc += weights[j];
      cum[j] = acc;
    }
    std::vector<std::uint64_t> counts(n, 0);
    for (std::uint64_t t = 0; t < m; ++t) {
      const double u = uniform01() * acc;
      auto it = std::upper_bound(cum.begin(), cum.end(), u);
      std::size_t idx = static_cast<std::size_t>(it - cum.begin());
      if (idx >= n) idx = last_positive;  // guards cumulative round-off
      counts[idx] += 1;
    }
    return counts;
  }

  // Fisher-Yates shuffle, deterministic for a given stream state.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mot
