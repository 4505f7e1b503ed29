#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace recsim {

/// splitmix64 mixing step. Seed derivation goes through this so that derived
/// streams (per trial, per method) are stable: adding trials or methods never
/// perturbs the seeds of earlier ones.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Fold additional words into a seed, one splitmix64 round per word.
inline std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t w : words) h = splitmix64(h ^ w);
  return h;
}

/// Deterministic random source. The engine is std::mt19937_64; all
/// distributions are implemented here rather than through <random>'s
/// distribution templates, whose output is implementation-defined. Every
/// stochastic operation in the library takes one of these explicitly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Unbiased integer in [0, n). Rejection sampling on the top of the range.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Gaussian via Box-Muller, one spare cached.
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    const double u1 = 1.0 - unit();  // (0, 1], keeps log finite
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  /// Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Draw an index proportionally to non-negative weights. The weights need
  /// not be normalized. Falls back to the last positive weight if rounding
  /// pushes the cursor past the end.
  std::size_t weighted_index(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double cursor = unit() * total;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) last_positive = i;
      cursor -= weights[i];
      if (cursor < 0.0 && weights[i] > 0.0) return i;
    }
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace recsim
