#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mtdtl {

using Rng = std::mt19937_64;

/// Derives an independent child seed (splitmix64 finalizer over seed and stream id).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// The standard distributions are implementation-defined; these are not, so
// seeded results reproduce across standard libraries.

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do r = rng();
  while (r >= limit);
  return r % n;
}

inline double normal01(Rng& rng) {
  // Box-Muller; one draw discarded to stay stateless.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  shuffle_in_place(p, rng);
  return p;
}

inline double gamma_draw(Rng& rng, double shape) {
  // Marsaglia-Tsang; shape < 1 boosted.
  if (shape < 1.0) return gamma_draw(rng, shape + 1.0) * std::pow(uniform01(rng) + 1e-300, 1.0 / shape);
  const double d = shape - 1.0 / 3.0, c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal01(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

inline std::uint64_t poisson_draw(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  if (mean > 60.0) {
    const double x = std::round(mean + std::sqrt(mean) * normal01(rng));
    return x < 0 ? 0 : static_cast<std::uint64_t>(x);
  }
  const double l = std::exp(-mean);
  std::uint64_t k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform01(rng);
  } while (p > l);
  return k - 1;
}

} // namespace mtdtl
