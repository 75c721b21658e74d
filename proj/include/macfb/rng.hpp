// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random streams. The engine is the standard mt19937_64, whose
// output sequence is fully specified, and all real-valued draws are derived
// from its raw 64-bit words so sequences are bit-identical across platforms.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

#include "macfb/numerics.hpp"

namespace macfb {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard real Gaussian via Box-Muller; the sine partner is cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Circular-symmetric complex Gaussian with E|z|^2 = 1, i.e. real and
  /// imaginary parts independent N(0, 1/2).
  Complex cgaussian() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  /// Uniform direction on the complex unit sphere of the given dimension.
  CVector unit_vector(Eigen::Index dim) {
    CVector v(dim);
    double norm2 = 0.0;
    do {
      for (Eigen::Index i = 0; i < dim; ++i) v(i) = cgaussian();
      norm2 = v.squaredNorm();
    } while (!(norm2 > 1e-300));
    return v / std::sqrt(norm2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // rejection sampling keeps the draw unbiased
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Stable substream derivation: hashes the seed with a path of integers so
  /// independent tasks get decorrelated, reproducible streams.
  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(seed ^ 0x243F6A8885A308D3ULL);
    for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p));
    return s;
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace macfb
