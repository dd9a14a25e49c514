#pragma once

#include <cmath>
#include <cstdint>

namespace cassi {

/// SplitMix64 generator (Steele, Lea & Flood mixing constants). One 64-bit
/// word of state; the full output sequence is determined by the seed, which
/// is what every seeded operation in this library builds on.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1): next() / 2^64.
  double next_unit() { return static_cast<double>(next()) * 0x1p-64; }

  /// One Box-Muller pair of independent standard normals. The radial draw
  /// uses 1 - u so the argument of log() stays in (0, 1].
  void next_gauss_pair(double& g0, double& g1) {
    double u1 = 1.0 - next_unit();
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;  // 2*pi*u2
    g0 = r * std::cos(a);
    g1 = r * std::sin(a);
  }

 private:
  std::uint64_t state_;
};

}  // namespace cassi
