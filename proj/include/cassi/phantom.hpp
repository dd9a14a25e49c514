#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cassi/prng.hpp"
#include "cassi/types.hpp"

namespace cassi {

/// Recipe for a synthetic test scene: a flat background plus a number of
/// Gaussian blobs, each spatially smooth and spectrally peaked.
struct PhantomSpec {
  std::uint64_t seed = 0;
  std::size_t blobs = 8;
  double background = 0.1;     ///< flat base level in [0, 1]
  double spectral_sigma = 1.5; ///< width (in bands) of each blob's spectrum
  double radius_min = 4.0;     ///< spatial sigma range, in pixels
  double radius_max = 10.0;

  void validate() const {
    if (!(background >= 0.0 && background <= 1.0))
      throw std::invalid_argument("phantom: background must lie in [0, 1]");
    if (!(spectral_sigma > 0.0))
      throw std::invalid_argument("phantom: spectral sigma must be positive");
    if (!(radius_min > 0.0) || radius_max < radius_min)
      throw std::invalid_argument("phantom: need 0 < radius_min <= radius_max");
  }
};

/// Deterministic synthetic cube in [0, 1]. One SplitMix64 stream seeded with
/// spec.seed supplies, per blob and in this order: row center, column center,
/// radius, amplitude, spectral center. Same seed, same cube, bit for bit.
inline HyperCube make_phantom(const PhantomSpec& spec, const SensingConfig& cfg) {
  spec.validate();
  cfg.validate();
  const std::size_t C = cfg.bands, H = cfg.height, W = cfg.width;
  HyperCube cube(C, H, W, spec.background);

  SplitMix64 rng(spec.seed);
  for (std::size_t b = 0; b < spec.blobs; ++b) {
    double hc = rng.next_unit() * static_cast<double>(H);
    double wc = rng.next_unit() * static_cast<double>(W);
    double r = spec.radius_min + rng.next_unit() * (spec.radius_max - spec.radius_min);
    double amp = 0.3 + 0.7 * rng.next_unit();
    double c0 = C > 1 ? rng.next_unit() * static_cast<double>(C - 1) : 0.0;

    double inv2r2 = 1.0 / (2.0 * r * r);
    double inv2s2 = 1.0 / (2.0 * spec.spectral_sigma * spec.spectral_sigma);
    for (std::size_t c = 0; c < C; ++c) {
      double dc = static_cast<double>(c) - c0;
      double spectral = std::exp(-dc * dc * inv2s2);
      for (std::size_t h = 0; h < H; ++h) {
        double dh = static_cast<double>(h) - hc;
        for (std::size_t w = 0; w < W; ++w) {
          double dw = static_cast<double>(w) - wc;
          cube.at(c, h, w) += amp * spectral * std::exp(-(dh * dh + dw * dw) * inv2r2);
        }
      }
    }
  }
  for (double& v : cube.data) v = std::clamp(v, 0.0, 1.0);
  return cube;
}

}  // namespace cassi
