#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cassi/types.hpp"

// Reconstruction quality measures: mean squared error, peak signal-to-noise
// ratio (cube-level and band-mean), and mean structural similarity computed
// per band with the standard 11x11 Gaussian window.

namespace cassi {
namespace metrics {

namespace detail {

inline void check_pair(const HyperCube& a, const HyperCube& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("metrics: cubes must share one shape");
  if (a.size() == 0) throw std::invalid_argument("metrics: empty cubes");
}

/// 11x11 Gaussian window, sigma 1.5, normalized to unit sum.
inline const std::vector<double>& ssim_window() {
  static const std::vector<double> w = [] {
    std::vector<double> win(11 * 11);
    double sum = 0.0;
    for (int r = 0; r < 11; ++r) {
      for (int c = 0; c < 11; ++c) {
        double dr = r - 5, dc = c - 5;
        double v = std::exp(-(dr * dr + dc * dc) / (2.0 * 1.5 * 1.5));
        win[r * 11 + c] = v;
        sum += v;
      }
    }
    for (double& v : win) v /= sum;
    return win;
  }();
  return w;
}

}  // namespace detail

/// Mean squared error over every element, compensated fixed-order sum.
inline double mse(const HyperCube& a, const HyperCube& b) {
  detail::check_pair(a, b);
  KahanSum acc;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - b.data[i];
    acc.add(d * d);
  }
  return acc.value() / static_cast<double>(a.size());
}

/// 10 log10(peak^2 / mse); identical inputs give +infinity.
inline double psnr_from_mse(double mse_value, double peak = 1.0) {
  if (!(peak > 0.0)) throw std::invalid_argument("metrics: peak must be positive");
  if (mse_value < 0.0) throw std::invalid_argument("metrics: negative mse");
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse_value);
}

inline double psnr_cube(const HyperCube& a, const HyperCube& b, double peak = 1.0) {
  return psnr_from_mse(mse(a, b), peak);
}

/// Per-band PSNR values, in band order.
inline std::vector<double> psnr_bands(const HyperCube& a, const HyperCube& b, double peak = 1.0) {
  detail::check_pair(a, b);
  std::vector<double> out(a.bands);
  const std::size_t plane = a.height * a.width;
  for (std::size_t c = 0; c < a.bands; ++c) {
    KahanSum acc;
    for (std::size_t p = 0; p < plane; ++p) {
      double d = a.data[c * plane + p] - b.data[c * plane + p];
      acc.add(d * d);
    }
    out[c] = psnr_from_mse(acc.value() / static_cast<double>(plane), peak);
  }
  return out;
}

inline double psnr_band_mean(const HyperCube& a, const HyperCube& b, double peak = 1.0) {
  std::vector<double> bands = psnr_bands(a, b, peak);
  KahanSum acc;
  for (double v : bands) acc.add(v);
  return acc.value() / static_cast<double>(bands.size());
}

/// Mean structural similarity of one band pair over fully-interior 11x11
/// windows (Gaussian weights, sigma 1.5, C1 = (0.01 L)^2, C2 = (0.03 L)^2).
/// Bands smaller than the window are rejected.
inline double ssim_band(const double* a, const double* b, std::size_t H, std::size_t W,
                        double L = 1.0) {
  if (H < 11 || W < 11)
    throw std::invalid_argument("metrics: ssim needs bands of at least 11 x 11");
  if (!(L > 0.0)) throw std::invalid_argument("metrics: dynamic range must be positive");
  const double c1 = (0.01 * L) * (0.01 * L);
  const double c2 = (0.03 * L) * (0.03 * L);
  const std::vector<double>& win = detail::ssim_window();

  KahanSum total;
  std::size_t count = 0;
  for (std::size_t y = 0; y + 11 <= H; ++y) {
    for (std::size_t x = 0; x + 11 <= W; ++x) {
      double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
      for (std::size_t r = 0; r < 11; ++r) {
        const double* pa = a + (y + r) * W + x;
        const double* pb = b + (y + r) * W + x;
        const double* pw = win.data() + r * 11;
        for (std::size_t c = 0; c < 11; ++c) {
          double wgt = pw[c];
          ma += wgt * pa[c];
          mb += wgt * pb[c];
          aa += wgt * pa[c] * pa[c];
          bb += wgt * pb[c] * pb[c];
          ab += wgt * pa[c] * pb[c];
        }
      }
      double va = aa - ma * ma;
      double vb = bb - mb * mb;
      double cov = ab - ma * mb;
      double s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
      total.add(s);
      ++count;
    }
  }
  return total.value() / static_cast<double>(count);
}

inline std::vector<double> ssim_bands(const HyperCube& a, const HyperCube& b, double L = 1.0) {
  detail::check_pair(a, b);
  const std::size_t plane = a.height * a.width;
  std::vector<double> out(a.bands);
  for (std::size_t c = 0; c < a.bands; ++c)
    out[c] = ssim_band(a.data.data() + c * plane, b.data.data() + c * plane, a.height, a.width, L);
  return out;
}

/// Mean of the per-band structural similarities.
inline double ssim(const HyperCube& a, const HyperCube& b, double L = 1.0) {
  std::vector<double> bands = ssim_bands(a, b, L);
  KahanSum acc;
  for (double v : bands) acc.add(v);
  return acc.value() / static_cast<double>(bands.size());
}

/// Bundle of every quality measure for one reference/estimate pair.
struct QualityReport {
  double mse = 0.0;
  double psnr_cube = 0.0;
  double psnr_band_mean = 0.0;
  double ssim = 0.0;
  std::vector<double> band_psnr;
  std::vector<double> band_ssim;
};

inline QualityReport assess(const HyperCube& reference, const HyperCube& estimate,
                            double peak = 1.0) {
  QualityReport q;
  q.mse = mse(reference, estimate);
  q.psnr_cube = psnr_from_mse(q.mse, peak);
  q.band_psnr = psnr_bands(reference, estimate, peak);
  KahanSum acc;
  for (double v : q.band_psnr) acc.add(v);
  q.psnr_band_mean = acc.value() / static_cast<double>(q.band_psnr.size());
  q.band_ssim = ssim_bands(reference, estimate, peak);
  KahanSum sacc;
  for (double v : q.band_ssim) sacc.add(v);
  q.ssim = sacc.value() / static_cast<double>(q.band_ssim.size());
  return q;
}

}  // namespace metrics
}  // namespace cassi
