#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cassi/prng.hpp"
#include "cassi/types.hpp"

// Dispersed-snapshot sensing operator and its companions.
//
// One snapshot modulates every band of the cube with the same coded aperture,
// shifts band c by c*step columns and sums:
//
//     y(m, n) = sum_c M(m, n - c*step) * x(c, m, n - c*step)
//
// where out-of-range terms vanish, so the measurement is H x (W + (C-1)*step).
// The adjoint, the per-pixel Gram of Phi Phi^T (block diagonal across
// measurement pixels), the exact pseudo-inverse built from it, a cheaper
// coverage-weighted pseudo-inverse, the induced range/null projectors, a dense
// materialization for cross-checks, and a power-iteration norm estimate all
// live here.

namespace cassi {
namespace optics {

namespace detail {

/// Inclusive range of bands whose shifted window covers measurement column n.
struct BandRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
  bool empty = true;
};

inline BandRange covering_bands(std::size_t n, const SensingConfig& cfg) {
  if (cfg.step == 0) {
    if (n < cfg.width) return {0, cfg.bands - 1, false};
    return {};
  }
  std::size_t hi = std::min(n / cfg.step, cfg.bands - 1);
  std::size_t lo = 0;
  if (n + 1 > cfg.width) lo = (n + 1 - cfg.width + cfg.step - 1) / cfg.step;
  if (lo > hi) return {};
  return {lo, hi, false};
}

inline void check_cube(const HyperCube& x, const SensingConfig& cfg) {
  if (x.bands != cfg.bands || x.height != cfg.height || x.width != cfg.width)
    throw std::invalid_argument("optics: cube shape does not match sensing config");
}

inline void check_mask(const CodedAperture& m, const SensingConfig& cfg) {
  if (m.height != cfg.height || m.width != cfg.width)
    throw std::invalid_argument("optics: aperture shape does not match sensing config");
  for (double v : m.data)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("optics: aperture transmissions must lie in [0, 1]");
}

inline void check_masks(const std::vector<CodedAperture>& masks, const SensingConfig& cfg) {
  if (masks.empty()) throw std::invalid_argument("optics: at least one aperture required");
  for (const CodedAperture& m : masks) check_mask(m, cfg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward / adjoint
// ---------------------------------------------------------------------------

/// Sense one snapshot. Per output element the bands accumulate in ascending
/// order with compensated summation, so the result is independent of the
/// worker-thread count.
inline Measurement forward_shot(const HyperCube& x, const CodedAperture& mask,
                                const SensingConfig& cfg, std::size_t shot_index = 1) {
  cfg.validate();
  detail::check_cube(x, cfg);
  detail::check_mask(mask, cfg);
  const std::size_t Wm = cfg.measurement_width();
  Measurement y(cfg.height, Wm, shot_index);
  cassi::detail::parallel_blocks(cfg.height, [&](std::size_t mb, std::size_t me) {
    for (std::size_t m = mb; m < me; ++m) {
      for (std::size_t n = 0; n < Wm; ++n) {
        detail::BandRange r = detail::covering_bands(n, cfg);
        if (r.empty) continue;
        KahanSum acc;
        for (std::size_t c = r.lo; c <= r.hi; ++c) {
          std::size_t w = n - c * cfg.step;
          acc.add(mask.at(m, w) * x.at(c, m, w));
        }
        y.at(m, n) = acc.value();
      }
    }
  });
  return y;
}

/// Sense every snapshot of an acquisition (no noise).
inline MeasurementSet forward(const HyperCube& x, const std::vector<CodedAperture>& masks,
                              const SensingConfig& cfg) {
  detail::check_masks(masks, cfg);
  MeasurementSet set;
  set.shots.reserve(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i)
    set.shots.push_back(forward_shot(x, masks[i], cfg, i + 1));
  return set;
}

/// Transpose of forward: out(c, h, w) = sum_i M_i(h, w) * y_i(h, w + c*step).
inline HyperCube adjoint(const MeasurementSet& y, const std::vector<CodedAperture>& masks,
                         const SensingConfig& cfg) {
  cfg.validate();
  detail::check_masks(masks, cfg);
  y.validate(cfg);
  if (y.count() != masks.size())
    throw std::invalid_argument("optics: shot count does not match aperture count");
  const std::size_t N = masks.size();
  HyperCube out(cfg.bands, cfg.height, cfg.width);
  cassi::detail::parallel_blocks(cfg.bands * cfg.height, [&](std::size_t bb, std::size_t be) {
    for (std::size_t idx = bb; idx < be; ++idx) {
      std::size_t c = idx / cfg.height;
      std::size_t h = idx % cfg.height;
      for (std::size_t w = 0; w < cfg.width; ++w) {
        KahanSum acc;
        for (std::size_t i = 0; i < N; ++i)
          acc.add(masks[i].at(h, w) * y.shots[i].at(h, w + c * cfg.step));
        out.at(c, h, w) = acc.value();
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Per-pixel Gram of Phi Phi^T
// ---------------------------------------------------------------------------

/// Phi Phi^T is block diagonal over measurement pixels; the block at (m, n)
/// is the N x N matrix G_ij(m, n) = sum_c M_i(m, n - c*step) M_j(m, n - c*step).
struct GramField {
  std::size_t height = 0;
  std::size_t meas_width = 0;
  std::size_t shots = 0;
  std::vector<double> data;  ///< ((m*Wm + n)*N + i)*N + j

  double at(std::size_t m, std::size_t n, std::size_t i, std::size_t j) const {
    return data[((m * meas_width + n) * shots + i) * shots + j];
  }
  double& at(std::size_t m, std::size_t n, std::size_t i, std::size_t j) {
    return data[((m * meas_width + n) * shots + i) * shots + j];
  }
};

inline GramField coverage_gram(const std::vector<CodedAperture>& masks,
                               const SensingConfig& cfg) {
  cfg.validate();
  detail::check_masks(masks, cfg);
  const std::size_t N = masks.size();
  const std::size_t Wm = cfg.measurement_width();
  GramField g;
  g.height = cfg.height;
  g.meas_width = Wm;
  g.shots = N;
  g.data.assign(cfg.height * Wm * N * N, 0.0);
  cassi::detail::parallel_blocks(cfg.height, [&](std::size_t mb, std::size_t me) {
    for (std::size_t m = mb; m < me; ++m) {
      for (std::size_t n = 0; n < Wm; ++n) {
        detail::BandRange r = detail::covering_bands(n, cfg);
        if (r.empty) continue;
        for (std::size_t i = 0; i < N; ++i) {
          for (std::size_t j = i; j < N; ++j) {
            KahanSum acc;
            for (std::size_t c = r.lo; c <= r.hi; ++c) {
              std::size_t w = n - c * cfg.step;
              acc.add(masks[i].at(m, w) * masks[j].at(m, w));
            }
            g.at(m, n, i, j) = acc.value();
            g.at(m, n, j, i) = acc.value();
          }
        }
      }
    }
  });
  return g;
}

// ---------------------------------------------------------------------------
// Small symmetric eigendecomposition (cyclic Jacobi)
// ---------------------------------------------------------------------------

namespace detail {

/// Eigendecomposition of a symmetric n x n matrix by cyclic Jacobi sweeps.
/// a is row-major and is destroyed; on return evals[k] pairs with the k-th
/// column of vecs. Deterministic: fixed sweep order, fixed stopping rule.
inline void sym_eig(std::size_t n, std::vector<double>& a, std::vector<double>& evals,
                    std::vector<double>& vecs) {
  evals.assign(n, 0.0);
  vecs.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) vecs[i * n + i] = 1.0;
  if (n == 1) {
    evals[0] = a[0];
    return;
  }

  double base = 0.0;
  for (double v : a) base += v * v;
  const double stop = base * 1e-28;  // squared off-diagonal target

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a[p * n + q] * a[p * n + q];
    if (off <= stop) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a[p * n + q];
        if (apq == 0.0) continue;
        double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;

        double app = a[p * n + p], aqq = a[q * n + q];
        a[p * n + p] = app - t * apq;
        a[q * n + q] = aqq + t * apq;
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[p * n + k] = a[k * n + p];
          a[k * n + q] = s * akp + c * akq;
          a[q * n + k] = a[k * n + q];
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = vecs[k * n + p], vkq = vecs[k * n + q];
          vecs[k * n + p] = c * vkp - s * vkq;
          vecs[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k) evals[k] = a[k * n + k];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Exact pseudo-inverse  Phi^T (Phi Phi^T)^+
// ---------------------------------------------------------------------------

/// Caches the per-pixel eigendecomposition of the Gram field so repeated
/// pseudo-inverse applications (one per solver iteration) only pay the cheap
/// back-substitution.
class GramSolver {
 public:
  GramSolver(const std::vector<CodedAperture>& masks, const SensingConfig& cfg, double rcond)
      : n_(masks.size()),
        height_(cfg.height),
        meas_width_(cfg.measurement_width()),
        inv_evals_(cfg.height * cfg.measurement_width() * masks.size()),
        vecs_(cfg.height * cfg.measurement_width() * masks.size() * masks.size()) {
    if (!(rcond >= 0.0)) throw std::invalid_argument("optics: rcond must be nonnegative");
    GramField gram = coverage_gram(masks, cfg);
    cassi::detail::parallel_blocks(height_, [&](std::size_t mb, std::size_t me) {
      std::vector<double> a(n_ * n_), evals(n_), vecs(n_ * n_);
      for (std::size_t m = mb; m < me; ++m) {
        for (std::size_t n = 0; n < meas_width_; ++n) {
          std::size_t pix = m * meas_width_ + n;
          if (n_ == 1) {
            double g = gram.at(m, n, 0, 0);
            inv_evals_[pix] = g > 0.0 ? 1.0 / g : 0.0;
            vecs_[pix] = 1.0;
            continue;
          }
          for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) a[i * n_ + j] = gram.at(m, n, i, j);
          detail::sym_eig(n_, a, evals, vecs);
          double lmax = 0.0;
          for (double v : evals) lmax = std::max(lmax, v);
          for (std::size_t k = 0; k < n_; ++k) {
            double lam = evals[k];
            inv_evals_[pix * n_ + k] = lam > rcond * lmax && lam > 0.0 ? 1.0 / lam : 0.0;
          }
          std::copy(vecs.begin(), vecs.end(), vecs_.begin() + pix * n_ * n_);
        }
      }
    });
  }

  std::size_t shot_count() const { return n_; }

  /// Per-pixel w = (Phi Phi^T)^+ r: the N-vector of shot values at each
  /// measurement pixel is rotated into the eigenbasis, scaled and rotated back.
  MeasurementSet solve(const MeasurementSet& r) const {
    if (r.count() != n_)
      throw std::invalid_argument("optics: measurement count does not match Gram solver");
    MeasurementSet w;
    w.shots.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i)
      w.shots.emplace_back(height_, meas_width_, i + 1);
    cassi::detail::parallel_blocks(height_, [&](std::size_t mb, std::size_t me) {
      std::vector<double> rv(n_), tv(n_);
      for (std::size_t m = mb; m < me; ++m) {
        for (std::size_t n = 0; n < meas_width_; ++n) {
          std::size_t pix = m * meas_width_ + n;
          if (n_ == 1) {
            w.shots[0].at(m, n) = inv_evals_[pix] * r.shots[0].at(m, n);
            continue;
          }
          const double* V = vecs_.data() + pix * n_ * n_;
          for (std::size_t i = 0; i < n_; ++i) rv[i] = r.shots[i].at(m, n);
          for (std::size_t k = 0; k < n_; ++k) {
            KahanSum acc;
            for (std::size_t i = 0; i < n_; ++i) acc.add(V[i * n_ + k] * rv[i]);
            tv[k] = inv_evals_[pix * n_ + k] * acc.value();
          }
          for (std::size_t i = 0; i < n_; ++i) {
            KahanSum acc;
            for (std::size_t k = 0; k < n_; ++k) acc.add(V[i * n_ + k] * tv[k]);
            w.shots[i].at(m, n) = acc.value();
          }
        }
      }
    });
    return w;
  }

 private:
  std::size_t n_;
  std::size_t height_;
  std::size_t meas_width_;
  std::vector<double> inv_evals_;  ///< per pixel: N reciprocal eigenvalues (0 when cut)
  std::vector<double> vecs_;       ///< per pixel: N x N eigenvector matrix
};

/// Moore-Penrose pseudo-inverse application x = Phi^T (Phi Phi^T)^+ y, solved
/// pixel by pixel. Eigenvalues at or below rcond * (largest eigenvalue of the
/// pixel block) are treated as zero.
inline HyperCube pinv_exact(const MeasurementSet& y, const std::vector<CodedAperture>& masks,
                            const SensingConfig& cfg, double rcond = 1e-10) {
  GramSolver solver(masks, cfg, rcond);
  return adjoint(solver.solve(y), masks, cfg);
}

// ---------------------------------------------------------------------------
// Range / null projectors
// ---------------------------------------------------------------------------

/// Orthogonal projection onto the row space of the sensing operator.
inline HyperCube project_range(const HyperCube& x, const std::vector<CodedAperture>& masks,
                               const SensingConfig& cfg, double rcond = 1e-10) {
  return pinv_exact(forward(x, masks, cfg), masks, cfg, rcond);
}

/// Complementary projection: x minus its range component. Any cube passed
/// through here is invisible to the sensing operator.
inline HyperCube project_null(const HyperCube& x, const std::vector<CodedAperture>& masks,
                              const SensingConfig& cfg, double rcond = 1e-10) {
  HyperCube range = project_range(x, masks, cfg, rcond);
  HyperCube out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= range.data[i];
  return out;
}

// ---------------------------------------------------------------------------
// Coverage-weighted pseudo-inverse (crop-and-average estimate)
// ---------------------------------------------------------------------------

/// Per-column weights 1 / (number of bands covering the column); columns no
/// band reaches get weight 0 (they are never read back either).
inline std::vector<double> coverage_alpha(const SensingConfig& cfg) {
  cfg.validate();
  std::vector<double> alpha(cfg.measurement_width(), 0.0);
  for (std::size_t n = 0; n < alpha.size(); ++n) {
    detail::BandRange r = detail::covering_bands(n, cfg);
    if (!r.empty) alpha[n] = 1.0 / static_cast<double>(r.hi - r.lo + 1);
  }
  return alpha;
}

/// Per-band weights used around the cheap pseudo-inverse: F modulates the
/// forward model, E divides the back-projected estimate. Values of E are
/// bounded away from zero.
struct EnhancedMask {
  HyperCube F;  ///< bands x H x W modulation weights
  HyperCube E;  ///< bands x H x W division weights, each >= its floor
};

enum class EnhanceMode {
  masked,   ///< E_c = max(M, floor): divide only where the aperture transmits
  uniform,  ///< E_c = 1: plain crop-and-average
};

inline EnhancedMask make_enhanced(const CodedAperture& mask, const SensingConfig& cfg,
                                  EnhanceMode mode = EnhanceMode::masked,
                                  double floor_eps = 1e-3) {
  cfg.validate();
  detail::check_mask(mask, cfg);
  if (!(floor_eps > 0.0))
    throw std::invalid_argument("optics: enhanced-mask floor must be positive");
  EnhancedMask em;
  em.F = HyperCube(cfg.bands, cfg.height, cfg.width);
  em.E = HyperCube(cfg.bands, cfg.height, cfg.width);
  for (std::size_t c = 0; c < cfg.bands; ++c) {
    for (std::size_t h = 0; h < cfg.height; ++h) {
      for (std::size_t w = 0; w < cfg.width; ++w) {
        double m = mask.at(h, w);
        em.F.at(c, h, w) = m;
        em.E.at(c, h, w) = mode == EnhanceMode::uniform ? 1.0 : std::max(m, floor_eps);
      }
    }
  }
  return em;
}

/// Cheap pseudo-inverse of one snapshot: scale each measurement column by its
/// coverage weight, slide the W-wide window back to each band's offset and
/// divide by E. With all-ones masks and E = 1 this is an exact right inverse.
inline HyperCube pinv_appendix(const Measurement& y, const EnhancedMask& enhanced,
                               const SensingConfig& cfg) {
  cfg.validate();
  if (y.height != cfg.height || y.width != cfg.measurement_width())
    throw std::invalid_argument("optics: measurement shape does not match sensing config");
  if (enhanced.E.bands != cfg.bands || enhanced.E.height != cfg.height ||
      enhanced.E.width != cfg.width)
    throw std::invalid_argument("optics: enhanced mask shape does not match sensing config");

  std::vector<double> alpha = coverage_alpha(cfg);
  HyperCube out(cfg.bands, cfg.height, cfg.width);
  cassi::detail::parallel_blocks(cfg.bands * cfg.height, [&](std::size_t bb, std::size_t be) {
    for (std::size_t idx = bb; idx < be; ++idx) {
      std::size_t c = idx / cfg.height;
      std::size_t h = idx % cfg.height;
      for (std::size_t w = 0; w < cfg.width; ++w) {
        std::size_t n = w + c * cfg.step;
        out.at(c, h, w) = alpha[n] * y.at(h, n) / enhanced.E.at(c, h, w);
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Dense materialization (oracle route)
// ---------------------------------------------------------------------------

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;  ///< row-major

  double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
};

/// Materialize the sensing operator as a dense (N*H*Wm) x (C*H*W) matrix.
/// Row ((i*H)+m)*Wm + n, column ((c*H)+h)*W + w. Intended for small
/// cross-check instances; anything above the entry cap is refused.
inline DenseMatrix build_dense_phi(const std::vector<CodedAperture>& masks,
                                   const SensingConfig& cfg,
                                   std::size_t entry_cap = 10'000'000) {
  cfg.validate();
  detail::check_masks(masks, cfg);
  const std::size_t N = masks.size();
  const std::size_t Wm = cfg.measurement_width();
  const std::size_t rows = N * cfg.height * Wm;
  const std::size_t cols = cfg.bands * cfg.height * cfg.width;
  if (rows * cols > entry_cap)
    throw cap_error("dense operator would hold " + std::to_string(rows) + " x " +
                    std::to_string(cols) + " = " + std::to_string(rows * cols) +
                    " entries; cap is " + std::to_string(entry_cap));

  DenseMatrix phi;
  phi.rows = rows;
  phi.cols = cols;
  phi.a.assign(rows * cols, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t m = 0; m < cfg.height; ++m) {
      for (std::size_t n = 0; n < Wm; ++n) {
        detail::BandRange r = detail::covering_bands(n, cfg);
        if (r.empty) continue;
        std::size_t row = (i * cfg.height + m) * Wm + n;
        for (std::size_t c = r.lo; c <= r.hi; ++c) {
          std::size_t w = n - c * cfg.step;
          std::size_t col = (c * cfg.height + m) * cfg.width + w;
          phi.at(row, col) = masks[i].at(m, w);
        }
      }
    }
  }
  return phi;
}

// ---------------------------------------------------------------------------
// Spectral-norm estimate
// ---------------------------------------------------------------------------

/// Power iteration on Phi^T Phi from a seeded start. Rayleigh quotients are
/// monotone non-decreasing; the estimate converges to ||Phi||_2 from below.
/// Pass a vector to collect the per-iteration sqrt(Rayleigh) sequence.
inline double operator_norm(const std::vector<CodedAperture>& masks, const SensingConfig& cfg,
                            std::size_t iters = 50, std::uint64_t seed = 1,
                            std::vector<double>* estimates = nullptr) {
  cfg.validate();
  detail::check_masks(masks, cfg);
  if (iters == 0) throw std::invalid_argument("optics: operator_norm needs at least one iteration");

  SplitMix64 rng(seed);
  HyperCube x(cfg.bands, cfg.height, cfg.width);
  for (double& v : x.data) v = rng.next_unit();

  double estimate = 0.0;
  for (std::size_t k = 0; k < iters; ++k) {
    HyperCube z = adjoint(forward(x, masks, cfg), masks, cfg);
    double xz = cassi::detail::buffer_dot(x.data, z.data);
    double xx = cassi::detail::buffer_dot(x.data, x.data);
    if (xx == 0.0) break;  // operator annihilated the start vector
    estimate = std::sqrt(std::max(xz / xx, 0.0));
    if (estimates) estimates->push_back(estimate);
    double zz = std::sqrt(cassi::detail::buffer_dot(z.data, z.data));
    if (zz == 0.0) break;
    for (double& v : z.data) v /= zz;
    x = std::move(z);
  }
  return estimate;
}

}  // namespace optics
}  // namespace cassi
