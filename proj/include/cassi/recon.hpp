#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cassi/metrics.hpp"
#include "cassi/optics.hpp"
#include "cassi/types.hpp"

// Reconstruction: an isotropic TV prox (dual projection), a proximal-gradient
// solver, a generalized alternating-projection solver, and a residual
// re-projection solver that folds each phase's estimate back through a
// pseudo-inverse before denoising. All three report per-iteration progress
// and share one pluggable prox interface.

namespace cassi {
namespace recon {

// ---------------------------------------------------------------------------
// Total variation
// ---------------------------------------------------------------------------

namespace detail {

/// Isotropic TV of one band: forward differences, zero at the far edges.
inline double tv_band(const double* u, std::size_t H, std::size_t W) {
  KahanSum acc;
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t w = 0; w < W; ++w) {
      double gx = w + 1 < W ? u[h * W + w + 1] - u[h * W + w] : 0.0;
      double gy = h + 1 < H ? u[(h + 1) * W + w] - u[h * W + w] : 0.0;
      acc.add(std::sqrt(gx * gx + gy * gy));
    }
  }
  return acc.value();
}

/// Chambolle dual projection for the band prox
///   argmin_u 1/2 ||u - z||^2 + strength * TV(u),
/// fixed dual step 0.25, fixed iteration count.
inline void tv_band_prox(const double* z, double* out, std::size_t H, std::size_t W,
                         double strength, std::size_t iters) {
  const std::size_t n = H * W;
  if (strength <= 0.0) {
    std::copy(z, z + n, out);
    return;
  }
  const double tau = 0.25;
  std::vector<double> px(n, 0.0), py(n, 0.0), div(n, 0.0);
  for (std::size_t it = 0; it < iters; ++it) {
    // div(p) - z / strength
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        std::size_t p = h * W + w;
        double d = px[p] + py[p];
        if (w > 0) d -= px[p - 1];
        if (h > 0) d -= py[p - W];
        div[p] = d - z[p] / strength;
      }
    }
    // dual ascent with pointwise renormalization
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        std::size_t p = h * W + w;
        double gx = w + 1 < W ? div[p + 1] - div[p] : 0.0;
        double gy = h + 1 < H ? div[p + W] - div[p] : 0.0;
        double den = 1.0 + tau * std::sqrt(gx * gx + gy * gy);
        px[p] = (px[p] + tau * gx) / den;
        py[p] = (py[p] + tau * gy) / den;
      }
    }
  }
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t w = 0; w < W; ++w) {
      std::size_t p = h * W + w;
      double d = px[p] + py[p];
      if (w > 0) d -= px[p - 1];
      if (h > 0) d -= py[p - W];
      out[p] = z[p] - strength * d;
    }
  }
}

}  // namespace detail

/// Isotropic TV of a cube: sum of the per-band values.
inline double total_variation(const HyperCube& x) {
  const std::size_t plane = x.height * x.width;
  KahanSum acc;
  for (std::size_t c = 0; c < x.bands; ++c)
    acc.add(detail::tv_band(x.data.data() + c * plane, x.height, x.width));
  return acc.value();
}

/// Band-wise TV prox of a cube. Strength <= 0 returns the input unchanged.
/// Bands are independent, so the band loop parallelizes without changing
/// any result.
inline HyperCube tv_denoise(const HyperCube& z, double strength, std::size_t iters = 50) {
  HyperCube out(z.bands, z.height, z.width);
  const std::size_t plane = z.height * z.width;
  cassi::detail::parallel_blocks(z.bands, [&](std::size_t cb, std::size_t ce) {
    for (std::size_t c = cb; c < ce; ++c)
      detail::tv_band_prox(z.data.data() + c * plane, out.data.data() + c * plane, z.height,
                           z.width, strength, iters);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Prox interface
// ---------------------------------------------------------------------------

/// Denoising prox: maps (cube, strength) to a cube of the same shape.
/// Contract: strength 0 must return the input unchanged.
using ProxOperator = std::function<HyperCube(const HyperCube&, double)>;

inline ProxOperator identity_prox() {
  return [](const HyperCube& z, double) { return z; };
}

inline ProxOperator tv_prox(std::size_t iters = 50) {
  return [iters](const HyperCube& z, double strength) { return tv_denoise(z, strength, iters); };
}

// ---------------------------------------------------------------------------
// Solver configuration and reports
// ---------------------------------------------------------------------------

enum class Algorithm { ista, gap_tv, rnd };
enum class PinvMode { exact, appendix };
enum class InitMode { adjoint, pinv, zero };
enum class RndScope { per_shot, joint };

struct SolverConfig {
  Algorithm algorithm = Algorithm::rnd;
  std::size_t phases = 10;      ///< outer iterations K
  double rho = 0.0;             ///< ista step; <= 0 selects the automatic rule
  std::vector<double> rho_schedule;  ///< per-phase scale for rnd; empty -> all 1
  double lambda = 0.01;         ///< regularization weight
  std::string prox = "tv";      ///< "tv" or "identity" (prox_op overrides)
  ProxOperator prox_op;         ///< optional custom prox
  std::size_t tv_iters = 50;    ///< inner dual iterations of the TV prox
  std::vector<double> fusion;   ///< per-shot fusion weights; empty -> uniform
  std::vector<std::vector<double>> fusion_per_phase;  ///< optional per-phase override
  PinvMode pinv_mode = PinvMode::exact;
  double rcond = 1e-10;         ///< eigenvalue cutoff for the exact pseudo-inverse
  InitMode init = InitMode::pinv;
  RndScope rnd_scope = RndScope::per_shot;
  optics::EnhanceMode enhance = optics::EnhanceMode::masked;
  double enhance_floor = 1e-3;
  std::size_t power_iters = 50;  ///< iterations behind the automatic ista step
};

struct IterationRecord {
  std::size_t iteration = 0;   ///< 1-based
  double objective = 0.0;      ///< 1/2 ||y - forward(x)||^2 + lambda * TV(x)
  double residual_norm = 0.0;  ///< ||y - forward(x)||_2
  double psnr = std::numeric_limits<double>::quiet_NaN();  ///< vs the reference, if given
};

struct ReconReport {
  std::vector<IterationRecord> iterations;
  HyperCube cube;
  double wall_seconds = 0.0;
};

/// Called once per phase with the pre-prox and post-prox iterates.
using PhaseObserver = std::function<void(std::size_t, const HyperCube&, const HyperCube&)>;

namespace detail {

inline ProxOperator resolve_prox(const SolverConfig& scfg) {
  if (scfg.prox_op) return scfg.prox_op;
  if (scfg.prox == "tv") return tv_prox(scfg.tv_iters);
  if (scfg.prox == "identity") return identity_prox();
  throw std::invalid_argument("recon: unknown prox \"" + scfg.prox + "\"");
}

inline double residual_sq(const MeasurementSet& y, const MeasurementSet& yhat) {
  KahanSum acc;
  for (std::size_t i = 0; i < y.count(); ++i) {
    const std::vector<double>& a = y.shots[i].data;
    const std::vector<double>& b = yhat.shots[i].data;
    for (std::size_t p = 0; p < a.size(); ++p) {
      double d = a[p] - b[p];
      acc.add(d * d);
    }
  }
  return acc.value();
}

inline void check_finite(const HyperCube& x, const char* who) {
  for (double v : x.data)
    if (!std::isfinite(v))
      throw numeric_error(std::string(who) + ": iterate left the finite range; "
                          "reduce the step size or regularization");
}

inline HyperCube initial_cube(const MeasurementSet& y, const std::vector<CodedAperture>& masks,
                              const SensingConfig& cfg, const SolverConfig& scfg) {
  switch (scfg.init) {
    case InitMode::zero:
      return HyperCube(cfg.bands, cfg.height, cfg.width);
    case InitMode::adjoint:
      return optics::adjoint(y, masks, cfg);
    case InitMode::pinv: {
      // Back-project the first shot alone; later shots enter via the iterations.
      MeasurementSet first;
      first.shots.push_back(y.shots.front());
      std::vector<CodedAperture> m{masks.front()};
      if (scfg.pinv_mode == PinvMode::exact)
        return optics::pinv_exact(first, m, cfg, scfg.rcond);
      optics::EnhancedMask em =
          optics::make_enhanced(masks.front(), cfg, scfg.enhance, scfg.enhance_floor);
      return optics::pinv_appendix(y.shots.front(), em, cfg);
    }
  }
  throw std::logic_error("recon: unknown init mode");
}

inline IterationRecord make_record(std::size_t k, const HyperCube& x, const MeasurementSet& y,
                                   const std::vector<CodedAperture>& masks,
                                   const SensingConfig& cfg, double lambda,
                                   const HyperCube* reference) {
  IterationRecord rec;
  rec.iteration = k;
  double rsq = residual_sq(y, optics::forward(x, masks, cfg));
  rec.objective = 0.5 * rsq + lambda * total_variation(x);
  rec.residual_norm = std::sqrt(rsq);
  if (reference) rec.psnr = metrics::psnr_cube(*reference, x);
  return rec;
}

inline std::vector<double> fusion_weights(const SolverConfig& scfg, std::size_t phase,
                                          std::size_t shots) {
  const std::vector<double>* w = nullptr;
  if (!scfg.fusion_per_phase.empty()) {
    if (scfg.fusion_per_phase.size() < phase)
      throw std::invalid_argument("recon: missing per-phase fusion weights");
    w = &scfg.fusion_per_phase[phase - 1];
  } else if (!scfg.fusion.empty()) {
    w = &scfg.fusion;
  }
  if (!w) return std::vector<double>(shots, 1.0 / static_cast<double>(shots));
  if (w->size() != shots)
    throw std::invalid_argument("recon: fusion weights must carry one entry per shot");
  return *w;
}

inline double rho_for_phase(const SolverConfig& scfg, std::size_t phase) {
  if (scfg.rho_schedule.empty()) return 1.0;
  if (scfg.rho_schedule.size() == 1) return scfg.rho_schedule[0];
  if (scfg.rho_schedule.size() < phase)
    throw std::invalid_argument("recon: rho schedule shorter than the phase count");
  return scfg.rho_schedule[phase - 1];
}

/// Forward model with per-band weights (the F of an enhanced mask).
inline Measurement forward_weighted(const HyperCube& x, const HyperCube& F,
                                    const SensingConfig& cfg) {
  const std::size_t Wm = cfg.measurement_width();
  Measurement y(cfg.height, Wm);
  cassi::detail::parallel_blocks(cfg.height, [&](std::size_t mb, std::size_t me) {
    for (std::size_t m = mb; m < me; ++m) {
      for (std::size_t n = 0; n < Wm; ++n) {
        optics::detail::BandRange r = optics::detail::covering_bands(n, cfg);
        if (r.empty) continue;
        KahanSum acc;
        for (std::size_t c = r.lo; c <= r.hi; ++c) {
          std::size_t w = n - c * cfg.step;
          acc.add(F.at(c, m, w) * x.at(c, m, w));
        }
        y.at(m, n) = acc.value();
      }
    }
  });
  return y;
}

/// Shared state for the residual re-projection phase: per-shot or joint
/// pseudo-inverse machinery, built once and reused across phases.
class RndEngine {
 public:
  RndEngine(const std::vector<CodedAperture>& masks, const SensingConfig& cfg,
            const SolverConfig& scfg)
      : masks_(masks), cfg_(cfg), scfg_(scfg) {
    if (scfg.pinv_mode == PinvMode::exact) {
      if (scfg.rnd_scope == RndScope::joint) {
        joint_ = std::make_unique<optics::GramSolver>(masks, cfg, scfg.rcond);
      } else {
        for (const CodedAperture& m : masks_) {
          std::vector<CodedAperture> one{m};
          per_shot_.push_back(std::make_unique<optics::GramSolver>(one, cfg, scfg.rcond));
        }
      }
    } else {
      for (const CodedAperture& m : masks_)
        enhanced_.push_back(optics::make_enhanced(m, cfg, scfg.enhance, scfg.enhance_floor));
    }
  }

  /// One re-projection phase: fold the per-shot residuals back through the
  /// configured pseudo-inverse and fuse.
  HyperCube step(const HyperCube& x, const MeasurementSet& y, std::size_t phase) const {
    const std::size_t N = masks_.size();
    const double rho = rho_for_phase(scfg_, phase);

    if (joint_) {
      MeasurementSet resid;
      MeasurementSet yhat = optics::forward(x, masks_, cfg_);
      resid.shots.reserve(N);
      for (std::size_t i = 0; i < N; ++i) {
        Measurement r = y.shots[i];
        for (std::size_t p = 0; p < r.data.size(); ++p) r.data[p] -= yhat.shots[i].data[p];
        resid.shots.push_back(std::move(r));
      }
      HyperCube corr = optics::adjoint(joint_->solve(resid), masks_, cfg_);
      HyperCube z = x;
      for (std::size_t p = 0; p < z.data.size(); ++p) z.data[p] += rho * corr.data[p];
      return z;
    }

    std::vector<double> weights = fusion_weights(scfg_, phase, N);
    HyperCube z(cfg_.bands, cfg_.height, cfg_.width);
    for (std::size_t i = 0; i < N; ++i) {
      Measurement resid = scfg_.pinv_mode == PinvMode::exact
                              ? optics::forward_shot(x, masks_[i], cfg_)
                              : forward_weighted(x, enhanced_[i].F, cfg_);
      for (std::size_t p = 0; p < resid.data.size(); ++p)
        resid.data[p] = y.shots[i].data[p] - resid.data[p];

      HyperCube corr;
      if (scfg_.pinv_mode == PinvMode::exact) {
        MeasurementSet one;
        one.shots.push_back(std::move(resid));
        std::vector<CodedAperture> m{masks_[i]};
        corr = optics::adjoint(per_shot_[i]->solve(one), m, cfg_);
      } else {
        corr = optics::pinv_appendix(resid, enhanced_[i], cfg_);
      }
      // z += w_i * (x + rho * corr)
      for (std::size_t p = 0; p < z.data.size(); ++p)
        z.data[p] += weights[i] * (x.data[p] + rho * corr.data[p]);
    }
    return z;
  }

 private:
  std::vector<CodedAperture> masks_;
  SensingConfig cfg_;
  SolverConfig scfg_;
  std::unique_ptr<optics::GramSolver> joint_;
  std::vector<std::unique_ptr<optics::GramSolver>> per_shot_;
  std::vector<optics::EnhancedMask> enhanced_;
};

inline void check_inputs(const MeasurementSet& y, const std::vector<CodedAperture>& masks,
                         const SensingConfig& cfg, const SolverConfig& scfg) {
  cfg.validate();
  optics::detail::check_masks(masks, cfg);
  y.validate(cfg);
  if (y.count() != masks.size())
    throw std::invalid_argument("recon: shot count does not match aperture count");
  if (scfg.phases == 0) throw std::invalid_argument("recon: need at least one phase");
  if (!(scfg.lambda >= 0.0)) throw std::invalid_argument("recon: lambda must be nonnegative");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

/// Proximal gradient iteration
///   r = x - rho * Phi^T (Phi x - y),   x = prox(r, rho * lambda).
/// With rho <= 1 / ||Phi||^2 (the automatic rule uses 0.95 / estimate^2) the
/// composite objective in the report is non-increasing.
inline ReconReport ista_solve(const MeasurementSet& y, const std::vector<CodedAperture>& masks,
                              const SensingConfig& cfg, const SolverConfig& scfg,
                              const HyperCube* reference = nullptr,
                              const PhaseObserver& observer = {}) {
  detail::check_inputs(y, masks, cfg, scfg);
  auto t0 = std::chrono::steady_clock::now();
  ProxOperator prox = detail::resolve_prox(scfg);

  double rho = scfg.rho;
  if (rho <= 0.0) {
    double nrm = optics::operator_norm(masks, cfg, scfg.power_iters, 1);
    if (nrm <= 0.0) throw numeric_error("recon: operator norm estimate vanished");
    rho = 0.95 / (nrm * nrm);
  }

  ReconReport report;
  HyperCube x = detail::initial_cube(y, masks, cfg, scfg);
  for (std::size_t k = 1; k <= scfg.phases; ++k) {
    MeasurementSet yhat = optics::forward(x, masks, cfg);
    for (std::size_t i = 0; i < yhat.count(); ++i)
      for (std::size_t p = 0; p < yhat.shots[i].data.size(); ++p)
        yhat.shots[i].data[p] -= y.shots[i].data[p];
    HyperCube grad = optics::adjoint(yhat, masks, cfg);
    HyperCube r = x;
    for (std::size_t p = 0; p < r.data.size(); ++p) r.data[p] -= rho * grad.data[p];
    x = prox(r, rho * scfg.lambda);
    detail::check_finite(x, "ista");
    report.iterations.push_back(
        detail::make_record(k, x, y, masks, cfg, scfg.lambda, reference));
    if (observer) observer(k, r, x);
  }
  report.cube = std::move(x);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

/// Alternating projection
///   x = v + Phi^T (Phi Phi^T)^+ (y - Phi v),   v = prox(x, lambda).
/// Each x lands on the measurement-consistent affine set (where the per-pixel
/// Gram is invertible); the prox pulls v back toward the regularizer.
inline ReconReport gap_tv_solve(const MeasurementSet& y, const std::vector<CodedAperture>& masks,
                                const SensingConfig& cfg, const SolverConfig& scfg,
                                const HyperCube* reference = nullptr,
                                const PhaseObserver& observer = {}) {
  detail::check_inputs(y, masks, cfg, scfg);
  auto t0 = std::chrono::steady_clock::now();
  ProxOperator prox = detail::resolve_prox(scfg);
  optics::GramSolver solver(masks, cfg, scfg.rcond);

  ReconReport report;
  HyperCube v = detail::initial_cube(y, masks, cfg, scfg);
  HyperCube x;
  for (std::size_t k = 1; k <= scfg.phases; ++k) {
    MeasurementSet resid = optics::forward(v, masks, cfg);
    for (std::size_t i = 0; i < resid.count(); ++i)
      for (std::size_t p = 0; p < resid.shots[i].data.size(); ++p)
        resid.shots[i].data[p] = y.shots[i].data[p] - resid.shots[i].data[p];
    HyperCube corr = optics::adjoint(solver.solve(resid), masks, cfg);
    x = v;
    for (std::size_t p = 0; p < x.data.size(); ++p) x.data[p] += corr.data[p];
    detail::check_finite(x, "gap_tv");
    v = prox(x, scfg.lambda);
    report.iterations.push_back(
        detail::make_record(k, x, y, masks, cfg, scfg.lambda, reference));
    if (observer) observer(k, x, v);
  }
  report.cube = std::move(x);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

/// One residual re-projection phase (pre-prox): per shot,
///   v_i = y_i - H(x),   z_i = x + rho_k * Hpinv(v_i),   z = sum_i w_i z_i,
/// with H/Hpinv either the exact per-shot pair or the coverage-weighted
/// estimate, or a single joint correction over all shots.
inline HyperCube rnd_step(const HyperCube& x, const MeasurementSet& y,
                          const std::vector<CodedAperture>& masks, const SensingConfig& cfg,
                          const SolverConfig& scfg, std::size_t phase = 1) {
  detail::check_inputs(y, masks, cfg, scfg);
  optics::detail::check_cube(x, cfg);
  detail::RndEngine engine(masks, cfg, scfg);
  return engine.step(x, y, phase);
}

/// Full residual re-projection solver: x <- prox(rnd_step(x), lambda).
inline ReconReport rnd_solve(const MeasurementSet& y, const std::vector<CodedAperture>& masks,
                             const SensingConfig& cfg, const SolverConfig& scfg,
                             const HyperCube* reference = nullptr,
                             const PhaseObserver& observer = {}) {
  detail::check_inputs(y, masks, cfg, scfg);
  auto t0 = std::chrono::steady_clock::now();
  ProxOperator prox = detail::resolve_prox(scfg);
  detail::RndEngine engine(masks, cfg, scfg);

  ReconReport report;
  HyperCube x = detail::initial_cube(y, masks, cfg, scfg);
  for (std::size_t k = 1; k <= scfg.phases; ++k) {
    HyperCube z = engine.step(x, y, k);
    x = prox(z, scfg.lambda);
    detail::check_finite(x, "rnd");
    report.iterations.push_back(
        detail::make_record(k, x, y, masks, cfg, scfg.lambda, reference));
    if (observer) observer(k, z, x);
  }
  report.cube = std::move(x);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

/// Dispatch on scfg.algorithm.
inline ReconReport solve(const MeasurementSet& y, const std::vector<CodedAperture>& masks,
                         const SensingConfig& cfg, const SolverConfig& scfg,
                         const HyperCube* reference = nullptr,
                         const PhaseObserver& observer = {}) {
  switch (scfg.algorithm) {
    case Algorithm::ista:
      return ista_solve(y, masks, cfg, scfg, reference, observer);
    case Algorithm::gap_tv:
      return gap_tv_solve(y, masks, cfg, scfg, reference, observer);
    case Algorithm::rnd:
      return rnd_solve(y, masks, cfg, scfg, reference, observer);
  }
  throw std::logic_error("recon: unknown algorithm");
}

}  // namespace recon
}  // namespace cassi
