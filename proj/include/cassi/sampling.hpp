#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cassi/optics.hpp"
#include "cassi/prng.hpp"
#include "cassi/types.hpp"

// Acquisition planning: aperture generation (random, complementary,
// measurement-adaptive), and measurement noise models.

namespace cassi {
namespace sampling {

// ---------------------------------------------------------------------------
// Static aperture generation
// ---------------------------------------------------------------------------

/// Binary aperture with transmit probability p: element (h, w) is 1 iff the
/// (h*W + w)-th draw of a SplitMix64 stream seeded with `seed` falls below p.
inline CodedAperture random_mask(const SensingConfig& cfg, double density, std::uint64_t seed) {
  cfg.validate();
  if (!(density >= 0.0 && density <= 1.0))
    throw std::invalid_argument("sampling: mask density must lie in [0, 1]");
  SplitMix64 rng(seed);
  CodedAperture mask(cfg.height, cfg.width);
  for (std::size_t h = 0; h < cfg.height; ++h)
    for (std::size_t w = 0; w < cfg.width; ++w)
      mask.at(h, w) = rng.next_unit() < density ? 1.0 : 0.0;
  return mask;
}

/// Pointwise complement 1 - M. An involution; for binary masks the product
/// M * (1 - M) vanishes everywhere.
inline CodedAperture complement_mask(const CodedAperture& mask) {
  CodedAperture out = mask;
  for (double& v : out.data) v = 1.0 - v;
  return out;
}

// ---------------------------------------------------------------------------
// Measurement-adaptive aperture prediction
// ---------------------------------------------------------------------------

/// Small 2D convolution kernel with odd side lengths.
struct Kernel2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> w;

  double at(std::size_t r, std::size_t c) const { return w[r * cols + c]; }

  void validate() const {
    if (rows == 0 || cols == 0 || rows % 2 == 0 || cols % 2 == 0)
      throw std::invalid_argument("sampling: kernels need odd, positive side lengths");
    if (w.size() != rows * cols)
      throw std::invalid_argument("sampling: kernel payload does not match its dims");
    for (double v : w)
      if (!std::isfinite(v)) throw std::invalid_argument("sampling: kernel weights must be finite");
  }
};

namespace detail {

inline Kernel2D kernel3(std::initializer_list<double> taps) {
  Kernel2D k;
  k.rows = k.cols = 3;
  k.w.assign(taps);
  return k;
}

/// Default filter bank: layer 1 fans the realigned field out to a box-blur
/// channel plus four axis/diagonal edge channels (all 3x3, unit L1 norm);
/// layers 2 and 3 box-blur each channel.
inline std::vector<std::vector<Kernel2D>> default_filter_bank() {
  const double t = 1.0 / 9.0;
  Kernel2D box = kernel3({t, t, t, t, t, t, t, t, t});
  Kernel2D edge_h = kernel3({-1. / 8, 0, 1. / 8, -2. / 8, 0, 2. / 8, -1. / 8, 0, 1. / 8});
  Kernel2D edge_v = kernel3({-1. / 8, -2. / 8, -1. / 8, 0, 0, 0, 1. / 8, 2. / 8, 1. / 8});
  Kernel2D edge_d1 = kernel3({0, 1. / 8, 2. / 8, -1. / 8, 0, 1. / 8, -2. / 8, -1. / 8, 0});
  Kernel2D edge_d2 = kernel3({2. / 8, 1. / 8, 0, 1. / 8, 0, -1. / 8, 0, -1. / 8, -2. / 8});
  return {{box, edge_h, edge_v, edge_d1, edge_d2}, {box}, {box}};
}

/// Replicate-border 2D convolution. Clamped indexing keeps constant fields
/// exactly constant, which the normalization conventions below rely on.
inline std::vector<double> conv2_replicate(const std::vector<double>& in, std::size_t H,
                                           std::size_t W, const Kernel2D& k) {
  std::vector<double> out(H * W, 0.0);
  const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(k.rows / 2);
  const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(k.cols / 2);
  cassi::detail::parallel_blocks(H, [&](std::size_t hb, std::size_t he) {
    for (std::size_t h = hb; h < he; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        double acc = 0.0;
        for (std::size_t kr = 0; kr < k.rows; ++kr) {
          std::ptrdiff_t sh = static_cast<std::ptrdiff_t>(h) + static_cast<std::ptrdiff_t>(kr) - ph;
          sh = std::clamp<std::ptrdiff_t>(sh, 0, static_cast<std::ptrdiff_t>(H) - 1);
          for (std::size_t kc = 0; kc < k.cols; ++kc) {
            std::ptrdiff_t sw =
                static_cast<std::ptrdiff_t>(w) + static_cast<std::ptrdiff_t>(kc) - pw;
            sw = std::clamp<std::ptrdiff_t>(sw, 0, static_cast<std::ptrdiff_t>(W) - 1);
            acc += k.at(kr, kc) * in[static_cast<std::size_t>(sh) * W + static_cast<std::size_t>(sw)];
          }
        }
        out[h * W + w] = acc;
      }
    }
  });
  return out;
}

}  // namespace detail

/// Configuration of the measurement-adaptive predictor: per-shot base
/// apertures, per-shot blend strengths and the convolution bank.
struct PredictorConfig {
  std::vector<CodedAperture> shared;              ///< base aperture per shot
  std::vector<double> eta;                        ///< blend strengths; empty -> 0.1, size 1 -> broadcast
  std::vector<std::vector<Kernel2D>> layers;      ///< empty -> default bank

  double eta_for(std::size_t shot_index) const {
    if (eta.empty()) return 0.1;
    if (eta.size() == 1) return eta[0];
    if (shot_index == 0 || shot_index > eta.size())
      throw std::invalid_argument("sampling: no eta entry for shot " + std::to_string(shot_index));
    return eta[shot_index - 1];
  }
};

/// Content field extracted from one measurement, in [0, 1], shaped H x W.
///
/// Stages: (1) realign — average the C dispersion-shifted W-wide windows;
/// (2) convolution bank with ReLU after every layer, replicate borders;
/// (3) per-channel min-max normalization to [0, 1], with exactly-constant
/// channels mapping to 0.5; (4) pixelwise mean over channels.
///
/// Consequences worth naming: a constant measurement yields the constant
/// field 0.5, and adding a constant to a measurement (keeping the realigned
/// field nonnegative) leaves the output unchanged up to roundoff, because the
/// per-channel normalization cancels the shift.
inline std::vector<double> content_field(const Measurement& prev, const PredictorConfig& pc,
                                         const SensingConfig& cfg) {
  cfg.validate();
  if (prev.height != cfg.height || prev.width != cfg.measurement_width())
    throw std::invalid_argument("sampling: measurement shape does not match sensing config");

  const std::size_t H = cfg.height, W = cfg.width, C = cfg.bands;
  std::vector<double> field(H * W, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t w = 0; w < W; ++w) {
      KahanSum acc;
      for (std::size_t c = 0; c < C; ++c) acc.add(prev.at(h, w + c * cfg.step));
      field[h * W + w] = acc.value() / static_cast<double>(C);
    }
  }

  const std::vector<std::vector<Kernel2D>>& bank =
      pc.layers.empty() ? detail::default_filter_bank() : pc.layers;
  if (bank.empty()) throw std::invalid_argument("sampling: predictor needs at least one layer");
  for (const auto& layer : bank) {
    if (layer.empty()) throw std::invalid_argument("sampling: empty predictor layer");
    for (const Kernel2D& k : layer) k.validate();
  }

  // Layer 1 fans out; later layers run per channel (one kernel shared by all
  // channels, or exactly one kernel per channel).
  std::vector<std::vector<double>> channels;
  for (const Kernel2D& k : bank[0]) {
    std::vector<double> ch = detail::conv2_replicate(field, H, W, k);
    for (double& v : ch) v = std::max(v, 0.0);
    channels.push_back(std::move(ch));
  }
  for (std::size_t l = 1; l < bank.size(); ++l) {
    const auto& layer = bank[l];
    if (layer.size() != 1 && layer.size() != channels.size())
      throw std::invalid_argument(
          "sampling: layer kernel count must be 1 or match the channel count");
    for (std::size_t c = 0; c < channels.size(); ++c) {
      const Kernel2D& k = layer.size() == 1 ? layer[0] : layer[c];
      channels[c] = detail::conv2_replicate(channels[c], H, W, k);
      for (double& v : channels[c]) v = std::max(v, 0.0);
    }
  }

  for (std::vector<double>& ch : channels) {
    auto [lo_it, hi_it] = std::minmax_element(ch.begin(), ch.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi == lo) {
      std::fill(ch.begin(), ch.end(), 0.5);
    } else {
      double inv = 1.0 / (hi - lo);
      for (double& v : ch) v = (v - lo) * inv;
    }
  }

  std::vector<double> content(H * W, 0.0);
  double invn = 1.0 / static_cast<double>(channels.size());
  for (std::size_t p = 0; p < content.size(); ++p) {
    KahanSum acc;
    for (const std::vector<double>& ch : channels) acc.add(ch[p]);
    content[p] = acc.value() * invn;
  }
  return content;
}

/// Aperture for shot i (>= 2) from the previous shot's measurement:
/// clamp01(shared_i + eta_i * content_field(prev)). Shot 1 has no previous
/// measurement and is rejected; its aperture comes straight from the plan.
inline CodedAperture predict_mask(const Measurement& prev, const PredictorConfig& pc,
                                  std::size_t shot_index, const SensingConfig& cfg) {
  if (shot_index < 2)
    throw std::invalid_argument("sampling: predict_mask serves shots >= 2; shot 1 comes from the plan");
  if (pc.shared.size() < shot_index)
    throw std::invalid_argument("sampling: no shared aperture for shot " +
                                std::to_string(shot_index));
  const CodedAperture& base = pc.shared[shot_index - 1];
  optics::detail::check_mask(base, cfg);

  std::vector<double> content = content_field(prev, pc, cfg);
  double eta = pc.eta_for(shot_index);
  CodedAperture out(cfg.height, cfg.width);
  for (std::size_t p = 0; p < out.data.size(); ++p)
    out.data[p] = std::clamp(base.data[p] + eta * content[p], 0.0, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Shot plans
// ---------------------------------------------------------------------------

enum class ShotMode {
  fixed,          ///< apertures given explicitly, one per shot
  random,         ///< independent binary apertures from consecutive seeds
  complementary,  ///< alternate a base aperture and its complement
  content_aware,  ///< shot 1 from the plan, later shots predicted per measurement
};

struct ShotPlan {
  ShotMode mode = ShotMode::random;
  std::uint64_t seed = 0;
  double density = 0.5;
  std::vector<CodedAperture> masks;  ///< fixed: all shots; complementary: optional base
  PredictorConfig predictor;         ///< content_aware only
};

/// Materialized plan. Static modes expose the full aperture list up front;
/// the adaptive mode yields apertures one at a time as measurements arrive.
class ShotSequence {
 public:
  ShotSequence(std::vector<CodedAperture> static_masks)
      : progressive_(false), masks_(std::move(static_masks)), shots_(masks_.size()) {}

  ShotSequence(PredictorConfig predictor, SensingConfig cfg, std::size_t shots)
      : progressive_(true), predictor_(std::move(predictor)), cfg_(cfg), shots_(shots) {}

  bool progressive() const { return progressive_; }
  std::size_t count() const { return shots_; }

  const std::vector<CodedAperture>& masks() const {
    if (progressive_)
      throw std::logic_error("sampling: adaptive plans yield apertures via initial()/next()");
    return masks_;
  }

  const CodedAperture& initial() const {
    return progressive_ ? predictor_.shared.front() : masks_.front();
  }

  /// Aperture for the next shot given the just-acquired measurement.
  CodedAperture next(const Measurement& prev) {
    if (!progressive_)
      throw std::logic_error("sampling: next() only applies to adaptive plans");
    std::size_t index = ++cursor_ + 1;  // shot being prepared, 1-based
    if (index > shots_) throw std::logic_error("sampling: plan exhausted");
    return predict_mask(prev, predictor_, index, cfg_);
  }

 private:
  bool progressive_ = false;
  std::vector<CodedAperture> masks_;
  PredictorConfig predictor_;
  SensingConfig cfg_;
  std::size_t shots_ = 0;
  std::size_t cursor_ = 0;
};

inline ShotSequence plan_shots(const ShotPlan& plan, const SensingConfig& cfg) {
  cfg.validate();
  const std::size_t N = cfg.shots;
  switch (plan.mode) {
    case ShotMode::fixed: {
      if (plan.masks.size() != N)
        throw std::invalid_argument("sampling: fixed plan needs exactly one aperture per shot");
      for (const CodedAperture& m : plan.masks) {
        optics::detail::check_mask(m, cfg);
        m.validate();
      }
      return ShotSequence(plan.masks);
    }
    case ShotMode::random: {
      std::vector<CodedAperture> masks;
      masks.reserve(N);
      for (std::size_t i = 0; i < N; ++i)
        masks.push_back(random_mask(cfg, plan.density, plan.seed + i));
      return ShotSequence(std::move(masks));
    }
    case ShotMode::complementary: {
      CodedAperture base;
      if (!plan.masks.empty()) {
        base = plan.masks.front();
        optics::detail::check_mask(base, cfg);
        base.validate();
      } else {
        base = random_mask(cfg, plan.density, plan.seed);
      }
      CodedAperture comp = complement_mask(base);
      std::vector<CodedAperture> masks;
      masks.reserve(N);
      for (std::size_t i = 0; i < N; ++i) masks.push_back(i % 2 == 0 ? base : comp);
      return ShotSequence(std::move(masks));
    }
    case ShotMode::content_aware: {
      if (plan.predictor.shared.size() != N)
        throw std::invalid_argument(
            "sampling: adaptive plan needs one shared aperture per shot");
      for (const CodedAperture& m : plan.predictor.shared) {
        optics::detail::check_mask(m, cfg);
        m.validate();
      }
      return ShotSequence(plan.predictor, cfg, N);
    }
  }
  throw std::logic_error("sampling: unknown shot mode");
}

// ---------------------------------------------------------------------------
// Noise models
// ---------------------------------------------------------------------------

enum class NoiseKind { none, gaussian, shot11 };

struct NoiseModel {
  NoiseKind kind = NoiseKind::none;
  double sigma = 0.01;        ///< gaussian standard deviation
  double full_scale = 2047.0; ///< shot11 peak photon count (11-bit well)
  std::uint64_t seed = 0;
};

namespace detail {

/// Poisson draw with mean k from one uniform stream. Small means invert the
/// CDF by sequential search (one uniform per draw); large means use the
/// rounded normal approximation k + sqrt(k) * g clamped at zero (one
/// Box-Muller pair per draw, sine branch discarded).
inline double poisson_draw(double k, SplitMix64& rng) {
  if (k <= 0.0) {
    rng.next_unit();  // keep the stream advance uniform across elements
    return 0.0;
  }
  if (k < 50.0) {
    double u = rng.next_unit();
    double p = std::exp(-k);
    double cum = p;
    double x = 0.0;
    while (u > cum && x < 4096.0) {
      x += 1.0;
      p *= k / x;
      cum += p;
    }
    return x;
  }
  double g0, g1;
  rng.next_gauss_pair(g0, g1);
  double v = std::round(k + std::sqrt(k) * g0);
  return v < 0.0 ? 0.0 : v;
}

}  // namespace detail

/// Apply a noise model to a measurement set. Elements are visited in shot
/// order, row-major within each shot, drawing from a single stream seeded
/// with model.seed — one run is reproducible bit for bit.
///
/// gaussian: y + sigma * g with standard normals taken pairwise from
/// consecutive Box-Muller draws.
///
/// shot11: photon counting against an 11-bit well. Values scale by
/// full_scale / y_max (y_max the set-wide maximum; 1 if the set is all
/// zero), each element is replaced by a Poisson draw with that mean, and
/// the result scales back by y_max / full_scale. Inputs must be >= 0.
inline MeasurementSet inject_noise(const MeasurementSet& y, const NoiseModel& model) {
  MeasurementSet out = y;
  switch (model.kind) {
    case NoiseKind::none:
      return out;

    case NoiseKind::gaussian: {
      if (!(model.sigma >= 0.0))
        throw std::invalid_argument("sampling: gaussian sigma must be nonnegative");
      SplitMix64 rng(model.seed);
      bool have_spare = false;
      double spare = 0.0;
      for (Measurement& shot : out.shots) {
        for (double& v : shot.data) {
          double g;
          if (have_spare) {
            g = spare;
            have_spare = false;
          } else {
            double g1;
            rng.next_gauss_pair(g, g1);
            spare = g1;
            have_spare = true;
          }
          v += model.sigma * g;
        }
      }
      return out;
    }

    case NoiseKind::shot11: {
      if (!(model.full_scale > 0.0))
        throw std::invalid_argument("sampling: shot11 full scale must be positive");
      double ymax = 0.0;
      for (const Measurement& shot : out.shots) {
        for (double v : shot.data) {
          if (v < 0.0)
            throw std::invalid_argument("sampling: shot11 requires nonnegative measurements");
          ymax = std::max(ymax, v);
        }
      }
      if (ymax == 0.0) ymax = 1.0;
      const double to_counts = model.full_scale / ymax;
      const double from_counts = ymax / model.full_scale;
      SplitMix64 rng(model.seed);
      for (Measurement& shot : out.shots)
        for (double& v : shot.data) v = detail::poisson_draw(v * to_counts, rng) * from_counts;
      return out;
    }
  }
  throw std::logic_error("sampling: unknown noise kind");
}

}  // namespace sampling
}  // namespace cassi
