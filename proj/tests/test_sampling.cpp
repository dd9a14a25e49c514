// Aperture plans, the measurement-driven aperture predictor, and noise
// models. The predictor tests pin exact algebraic properties (blend-off
// equality, constant-input value, brightness invariance) plus a
// reimplemented convolution as an independent reference.

#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cassi/cassi.hpp"

using cassi::CodedAperture;
using cassi::HyperCube;
using cassi::Measurement;
using cassi::MeasurementSet;
using cassi::SensingConfig;

namespace {

// Straight-line replicate-border convolution, written independently of the
// library implementation (different loop structure, no parallel path).
std::vector<double> conv_ref(const std::vector<double>& in, std::size_t H, std::size_t W,
                             const cassi::sampling::Kernel2D& k) {
  std::vector<double> out(H * W, 0.0);
  auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t lo, std::ptrdiff_t hi) {
    return v < lo ? lo : (v > hi ? hi : v);
  };
  std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(k.rows) / 2;
  std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(k.cols) / 2;
  for (std::ptrdiff_t h = 0; h < static_cast<std::ptrdiff_t>(H); ++h)
    for (std::ptrdiff_t w = 0; w < static_cast<std::ptrdiff_t>(W); ++w) {
      double s = 0.0;
      for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(k.rows); ++r)
        for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(k.cols); ++c) {
          std::ptrdiff_t hh = clampi(h + r - ph, 0, static_cast<std::ptrdiff_t>(H) - 1);
          std::ptrdiff_t ww = clampi(w + c - pw, 0, static_cast<std::ptrdiff_t>(W) - 1);
          s += k.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) *
               in[static_cast<std::size_t>(hh) * W + static_cast<std::size_t>(ww)];
        }
      out[static_cast<std::size_t>(h) * W + static_cast<std::size_t>(w)] = s;
    }
  return out;
}

Measurement sense(const HyperCube& truth, const CodedAperture& mask, const SensingConfig& cfg) {
  return cassi::optics::forward_shot(truth, mask, cfg);
}

}  // namespace

// ---------------------------------------------------------------------------
// Random apertures
// ---------------------------------------------------------------------------

TEST_CASE("random aperture bits follow the unit draws of the seed") {
  SensingConfig cfg{2, 2, 1, 0, 1};
  CodedAperture m = cassi::sampling::random_mask(cfg, 0.5, 0);
  // Seed-0 unit draws: 0.883, 0.432, 0.026, 0.971 -> bits 0, 1, 1, 0.
  REQUIRE(m.at(0, 0) == 0.0);
  REQUIRE(m.at(0, 1) == 1.0);
  REQUIRE(m.at(1, 0) == 1.0);
  REQUIRE(m.at(1, 1) == 0.0);
}

TEST_CASE("density extremes produce closed and open apertures") {
  SensingConfig cfg{8, 8, 1, 0, 1};
  CodedAperture closed = cassi::sampling::random_mask(cfg, 0.0, 3);
  for (double v : closed.data) REQUIRE(v == 0.0);
  CodedAperture open = cassi::sampling::random_mask(cfg, 1.0, 3);
  for (double v : open.data) REQUIRE(v == 1.0);
  REQUIRE_THROWS_AS(cassi::sampling::random_mask(cfg, 1.5, 3), std::invalid_argument);
}

TEST_CASE("complementing an aperture twice is the identity") {
  SensingConfig cfg{6, 7, 1, 0, 1};
  CodedAperture m = cassi::sampling::random_mask(cfg, 0.4, 9);
  CodedAperture mm = cassi::sampling::complement_mask(cassi::sampling::complement_mask(m));
  REQUIRE(mm.data == m.data);
}

// ---------------------------------------------------------------------------
// Filter bank and convolution
// ---------------------------------------------------------------------------

TEST_CASE("default filter bank: five unit-l1 kernels, then depthwise smoothing") {
  auto bank = cassi::sampling::detail::default_filter_bank();
  REQUIRE(bank.size() == 3);
  REQUIRE(bank[0].size() == 5);
  REQUIRE(bank[1].size() == 1);
  REQUIRE(bank[2].size() == 1);
  for (const auto& layer : bank)
    for (const cassi::sampling::Kernel2D& k : layer) {
      REQUIRE(k.rows == 3);
      REQUIRE(k.cols == 3);
      double l1 = 0.0;
      for (double w : k.w) l1 += std::abs(w);
      REQUIRE(std::abs(l1 - 1.0) <= 1e-15);
    }
  // Kernels 2..5 are derivative-like: coefficients sum to zero.
  for (std::size_t i = 1; i < 5; ++i) {
    double s = 0.0;
    for (double w : bank[0][i].w) s += w;
    REQUIRE(std::abs(s) <= 1e-15);
  }
}

TEST_CASE("replicate-border convolution matches an independent reference") {
  cassi::SplitMix64 rng(44);
  std::size_t H = 7, W = 9;
  std::vector<double> img(H * W);
  for (double& v : img) v = rng.next_unit();
  auto bank = cassi::sampling::detail::default_filter_bank();
  for (const cassi::sampling::Kernel2D& k : bank[0]) {
    std::vector<double> lib = cassi::sampling::detail::conv2_replicate(img, H, W, k);
    std::vector<double> ref = conv_ref(img, H, W, k);
    for (std::size_t i = 0; i < lib.size(); ++i)
      REQUIRE(std::abs(lib[i] - ref[i]) <= 1e-14);
  }
}

TEST_CASE("kernels must be odd-sized and finite") {
  cassi::sampling::Kernel2D k;
  k.rows = 2;
  k.cols = 3;
  k.w = {1, 1, 1, 1, 1, 1};
  REQUIRE_THROWS_AS(k.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Measurement-driven aperture prediction
// ---------------------------------------------------------------------------

TEST_CASE("zero blend strength reproduces the shared aperture exactly") {
  SensingConfig cfg{12, 12, 3, 1, 2};
  cassi::PhantomSpec spec;
  spec.seed = 10;
  spec.radius_min = 2;
  spec.radius_max = 4;
  HyperCube truth = cassi::make_phantom(spec, cfg);

  cassi::sampling::PredictorConfig pc;
  pc.shared = {cassi::sampling::random_mask(cfg, 0.5, 20),
               cassi::sampling::random_mask(cfg, 0.5, 21)};
  pc.eta = {0.0};

  Measurement y1 = sense(truth, pc.shared[0], cfg);
  CodedAperture m2 = cassi::sampling::predict_mask(y1, pc, 2, cfg);
  REQUIRE(m2.data == pc.shared[1].data);
}

TEST_CASE("a flat measurement contributes exactly one half everywhere") {
  SensingConfig cfg{10, 10, 3, 1, 2};
  Measurement flat(cfg.height, cfg.measurement_width());
  for (double& v : flat.data) v = 0.7;

  cassi::sampling::PredictorConfig pc;
  pc.shared = {cassi::sampling::random_mask(cfg, 0.5, 30),
               cassi::sampling::random_mask(cfg, 0.5, 31)};
  pc.eta = {0.2};

  std::vector<double> content = cassi::sampling::content_field(flat, pc, cfg);
  for (double v : content) REQUIRE(v == 0.5);

  CodedAperture m2 = cassi::sampling::predict_mask(flat, pc, 2, cfg);
  for (std::size_t p = 0; p < m2.data.size(); ++p) {
    double expect = pc.shared[1].data[p] + 0.2 * 0.5;
    expect = expect < 0.0 ? 0.0 : (expect > 1.0 ? 1.0 : expect);
    REQUIRE(m2.data[p] == expect);
  }
}

TEST_CASE("prediction is invariant to a constant brightness offset") {
  SensingConfig cfg{12, 12, 3, 1, 2};
  cassi::PhantomSpec spec;
  spec.seed = 40;
  spec.radius_min = 2;
  spec.radius_max = 4;
  HyperCube truth = cassi::make_phantom(spec, cfg);

  cassi::sampling::PredictorConfig pc;
  pc.shared = {cassi::sampling::random_mask(cfg, 0.5, 50),
               cassi::sampling::random_mask(cfg, 0.5, 51)};

  Measurement y = sense(truth, pc.shared[0], cfg);
  Measurement y_shift = y;
  for (double& v : y_shift.data) v += 0.35;

  std::vector<double> a = cassi::sampling::content_field(y, pc, cfg);
  std::vector<double> b = cassi::sampling::content_field(y_shift, pc, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::abs(a[i] - b[i]) <= 1e-12);
}

TEST_CASE("predicted apertures stay in range and respond to content") {
  SensingConfig cfg{16, 16, 4, 1, 2};
  cassi::PhantomSpec spec;
  spec.seed = 60;
  spec.radius_min = 2;
  spec.radius_max = 5;
  HyperCube truth = cassi::make_phantom(spec, cfg);

  cassi::sampling::PredictorConfig pc;
  pc.shared = {cassi::sampling::random_mask(cfg, 0.5, 70),
               cassi::sampling::random_mask(cfg, 0.5, 71)};
  pc.eta = {0.1};

  Measurement y = sense(truth, pc.shared[0], cfg);
  CodedAperture m2 = cassi::sampling::predict_mask(y, pc, 2, cfg);
  std::size_t differing = 0;
  for (std::size_t p = 0; p < m2.data.size(); ++p) {
    REQUIRE(m2.data[p] >= 0.0);
    REQUIRE(m2.data[p] <= 1.0);
    if (m2.data[p] != pc.shared[1].data[p]) ++differing;
  }
  // The blend must actually move a nontrivial share of the aperture.
  REQUIRE(differing * 100 >= m2.data.size());
}

TEST_CASE("the first shot is never predicted") {
  SensingConfig cfg{8, 8, 2, 1, 2};
  cassi::sampling::PredictorConfig pc;
  pc.shared = {cassi::sampling::random_mask(cfg, 0.5, 80),
               cassi::sampling::random_mask(cfg, 0.5, 81)};
  Measurement y(cfg.height, cfg.measurement_width());
  REQUIRE_THROWS_AS(cassi::sampling::predict_mask(y, pc, 1, cfg), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Shot plans
// ---------------------------------------------------------------------------

TEST_CASE("fixed plans demand exactly one aperture per shot") {
  SensingConfig cfg{4, 4, 2, 1, 2};
  cassi::sampling::ShotPlan plan;
  plan.mode = cassi::sampling::ShotMode::fixed;
  plan.masks = {cassi::sampling::random_mask(cfg, 0.5, 1)};
  REQUIRE_THROWS_AS(cassi::sampling::plan_shots(plan, cfg), std::invalid_argument);
  plan.masks.push_back(cassi::sampling::random_mask(cfg, 0.5, 2));
  cassi::sampling::ShotSequence seq = cassi::sampling::plan_shots(plan, cfg);
  REQUIRE_FALSE(seq.progressive());
  REQUIRE(seq.count() == 2);
  REQUIRE(seq.masks()[0].data == plan.masks[0].data);
}

TEST_CASE("random plans use consecutive seeds per shot") {
  SensingConfig cfg{4, 4, 2, 1, 3};
  cassi::sampling::ShotPlan plan;
  plan.mode = cassi::sampling::ShotMode::random;
  plan.seed = 90;
  plan.density = 0.5;
  cassi::sampling::ShotSequence seq = cassi::sampling::plan_shots(plan, cfg);
  REQUIRE(seq.count() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    REQUIRE(seq.masks()[i].data == cassi::sampling::random_mask(cfg, 0.5, 90 + i).data);
}

TEST_CASE("complementary plans alternate an aperture with its complement") {
  SensingConfig cfg{4, 4, 2, 1, 4};
  cassi::sampling::ShotPlan plan;
  plan.mode = cassi::sampling::ShotMode::complementary;
  plan.seed = 95;
  cassi::sampling::ShotSequence seq = cassi::sampling::plan_shots(plan, cfg);
  REQUIRE(seq.count() == 4);
  const std::vector<CodedAperture>& masks = seq.masks();
  for (std::size_t p = 0; p < masks[0].data.size(); ++p) {
    REQUIRE(masks[0].data[p] + masks[1].data[p] == 1.0);
    REQUIRE(masks[2].data[p] == masks[0].data[p]);
    REQUIRE(masks[3].data[p] == masks[1].data[p]);
  }
}

TEST_CASE("adaptive plans yield apertures only as measurements arrive") {
  SensingConfig cfg{8, 8, 2, 1, 2};
  cassi::PhantomSpec spec;
  spec.seed = 1;
  spec.radius_min = 2;
  spec.radius_max = 3;
  HyperCube truth = cassi::make_phantom(spec, cfg);

  cassi::sampling::ShotPlan plan;
  plan.mode = cassi::sampling::ShotMode::content_aware;
  plan.predictor.shared = {cassi::sampling::random_mask(cfg, 0.5, 96),
                           cassi::sampling::random_mask(cfg, 0.5, 97)};
  cassi::sampling::ShotSequence seq = cassi::sampling::plan_shots(plan, cfg);
  REQUIRE(seq.progressive());
  REQUIRE_THROWS_AS(seq.masks(), std::logic_error);

  CodedAperture m1 = seq.initial();
  REQUIRE(m1.data == plan.predictor.shared[0].data);
  Measurement y1 = sense(truth, m1, cfg);
  CodedAperture m2 = seq.next(y1);
  for (double v : m2.data) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
  REQUIRE_THROWS_AS(seq.next(y1), std::logic_error);  // plan exhausted
}

// ---------------------------------------------------------------------------
// Noise models
// ---------------------------------------------------------------------------

TEST_CASE("the none model and zero-sigma gaussian leave data untouched") {
  SensingConfig cfg{4, 4, 2, 1, 2};
  MeasurementSet y;
  cassi::SplitMix64 rng(7);
  for (std::size_t i = 0; i < 2; ++i) {
    Measurement m(cfg.height, cfg.measurement_width(), i + 1);
    for (double& v : m.data) v = rng.next_unit();
    y.shots.push_back(std::move(m));
  }

  cassi::sampling::NoiseModel none;
  REQUIRE(cassi::sampling::inject_noise(y, none).shots[1].data == y.shots[1].data);

  cassi::sampling::NoiseModel g;
  g.kind = cassi::sampling::NoiseKind::gaussian;
  g.sigma = 0.0;
  MeasurementSet gy = cassi::sampling::inject_noise(y, g);
  for (std::size_t i = 0; i < 2; ++i) REQUIRE(gy.shots[i].data == y.shots[i].data);
}

TEST_CASE("gaussian noise is reproducible and has the requested scale") {
  MeasurementSet y;
  Measurement m(100, 100, 1);
  y.shots.push_back(m);  // all zeros: the output is the noise itself

  cassi::sampling::NoiseModel g;
  g.kind = cassi::sampling::NoiseKind::gaussian;
  g.sigma = 0.05;
  g.seed = 11;

  MeasurementSet a = cassi::sampling::inject_noise(y, g);
  MeasurementSet b = cassi::sampling::inject_noise(y, g);
  REQUIRE(a.shots[0].data == b.shots[0].data);

  double mean = 0.0, var = 0.0;
  for (double v : a.shots[0].data) mean += v;
  mean /= double(a.shots[0].data.size());
  for (double v : a.shots[0].data) var += (v - mean) * (v - mean);
  var /= double(a.shots[0].data.size());
  REQUIRE(std::abs(mean) <= 0.002);
  REQUIRE(std::abs(var - 0.0025) <= 0.0002);

  g.seed = 12;
  MeasurementSet c = cassi::sampling::inject_noise(y, g);
  REQUIRE(c.shots[0].data != a.shots[0].data);
}

TEST_CASE("photon noise keeps zeros at zero and matches poisson statistics") {
  // All-zero input: the guard scale must not invent photons.
  MeasurementSet zeros;
  zeros.shots.emplace_back(8, 8, 1);
  cassi::sampling::NoiseModel p;
  p.kind = cassi::sampling::NoiseKind::shot11;
  p.seed = 1;
  MeasurementSet z = cassi::sampling::inject_noise(zeros, p);
  for (double v : z.shots[0].data) REQUIRE(v == 0.0);

  // Constant bright field: mean within 1%, variance near peak/well_depth.
  MeasurementSet bright;
  Measurement m(100, 100, 1);
  for (double& v : m.data) v = 1.0;
  bright.shots.push_back(std::move(m));
  MeasurementSet n = cassi::sampling::inject_noise(bright, p);

  double mean = 0.0, var = 0.0;
  for (double v : n.shots[0].data) mean += v;
  mean /= 1e4;
  for (double v : n.shots[0].data) var += (v - mean) * (v - mean);
  var /= 1e4;
  REQUIRE(std::abs(mean - 1.0) <= 0.01);
  REQUIRE(std::abs(var - 1.0 / 2047.0) <= 0.1 / 2047.0);

  // Quantization: every output is an integer number of photons rescaled.
  for (double v : n.shots[0].data) {
    double counts = v * 2047.0;
    REQUIRE(std::abs(counts - std::round(counts)) <= 1e-9);
  }

  // Negative input is physically meaningless for photon counting.
  MeasurementSet neg;
  neg.shots.emplace_back(2, 2, 1);
  neg.shots[0].data[0] = -0.1;
  REQUIRE_THROWS_AS(cassi::sampling::inject_noise(neg, p), std::invalid_argument);
}

TEST_CASE("small-mean photon draws use the sequential inversion branch") {
  // Mean 0.25 counts: the distribution is heavily zero-inflated.
  MeasurementSet dim;
  Measurement m(100, 100, 1);
  for (double& v : m.data) v = 1.0;
  m.data[0] = 2047.0;  // pins y_max so every other pixel has mean 1 count
  dim.shots.push_back(std::move(m));
  cassi::sampling::NoiseModel p;
  p.kind = cassi::sampling::NoiseKind::shot11;
  p.seed = 5;
  MeasurementSet n = cassi::sampling::inject_noise(dim, p);

  // Poisson(1): P(0) = exp(-1) = 0.368.
  std::size_t zeros = 0;
  for (std::size_t i = 1; i < n.shots[0].data.size(); ++i)
    if (n.shots[0].data[i] == 0.0) ++zeros;
  double frac = double(zeros) / 9999.0;
  REQUIRE(std::abs(frac - std::exp(-1.0)) <= 0.02);
}
