#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cassi/config.hpp"
#include "cassi/container.hpp"
#include "cassi/metrics.hpp"
#include "cassi/optics.hpp"
#include "cassi/phantom.hpp"
#include "cassi/recon.hpp"
#include "cassi/sampling.hpp"
#include "cassi/types.hpp"

// End-to-end harness: load an experiment description, acquire (statically or
// shot by shot), reconstruct, score, and emit artifacts. Every emitted byte
// is a pure function of the configuration — runs are reproducible across
// thread counts. Also hosts the self-contained dense-matrix verification.

namespace cassi {
namespace pipeline {

// ---------------------------------------------------------------------------
// Text artifact writers
// ---------------------------------------------------------------------------

/// Shortest round-trippable decimal; infinities and NaN use fixed words so
/// downstream parsers see a stable token.
inline std::string csv_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_escape(const std::string& field) {
  bool needs = false;
  for (char c : field)
    if (c == ',' || c == '"' || c == '\r' || c == '\n') needs = true;
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// CRLF-terminated records, comma separators, minimal quoting.
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(fields[i]);
    }
    out << "\r\n";
  };
  emit(header);
  for (const std::vector<std::string>& row : rows) emit(row);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

/// 16-bit binary PGM preview of one plane; values clamp to [0, 1] and scale
/// to the full range. Samples are big-endian per the format.
inline void write_pgm(const std::string& path, const double* plane, std::size_t height,
                      std::size_t width) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "P5\n" << width << " " << height << "\n65535\n";
  for (std::size_t p = 0; p < height * width; ++p) {
    double v = plane[p];
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xFF)};
    out.write(bytes, 2);
  }
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Enum spellings shared by config files and the command line
// ---------------------------------------------------------------------------

namespace names {

inline recon::Algorithm algorithm(const std::string& s) {
  if (s == "ista") return recon::Algorithm::ista;
  if (s == "gap_tv") return recon::Algorithm::gap_tv;
  if (s == "rnd") return recon::Algorithm::rnd;
  throw config::config_error("unknown algorithm '" + s + "' (ista, gap_tv, rnd)");
}
inline std::string algorithm(recon::Algorithm a) {
  switch (a) {
    case recon::Algorithm::ista: return "ista";
    case recon::Algorithm::gap_tv: return "gap_tv";
    case recon::Algorithm::rnd: return "rnd";
  }
  return "?";
}

inline recon::PinvMode pinv_mode(const std::string& s) {
  if (s == "exact") return recon::PinvMode::exact;
  if (s == "appendix") return recon::PinvMode::appendix;
  throw config::config_error("unknown pinv mode '" + s + "' (exact, appendix)");
}

inline recon::InitMode init_mode(const std::string& s) {
  if (s == "adjoint") return recon::InitMode::adjoint;
  if (s == "pinv") return recon::InitMode::pinv;
  if (s == "zero") return recon::InitMode::zero;
  throw config::config_error("unknown init mode '" + s + "' (adjoint, pinv, zero)");
}

inline recon::RndScope rnd_scope(const std::string& s) {
  if (s == "per_shot") return recon::RndScope::per_shot;
  if (s == "joint") return recon::RndScope::joint;
  throw config::config_error("unknown scope '" + s + "' (per_shot, joint)");
}

inline optics::EnhanceMode enhance_mode(const std::string& s) {
  if (s == "masked") return optics::EnhanceMode::masked;
  if (s == "uniform") return optics::EnhanceMode::uniform;
  throw config::config_error("unknown enhance mode '" + s + "' (masked, uniform)");
}

inline sampling::ShotMode shot_mode(const std::string& s) {
  if (s == "fixed") return sampling::ShotMode::fixed;
  if (s == "random") return sampling::ShotMode::random;
  if (s == "complementary") return sampling::ShotMode::complementary;
  if (s == "content_aware") return sampling::ShotMode::content_aware;
  throw config::config_error("unknown shot mode '" + s +
                             "' (fixed, random, complementary, content_aware)");
}

inline sampling::NoiseKind noise_kind(const std::string& s) {
  if (s == "none") return sampling::NoiseKind::none;
  if (s == "gaussian") return sampling::NoiseKind::gaussian;
  if (s == "shot11") return sampling::NoiseKind::shot11;
  throw config::config_error("unknown noise kind '" + s + "' (none, gaussian, shot11)");
}

}  // namespace names

// ---------------------------------------------------------------------------
// Experiment description
// ---------------------------------------------------------------------------

struct OutputOptions {
  std::string dir = ".";
  std::string scene = "scene";
  bool save_cubes = true;  ///< truth.hsc1 + recovered.hsc1
  bool save_masks = true;  ///< mask_NN.hsc1
  bool save_bands = false; ///< band_NN.pgm previews of the recovery
  bool save_csv = true;    ///< metrics.csv + iterations.csv
};

struct ExperimentConfig {
  SensingConfig sensing;
  PhantomSpec phantom;     ///< scene recipe, used when input_cube is empty
  std::string input_cube;  ///< optional container path overriding the phantom
  sampling::ShotPlan plan;
  sampling::NoiseModel noise;
  recon::SolverConfig solver;
  OutputOptions output;
};

/// Split a comma-separated path list, trimming surrounding whitespace.
inline std::vector<std::string> split_path_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      out.push_back(config::detail::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cur = config::detail::trim(cur);
  if (!cur.empty()) out.push_back(cur);
  return out;
}

/// "<dir>/<stem>_NN<ext>" with a two-digit 1-based index.
inline std::string artifact_path(const std::string& dir, const char* stem, std::size_t i,
                                 const char* ext) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s_%02zu%s", stem, i, ext);
  return dir + "/" + buf;
}

namespace detail {

inline std::vector<CodedAperture> load_apertures(const std::string& value) {
  std::vector<CodedAperture> out;
  for (const std::string& p : split_path_list(value)) out.push_back(read_aperture(p));
  return out;
}

}  // namespace detail

/// Build an experiment from a parsed config. Structural problems (bad enum
/// spellings, inconsistent counts, invalid geometry) surface as config_error.
inline ExperimentConfig load_experiment(const config::ConfigFile& cf) {
  ExperimentConfig ec;

  ec.sensing.height = cf.get_size("sensing", "height");
  ec.sensing.width = cf.get_size("sensing", "width");
  ec.sensing.bands = cf.get_size("sensing", "bands");
  ec.sensing.step = cf.get_size("sensing", "step", 1);
  ec.sensing.shots = cf.get_size("sensing", "shots", 1);
  try {
    ec.sensing.validate();
  } catch (const std::invalid_argument& e) {
    throw config::config_error(std::string("sensing: ") + e.what());
  }

  ec.input_cube = cf.get_string("input", "cube", "");
  ec.phantom.seed = cf.get_u64("phantom", "seed", 1);
  ec.phantom.blobs = cf.get_size("phantom", "blobs", 8);
  ec.phantom.background = cf.get_double("phantom", "background", 0.1);
  ec.phantom.spectral_sigma = cf.get_double("phantom", "spectral_sigma", 1.5);
  ec.phantom.radius_min = cf.get_double("phantom", "radius_min", 4.0);
  ec.phantom.radius_max = cf.get_double("phantom", "radius_max", 10.0);

  ec.plan.mode = names::shot_mode(cf.get_string("shots", "mode", "random"));
  ec.plan.seed = cf.get_u64("shots", "seed", 0);
  ec.plan.density = cf.get_double("shots", "density", 0.5);
  if (cf.has("shots", "masks"))
    ec.plan.masks = detail::load_apertures(cf.get_string("shots", "masks"));
  if (ec.plan.mode == sampling::ShotMode::content_aware) {
    if (cf.has("shots", "shared")) {
      ec.plan.predictor.shared = detail::load_apertures(cf.get_string("shots", "shared"));
    } else {
      // Shared bases from consecutive seeds, mirroring the static random mode.
      for (std::size_t i = 0; i < ec.sensing.shots; ++i)
        ec.plan.predictor.shared.push_back(
            sampling::random_mask(ec.sensing, ec.plan.density, ec.plan.seed + i));
    }
    ec.plan.predictor.eta = cf.get_list("shots", "eta");
  }

  ec.noise.kind = names::noise_kind(cf.get_string("noise", "kind", "none"));
  ec.noise.sigma = cf.get_double("noise", "sigma", 0.01);
  ec.noise.full_scale = cf.get_double("noise", "full_scale", 2047.0);
  ec.noise.seed = cf.get_u64("noise", "seed", 0);

  ec.solver.algorithm = names::algorithm(cf.get_string("solver", "algorithm", "rnd"));
  ec.solver.phases = cf.get_size("solver", "phases", 10);
  ec.solver.rho = cf.get_double("solver", "rho", 0.0);
  ec.solver.rho_schedule = cf.get_list("solver", "rho_schedule");
  ec.solver.lambda = cf.get_double("solver", "lambda", 0.01);
  ec.solver.prox = cf.get_string("solver", "prox", "tv");
  ec.solver.tv_iters = cf.get_size("solver", "tv_iters", 50);
  ec.solver.fusion = cf.get_list("solver", "fusion");
  ec.solver.pinv_mode = names::pinv_mode(cf.get_string("solver", "pinv", "exact"));
  ec.solver.rcond = cf.get_double("solver", "rcond", 1e-10);
  ec.solver.init = names::init_mode(cf.get_string("solver", "init", "pinv"));
  ec.solver.rnd_scope = names::rnd_scope(cf.get_string("solver", "scope", "per_shot"));
  ec.solver.enhance = names::enhance_mode(cf.get_string("solver", "enhance", "masked"));
  ec.solver.enhance_floor = cf.get_double("solver", "enhance_floor", 1e-3);
  ec.solver.power_iters = cf.get_size("solver", "power_iters", 50);

  ec.output.dir = cf.get_string("output", "dir", ".");
  ec.output.scene = cf.get_string("output", "scene", "scene");
  ec.output.save_cubes = cf.get_bool("output", "cubes", true);
  ec.output.save_masks = cf.get_bool("output", "masks", true);
  ec.output.save_bands = cf.get_bool("output", "bands", false);
  ec.output.save_csv = cf.get_bool("output", "csv", true);
  return ec;
}

// ---------------------------------------------------------------------------
// Experiment execution
// ---------------------------------------------------------------------------

struct Acquisition {
  HyperCube truth;
  std::vector<CodedAperture> masks;  ///< apertures actually used, shot order
  MeasurementSet clean;              ///< noiseless measurements
  MeasurementSet measured;           ///< after the noise model
};

/// Realize the scene and sense it. Adaptive plans interleave sensing and
/// aperture prediction shot by shot and draw each shot's noise from its own
/// stream (seed, seed + 1, ...); static plans sense everything first and
/// draw one stream across the set.
inline Acquisition acquire(const ExperimentConfig& ec) {
  const SensingConfig& cfg = ec.sensing;
  Acquisition acq;

  if (ec.input_cube.empty()) {
    acq.truth = make_phantom(ec.phantom, cfg);
  } else {
    acq.truth = read_cube(ec.input_cube);
    if (acq.truth.bands != cfg.bands || acq.truth.height != cfg.height ||
        acq.truth.width != cfg.width)
      throw std::invalid_argument("pipeline: input cube shape does not match [sensing]");
  }

  sampling::ShotSequence seq = sampling::plan_shots(ec.plan, cfg);
  if (seq.progressive()) {
    CodedAperture mask = seq.initial();
    for (std::size_t i = 1; i <= seq.count(); ++i) {
      acq.masks.push_back(mask);
      Measurement shot = optics::forward_shot(acq.truth, mask, cfg, i);
      acq.clean.shots.push_back(shot);
      sampling::NoiseModel per_shot = ec.noise;
      per_shot.seed = ec.noise.seed + (i - 1);
      MeasurementSet one;
      one.shots.push_back(std::move(shot));
      acq.measured.shots.push_back(sampling::inject_noise(one, per_shot).shots.front());
      if (i < seq.count()) mask = seq.next(acq.measured.shots.back());
    }
  } else {
    acq.masks = seq.masks();
    acq.clean = optics::forward(acq.truth, acq.masks, cfg);
    acq.measured = sampling::inject_noise(acq.clean, ec.noise);
  }
  return acq;
}

struct ExperimentResult {
  HyperCube truth;
  std::vector<CodedAperture> masks;  ///< apertures actually used, shot order
  MeasurementSet clean;              ///< noiseless measurements
  MeasurementSet measured;           ///< what the solver saw
  recon::ReconReport report;
  metrics::QualityReport quality;
  std::vector<std::string> written;  ///< artifact paths, emit order
};

/// Acquire, reconstruct, score, and emit.
inline ExperimentResult run_experiment(const ExperimentConfig& ec, std::ostream* log = nullptr) {
  const SensingConfig& cfg = ec.sensing;
  ExperimentResult res;

  Acquisition acq = acquire(ec);
  res.truth = std::move(acq.truth);
  res.masks = std::move(acq.masks);
  res.clean = std::move(acq.clean);
  res.measured = std::move(acq.measured);

  res.report = recon::solve(res.measured, res.masks, cfg, ec.solver, &res.truth);
  res.quality = metrics::assess(res.truth, res.report.cube);

  const OutputOptions& out = ec.output;
  std::filesystem::create_directories(out.dir);
  auto emit = [&res](const std::string& path) { res.written.push_back(path); };

  if (out.save_cubes) {
    write_container(out.dir + "/truth.hsc1", res.truth, ContainerType::f64);
    emit(out.dir + "/truth.hsc1");
    write_container(out.dir + "/recovered.hsc1", res.report.cube, ContainerType::f64);
    emit(out.dir + "/recovered.hsc1");
  }
  if (out.save_masks) {
    for (std::size_t i = 0; i < res.masks.size(); ++i) {
      std::string path = artifact_path(out.dir, "mask", i + 1, ".hsc1");
      write_container(path, res.masks[i], ContainerType::f64);
      emit(path);
    }
  }
  if (out.save_bands) {
    const std::size_t plane = cfg.height * cfg.width;
    for (std::size_t c = 0; c < cfg.bands; ++c) {
      std::string path = artifact_path(out.dir, "band", c + 1, ".pgm");
      write_pgm(path, res.report.cube.data.data() + c * plane, cfg.height, cfg.width);
      emit(path);
    }
  }
  if (out.save_csv) {
    std::vector<std::vector<std::string>> rows;
    for (const recon::IterationRecord& r : res.report.iterations)
      rows.push_back({std::to_string(r.iteration), csv_double(r.objective),
                      csv_double(r.residual_norm), csv_double(r.psnr)});
    write_csv(out.dir + "/iterations.csv", {"iteration", "objective", "residual_norm", "psnr"},
              rows);
    emit(out.dir + "/iterations.csv");

    write_csv(out.dir + "/metrics.csv",
              {"scene", "algorithm", "shots", "phases", "mse", "psnr_cube", "psnr_band_mean",
               "ssim"},
              {{out.scene, names::algorithm(ec.solver.algorithm), std::to_string(res.masks.size()),
                std::to_string(ec.solver.phases), csv_double(res.quality.mse),
                csv_double(res.quality.psnr_cube), csv_double(res.quality.psnr_band_mean),
                csv_double(res.quality.ssim)}});
    emit(out.dir + "/metrics.csv");
  }

  if (log)
    *log << out.scene << ": " << names::algorithm(ec.solver.algorithm) << ", "
         << res.masks.size() << " shot(s), " << ec.solver.phases
         << " phase(s), psnr " << csv_double(res.quality.psnr_cube) << " dB, ssim "
         << csv_double(res.quality.ssim) << "\n";
  return res;
}

// ---------------------------------------------------------------------------
// Dense-matrix verification
// ---------------------------------------------------------------------------

struct OracleOptions {
  SensingConfig sensing;        ///< keep small; the entry cap guards blowups
  double density = 0.5;         ///< aperture fill for the probe masks
  std::uint64_t seed = 101;     ///< probe mask seed (consecutive per shot)
  std::size_t probes = 3;       ///< random test vectors per identity
  double rcond = 1e-10;
  double tolerance = 1e-8;      ///< max absolute elementwise deviation allowed
  std::size_t entry_cap = 10'000'000;
  bool corrupt_adjoint = false; ///< fault-injection hook proving sensitivity
};

struct OracleReport {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double forward_dev = 0.0;
  double adjoint_dev = 0.0;
  double pinv_dev = 0.0;
  double projector_dev = 0.0;
  bool pass = false;

  double worst() const {
    return std::max(std::max(forward_dev, adjoint_dev), std::max(pinv_dev, projector_dev));
  }
};

namespace detail {

inline std::vector<double> flatten_cube(const HyperCube& x) { return x.data; }

inline HyperCube unflatten_cube(const std::vector<double>& v, const SensingConfig& cfg) {
  HyperCube x(cfg.bands, cfg.height, cfg.width);
  x.data = v;
  return x;
}

inline std::vector<double> flatten_set(const MeasurementSet& y) {
  std::vector<double> v;
  for (const Measurement& shot : y.shots) v.insert(v.end(), shot.data.begin(), shot.data.end());
  return v;
}

inline MeasurementSet unflatten_set(const std::vector<double>& v, std::size_t shots,
                                    const SensingConfig& cfg) {
  const std::size_t plane = cfg.height * cfg.measurement_width();
  MeasurementSet set;
  for (std::size_t i = 0; i < shots; ++i) {
    Measurement m(cfg.height, cfg.measurement_width(), i + 1);
    std::copy(v.begin() + i * plane, v.begin() + (i + 1) * plane, m.data.begin());
    set.shots.push_back(std::move(m));
  }
  return set;
}

inline std::vector<double> mat_vec(const optics::DenseMatrix& A, const std::vector<double>& x) {
  std::vector<double> y(A.rows, 0.0);
  for (std::size_t r = 0; r < A.rows; ++r) {
    KahanSum acc;
    for (std::size_t c = 0; c < A.cols; ++c) acc.add(A.at(r, c) * x[c]);
    y[r] = acc.value();
  }
  return y;
}

inline std::vector<double> mat_tvec(const optics::DenseMatrix& A, const std::vector<double>& y) {
  std::vector<double> x(A.cols, 0.0);
  for (std::size_t c = 0; c < A.cols; ++c) {
    KahanSum acc;
    for (std::size_t r = 0; r < A.rows; ++r) acc.add(A.at(r, c) * y[r]);
    x[c] = acc.value();
  }
  return x;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Dense Moore-Penrose application through the Gram route: eigendecompose
/// Phi Phi^T once, then map y -> Phi^T V diag(lambda^+) V^T y.
class DensePinv {
 public:
  DensePinv(const optics::DenseMatrix& phi, double rcond) : phi_(phi), n_(phi.rows) {
    std::vector<double> gram(n_ * n_, 0.0);
    for (std::size_t r = 0; r < n_; ++r) {
      for (std::size_t s = r; s < n_; ++s) {
        KahanSum acc;
        for (std::size_t c = 0; c < phi_.cols; ++c) acc.add(phi_.at(r, c) * phi_.at(s, c));
        gram[r * n_ + s] = acc.value();
        gram[s * n_ + r] = acc.value();
      }
    }
    optics::detail::sym_eig(n_, gram, evals_, vecs_);
    double lmax = 0.0;
    for (double v : evals_) lmax = std::max(lmax, v);
    inv_.assign(n_, 0.0);
    for (std::size_t k = 0; k < n_; ++k)
      inv_[k] = evals_[k] > rcond * lmax && evals_[k] > 0.0 ? 1.0 / evals_[k] : 0.0;
  }

  /// w = (Phi Phi^T)^+ y
  std::vector<double> gram_solve(const std::vector<double>& y) const {
    std::vector<double> t(n_, 0.0), w(n_, 0.0);
    for (std::size_t k = 0; k < n_; ++k) {
      KahanSum acc;
      for (std::size_t r = 0; r < n_; ++r) acc.add(vecs_[r * n_ + k] * y[r]);
      t[k] = inv_[k] * acc.value();
    }
    for (std::size_t r = 0; r < n_; ++r) {
      KahanSum acc;
      for (std::size_t k = 0; k < n_; ++k) acc.add(vecs_[r * n_ + k] * t[k]);
      w[r] = acc.value();
    }
    return w;
  }

  /// x = Phi^+ y
  std::vector<double> apply(const std::vector<double>& y) const {
    return mat_tvec(phi_, gram_solve(y));
  }

 private:
  const optics::DenseMatrix& phi_;
  std::size_t n_;
  std::vector<double> evals_, vecs_, inv_;
};

}  // namespace detail

/// Cross-check every optics entry point against explicit dense linear
/// algebra on seeded probe vectors. Throws cap_error when the instance is too
/// large to materialize; otherwise reports the worst deviation per identity.
inline OracleReport run_oracle(const OracleOptions& opt, std::ostream* log = nullptr) {
  const SensingConfig& cfg = opt.sensing;
  cfg.validate();
  const std::size_t N = cfg.shots;

  std::vector<CodedAperture> masks;
  for (std::size_t i = 0; i < N; ++i)
    masks.push_back(sampling::random_mask(cfg, opt.density, opt.seed + i));

  optics::DenseMatrix phi = optics::build_dense_phi(masks, cfg, opt.entry_cap);
  detail::DensePinv dense_pinv(phi, opt.rcond);

  OracleReport rep;
  rep.rows = phi.rows;
  rep.cols = phi.cols;

  for (std::size_t t = 0; t < opt.probes; ++t) {
    // Cube-side probe: forward and the range projector.
    SplitMix64 rng(opt.seed + 7001 + t);
    HyperCube x(cfg.bands, cfg.height, cfg.width);
    for (double& v : x.data) v = rng.next_unit();
    std::vector<double> xv = detail::flatten_cube(x);

    std::vector<double> yv_dense = detail::mat_vec(phi, xv);
    std::vector<double> yv_lib = detail::flatten_set(optics::forward(x, masks, cfg));
    rep.forward_dev = std::max(rep.forward_dev, detail::max_abs_diff(yv_dense, yv_lib));

    std::vector<double> range_dense = dense_pinv.apply(detail::mat_vec(phi, xv));
    std::vector<double> range_lib =
        detail::flatten_cube(optics::project_range(x, masks, cfg, opt.rcond));
    rep.projector_dev = std::max(rep.projector_dev, detail::max_abs_diff(range_dense, range_lib));

    std::vector<double> null_dense(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) null_dense[i] = xv[i] - range_dense[i];
    std::vector<double> null_lib =
        detail::flatten_cube(optics::project_null(x, masks, cfg, opt.rcond));
    rep.projector_dev = std::max(rep.projector_dev, detail::max_abs_diff(null_dense, null_lib));

    // Measurement-side probe: adjoint and the pseudo-inverse.
    SplitMix64 rng_y(opt.seed + 7101 + t);
    std::vector<double> yv(phi.rows);
    for (double& v : yv) v = rng_y.next_unit();
    MeasurementSet yset = detail::unflatten_set(yv, N, cfg);

    std::vector<double> adj_dense = detail::mat_tvec(phi, yv);
    std::vector<double> adj_lib = detail::flatten_cube(optics::adjoint(yset, masks, cfg));
    if (opt.corrupt_adjoint && !adj_lib.empty()) adj_lib[0] += 1e-3;
    rep.adjoint_dev = std::max(rep.adjoint_dev, detail::max_abs_diff(adj_dense, adj_lib));

    std::vector<double> pinv_dense = dense_pinv.apply(yv);
    std::vector<double> pinv_lib =
        detail::flatten_cube(optics::pinv_exact(yset, masks, cfg, opt.rcond));
    rep.pinv_dev = std::max(rep.pinv_dev, detail::max_abs_diff(pinv_dense, pinv_lib));
  }

  rep.pass = rep.worst() < opt.tolerance;
  if (log) {
    *log << "dense operator " << rep.rows << " x " << rep.cols << ", " << opt.probes
         << " probe(s)\n"
         << "  forward    " << csv_double(rep.forward_dev) << "\n"
         << "  adjoint    " << csv_double(rep.adjoint_dev) << "\n"
         << "  pinv       " << csv_double(rep.pinv_dev) << "\n"
         << "  projectors " << csv_double(rep.projector_dev) << "\n"
         << (rep.pass ? "PASS" : "FAIL") << " (tolerance " << csv_double(opt.tolerance) << ")\n";
  }
  return rep;
}

}  // namespace pipeline
}  // namespace cassi
