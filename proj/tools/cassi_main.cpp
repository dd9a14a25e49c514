// Command-line front end: config-driven simulation, acquisition,
// reconstruction, scoring, and dense verification.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cassi/cassi.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t threads = 0;
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonOpts& o, bool config_required) {
  auto* copt = sub->add_option("--config", o.config, "experiment description file");
  if (config_required) copt->required();
  sub->add_option("--set", o.sets, "override a value, section.key=value (repeatable)");
  sub->add_option("--seed", o.seed, "master seed: scene uses S, apertures S+1, noise S+2")
      ->each([&o](const std::string&) { o.seed_given = true; });
  sub->add_option("--threads", o.threads, "worker threads (default 1; results identical)");
  sub->add_flag("--quiet", o.quiet, "suppress progress output");
}

cassi::config::ConfigFile load_config(const CommonOpts& o) {
  cassi::config::ConfigFile cf;
  if (!o.config.empty()) cf = cassi::config::ConfigFile::parse_file(o.config);
  for (const std::string& s : o.sets) cf.apply_override(s);
  if (o.seed_given) {
    cf.set("phantom", "seed", std::to_string(o.seed));
    cf.set("shots", "seed", std::to_string(o.seed + 1));
    cf.set("noise", "seed", std::to_string(o.seed + 2));
  }
  return cf;
}

void apply_threads(const CommonOpts& o) {
  if (o.threads > 0) cassi::set_threads(o.threads);
}

std::ostream* log_stream(const CommonOpts& o) { return o.quiet ? nullptr : &std::cout; }

// --------------------------------------------------------------------------

int run_phantom(const CommonOpts& o, const std::string& out) {
  apply_threads(o);
  cassi::pipeline::ExperimentConfig ec = cassi::pipeline::load_experiment(load_config(o));
  cassi::HyperCube cube = cassi::make_phantom(ec.phantom, ec.sensing);
  cassi::write_container(out, cube, cassi::ContainerType::f64);
  if (!o.quiet)
    std::cout << out << ": " << cube.bands << " x " << cube.height << " x " << cube.width
              << " cube\n";
  return 0;
}

int run_mask(const CommonOpts& o, const std::string& out_dir) {
  apply_threads(o);
  cassi::pipeline::ExperimentConfig ec = cassi::pipeline::load_experiment(load_config(o));
  if (ec.plan.mode == cassi::sampling::ShotMode::content_aware)
    throw cassi::config::config_error(
        "adaptive apertures are realized during acquisition; run the pipeline command");
  cassi::sampling::ShotSequence seq = cassi::sampling::plan_shots(ec.plan, ec.sensing);
  std::filesystem::create_directories(out_dir);
  const std::vector<cassi::CodedAperture>& masks = seq.masks();
  for (std::size_t i = 0; i < masks.size(); ++i) {
    std::string path = cassi::pipeline::artifact_path(out_dir, "mask", i + 1, ".hsc1");
    cassi::write_container(path, masks[i], cassi::ContainerType::f64);
    if (!o.quiet) std::cout << path << "\n";
  }
  return 0;
}

int run_sample(const CommonOpts& o, const std::string& out_dir) {
  apply_threads(o);
  cassi::pipeline::ExperimentConfig ec = cassi::pipeline::load_experiment(load_config(o));
  cassi::pipeline::Acquisition acq = cassi::pipeline::acquire(ec);
  std::filesystem::create_directories(out_dir);
  cassi::write_container(out_dir + "/truth.hsc1", acq.truth, cassi::ContainerType::f64);
  if (!o.quiet) std::cout << out_dir << "/truth.hsc1\n";
  for (std::size_t i = 0; i < acq.masks.size(); ++i) {
    std::string path = cassi::pipeline::artifact_path(out_dir, "mask", i + 1, ".hsc1");
    cassi::write_container(path, acq.masks[i], cassi::ContainerType::f64);
    if (!o.quiet) std::cout << path << "\n";
  }
  for (std::size_t i = 0; i < acq.measured.shots.size(); ++i) {
    std::string path = cassi::pipeline::artifact_path(out_dir, "measurement", i + 1, ".hsc1");
    cassi::write_container(path, acq.measured.shots[i], cassi::ContainerType::f64);
    if (!o.quiet) std::cout << path << "\n";
  }
  return 0;
}

int run_reconstruct(const CommonOpts& o, const std::string& out_dir,
                    std::vector<std::string> meas_paths, std::vector<std::string> mask_paths,
                    std::string truth_path) {
  apply_threads(o);
  cassi::config::ConfigFile cf = load_config(o);
  cassi::pipeline::ExperimentConfig ec = cassi::pipeline::load_experiment(cf);

  if (meas_paths.empty() && cf.has("input", "measurements"))
    meas_paths = cassi::pipeline::split_path_list(cf.get_string("input", "measurements"));
  if (mask_paths.empty() && cf.has("input", "masks"))
    mask_paths = cassi::pipeline::split_path_list(cf.get_string("input", "masks"));
  if (truth_path.empty() && cf.has("input", "truth"))
    truth_path = cf.get_string("input", "truth");

  if (meas_paths.empty() || meas_paths.size() != mask_paths.size())
    throw cassi::config::config_error(
        "reconstruct needs matching --measurement/--mask lists (or [input] measurements/masks)");

  cassi::MeasurementSet y;
  for (std::size_t i = 0; i < meas_paths.size(); ++i) {
    cassi::Measurement m = cassi::read_measurement(meas_paths[i]);
    m.shot_index = i + 1;
    y.shots.push_back(std::move(m));
  }
  std::vector<cassi::CodedAperture> masks;
  for (const std::string& p : mask_paths) masks.push_back(cassi::read_aperture(p));

  cassi::SensingConfig cfg = ec.sensing;
  cfg.shots = y.count();

  cassi::HyperCube truth;
  bool have_truth = !truth_path.empty();
  if (have_truth) truth = cassi::read_cube(truth_path);

  cassi::recon::ReconReport report =
      cassi::recon::solve(y, masks, cfg, ec.solver, have_truth ? &truth : nullptr);

  std::filesystem::create_directories(out_dir);
  cassi::write_container(out_dir + "/recovered.hsc1", report.cube, cassi::ContainerType::f64);
  std::vector<std::vector<std::string>> rows;
  for (const cassi::recon::IterationRecord& r : report.iterations)
    rows.push_back({std::to_string(r.iteration), cassi::pipeline::csv_double(r.objective),
                    cassi::pipeline::csv_double(r.residual_norm),
                    cassi::pipeline::csv_double(r.psnr)});
  cassi::pipeline::write_csv(out_dir + "/iterations.csv",
                             {"iteration", "objective", "residual_norm", "psnr"}, rows);

  if (have_truth) {
    cassi::metrics::QualityReport q = cassi::metrics::assess(truth, report.cube);
    cassi::pipeline::write_csv(
        out_dir + "/metrics.csv",
        {"scene", "algorithm", "shots", "phases", "mse", "psnr_cube", "psnr_band_mean", "ssim"},
        {{ec.output.scene, cassi::pipeline::names::algorithm(ec.solver.algorithm),
          std::to_string(y.count()), std::to_string(ec.solver.phases),
          cassi::pipeline::csv_double(q.mse), cassi::pipeline::csv_double(q.psnr_cube),
          cassi::pipeline::csv_double(q.psnr_band_mean), cassi::pipeline::csv_double(q.ssim)}});
    if (!o.quiet)
      std::cout << "psnr " << cassi::pipeline::csv_double(q.psnr_cube) << " dB, ssim "
                << cassi::pipeline::csv_double(q.ssim) << "\n";
  } else if (!o.quiet) {
    std::cout << out_dir << "/recovered.hsc1\n";
  }
  return 0;
}

int run_metrics(const CommonOpts& o, const std::string& reference, const std::string& estimate,
                const std::string& out_csv, const std::string& scene) {
  apply_threads(o);
  cassi::HyperCube ref = cassi::read_cube(reference);
  cassi::HyperCube est = cassi::read_cube(estimate);
  cassi::metrics::QualityReport q = cassi::metrics::assess(ref, est);
  if (!o.quiet)
    std::cout << "mse " << cassi::pipeline::csv_double(q.mse) << "\npsnr_cube "
              << cassi::pipeline::csv_double(q.psnr_cube) << "\npsnr_band_mean "
              << cassi::pipeline::csv_double(q.psnr_band_mean) << "\nssim "
              << cassi::pipeline::csv_double(q.ssim) << "\n";
  if (!out_csv.empty())
    cassi::pipeline::write_csv(out_csv, {"scene", "mse", "psnr_cube", "psnr_band_mean", "ssim"},
                               {{scene, cassi::pipeline::csv_double(q.mse),
                                 cassi::pipeline::csv_double(q.psnr_cube),
                                 cassi::pipeline::csv_double(q.psnr_band_mean),
                                 cassi::pipeline::csv_double(q.ssim)}});
  return 0;
}

int run_oracle(const CommonOpts& o, bool corrupt_adjoint) {
  apply_threads(o);
  cassi::config::ConfigFile cf = load_config(o);
  cassi::pipeline::ExperimentConfig ec = cassi::pipeline::load_experiment(cf);
  cassi::pipeline::OracleOptions opt;
  opt.sensing = ec.sensing;
  opt.density = cf.get_double("oracle", "density", 0.5);
  opt.seed = cf.get_u64("oracle", "seed", 101);
  opt.probes = cf.get_size("oracle", "probes", 3);
  opt.rcond = cf.get_double("oracle", "rcond", 1e-10);
  opt.tolerance = cf.get_double("oracle", "tolerance", 1e-8);
  opt.entry_cap = cf.get_size("oracle", "entry_cap", 10'000'000);
  opt.corrupt_adjoint = corrupt_adjoint;
  cassi::pipeline::OracleReport rep = cassi::pipeline::run_oracle(opt, log_stream(o));
  return rep.pass ? 0 : 1;
}

int run_pipeline(const CommonOpts& o, const std::string& out_dir) {
  apply_threads(o);
  cassi::config::ConfigFile cf = load_config(o);
  if (!out_dir.empty()) cf.set("output", "dir", out_dir);
  cassi::pipeline::ExperimentConfig ec = cassi::pipeline::load_experiment(cf);
  cassi::pipeline::ExperimentResult res = cassi::pipeline::run_experiment(ec, log_stream(o));
  if (!o.quiet)
    for (const std::string& path : res.written) std::cout << "  " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coded-aperture snapshot spectral imaging toolkit"};
  app.require_subcommand(1);

  CommonOpts phantom_o, mask_o, sample_o, recon_o, metrics_o, oracle_o, pipe_o;
  std::string phantom_out = "phantom.hsc1";
  std::string mask_out = ".";
  std::string sample_out = ".";
  std::string recon_out = ".";
  std::vector<std::string> recon_meas, recon_masks;
  std::string recon_truth;
  std::string metrics_ref, metrics_est, metrics_out, metrics_scene = "scene";
  bool oracle_corrupt = false;
  std::string pipe_out;

  CLI::App* phantom = app.add_subcommand("phantom", "render the synthetic scene to a container");
  add_common(phantom, phantom_o, true);
  phantom->add_option("--out", phantom_out, "output container path");

  CLI::App* mask = app.add_subcommand("mask", "materialize the aperture plan");
  add_common(mask, mask_o, true);
  mask->add_option("--out", mask_out, "output directory");

  CLI::App* sample = app.add_subcommand("sample", "acquire noisy measurements of the scene");
  add_common(sample, sample_o, true);
  sample->add_option("--out", sample_out, "output directory");

  CLI::App* reconstruct =
      app.add_subcommand("reconstruct", "recover a cube from measurements and apertures");
  add_common(reconstruct, recon_o, true);
  reconstruct->add_option("--out", recon_out, "output directory");
  reconstruct->add_option("--measurement", recon_meas, "measurement container (repeatable)");
  reconstruct->add_option("--mask", recon_masks, "aperture container (repeatable)");
  reconstruct->add_option("--truth", recon_truth, "reference cube for scoring (optional)");

  CLI::App* metrics = app.add_subcommand("metrics", "score an estimate against a reference");
  add_common(metrics, metrics_o, false);
  metrics->add_option("--reference", metrics_ref, "reference cube container")->required();
  metrics->add_option("--estimate", metrics_est, "estimate cube container")->required();
  metrics->add_option("--out", metrics_out, "optional CSV path");
  metrics->add_option("--scene", metrics_scene, "scene label for the CSV");

  CLI::App* oracle = app.add_subcommand("oracle", "verify the operators against dense algebra");
  add_common(oracle, oracle_o, true);
  oracle->add_flag("--corrupt-adjoint", oracle_corrupt, "fault-injection self-test")
      ->group("");  // hidden

  CLI::App* pipeline = app.add_subcommand("pipeline", "acquire, reconstruct, score, and emit");
  add_common(pipeline, pipe_o, true);
  pipeline->add_option("--out", pipe_out, "output directory (overrides [output] dir)");

  int rc = 0;
  phantom->callback([&] { rc = run_phantom(phantom_o, phantom_out); });
  mask->callback([&] { rc = run_mask(mask_o, mask_out); });
  sample->callback([&] { rc = run_sample(sample_o, sample_out); });
  reconstruct->callback(
      [&] { rc = run_reconstruct(recon_o, recon_out, recon_meas, recon_masks, recon_truth); });
  metrics->callback(
      [&] { rc = run_metrics(metrics_o, metrics_ref, metrics_est, metrics_out, metrics_scene); });
  oracle->callback([&] { rc = run_oracle(oracle_o, oracle_corrupt); });
  pipeline->callback([&] { rc = run_pipeline(pipe_o, pipe_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const cassi::config::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cassi::cap_error& e) {
    std::cerr << "cap exceeded: " << e.what() << "\n";
    return 4;
  } catch (const cassi::numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
