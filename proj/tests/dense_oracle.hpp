#pragma once

// Test-only reference implementations built on an independent linear algebra
// library. The production headers never touch these; tests compare against
// them to catch errors that a self-consistent implementation would miss.

#include <Eigen/Dense>

#include <vector>

#include "cassi/cassi.hpp"

namespace oracle {

inline Eigen::MatrixXd to_eigen(const cassi::optics::DenseMatrix& A) {
  Eigen::MatrixXd M(static_cast<Eigen::Index>(A.rows), static_cast<Eigen::Index>(A.cols));
  for (std::size_t r = 0; r < A.rows; ++r)
    for (std::size_t c = 0; c < A.cols; ++c)
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = A.at(r, c);
  return M;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(i)) = v[i];
  return x;
}

inline std::vector<double> from_eigen(const Eigen::VectorXd& x) {
  std::vector<double> v(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) v[static_cast<std::size_t>(i)] = x(i);
  return v;
}

/// Moore-Penrose pseudo-inverse by SVD; singular values at or below
/// rcond * sigma_max are treated as zero.
inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& A, double rcond = 1e-10) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  double smax = s.size() > 0 ? s(0) : 0.0;
  Eigen::VectorXd sinv = s;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    sinv(i) = s(i) > rcond * smax && s(i) > 0.0 ? 1.0 / s(i) : 0.0;
  return svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::vector<double> flatten(const cassi::HyperCube& x) { return x.data; }

inline std::vector<double> flatten(const cassi::MeasurementSet& y) {
  std::vector<double> v;
  for (const cassi::Measurement& shot : y.shots)
    v.insert(v.end(), shot.data.begin(), shot.data.end());
  return v;
}

inline cassi::HyperCube cube_from(const std::vector<double>& v, const cassi::SensingConfig& cfg) {
  cassi::HyperCube x(cfg.bands, cfg.height, cfg.width);
  x.data = v;
  return x;
}

inline cassi::MeasurementSet set_from(const std::vector<double>& v, std::size_t shots,
                                      const cassi::SensingConfig& cfg) {
  const std::size_t plane = cfg.height * cfg.measurement_width();
  cassi::MeasurementSet set;
  for (std::size_t i = 0; i < shots; ++i) {
    cassi::Measurement m(cfg.height, cfg.measurement_width(), i + 1);
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(i * plane),
              v.begin() + static_cast<std::ptrdiff_t>((i + 1) * plane), m.data.begin());
    set.shots.push_back(std::move(m));
  }
  return set;
}

/// Random [0, 1) cube from a seeded stream.
inline cassi::HyperCube random_cube(const cassi::SensingConfig& cfg, std::uint64_t seed) {
  cassi::SplitMix64 rng(seed);
  cassi::HyperCube x(cfg.bands, cfg.height, cfg.width);
  for (double& v : x.data) v = rng.next_unit();
  return x;
}

/// Random [0, 1) measurement set from a seeded stream.
inline cassi::MeasurementSet random_set(const cassi::SensingConfig& cfg, std::size_t shots,
                                        std::uint64_t seed) {
  cassi::SplitMix64 rng(seed);
  cassi::MeasurementSet y;
  for (std::size_t i = 0; i < shots; ++i) {
    cassi::Measurement m(cfg.height, cfg.measurement_width(), i + 1);
    for (double& v : m.data) v = rng.next_unit();
    y.shots.push_back(std::move(m));
  }
  return y;
}

/// Continuous aperture with transmittance in [lo, hi].
inline cassi::CodedAperture continuous_mask(const cassi::SensingConfig& cfg, double lo, double hi,
                                            std::uint64_t seed) {
  cassi::SplitMix64 rng(seed);
  cassi::CodedAperture m(cfg.height, cfg.width);
  for (double& v : m.data) v = lo + (hi - lo) * rng.next_unit();
  return m;
}

}  // namespace oracle
