#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cassi {

/// Thrown when an iterative scheme produces non-finite values or a numeric
/// precondition (step size, operator norm, ...) is violated.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a request would materialize a dense object beyond the
/// documented size cap.
class cap_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown for malformed serialized inputs (container files, kernel files).
/// The message carries the offending path/offset.
class format_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Sensing geometry
// ---------------------------------------------------------------------------

/// Geometry of one acquisition: spatial size, band count, per-band dispersion
/// shift (in columns) and number of snapshots.
struct SensingConfig {
  std::size_t height = 0;  ///< rows H
  std::size_t width = 0;   ///< columns W (scene)
  std::size_t bands = 0;   ///< spectral channels C
  std::size_t step = 0;    ///< dispersion shift between adjacent bands
  std::size_t shots = 1;   ///< snapshots N

  /// Width of one dispersed measurement: W + (C-1)*step.
  std::size_t measurement_width() const {
    return width + (bands - 1) * step;
  }

  void validate() const {
    if (height == 0 || width == 0 || bands == 0)
      throw std::invalid_argument("sensing config: height, width and bands must be positive");
    if (shots == 0)
      throw std::invalid_argument("sensing config: shot count must be positive");
  }
};

// ---------------------------------------------------------------------------
// Value types
// ---------------------------------------------------------------------------

/// Dense spectral cube, linearized as ((c*H)+h)*W + w.
struct HyperCube {
  std::size_t bands = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  HyperCube() = default;
  HyperCube(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : bands(c), height(h), width(w), data(c * h * w, fill) {}

  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return data[(c * height + h) * width + w];
  }
  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data[(c * height + h) * width + w];
  }
  std::size_t size() const { return data.size(); }

  bool same_shape(const HyperCube& o) const {
    return bands == o.bands && height == o.height && width == o.width;
  }
};

/// Per-pixel transmittance pattern shared by all bands of one shot.
/// Invariant: every value lies in [0, 1].
struct CodedAperture {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  CodedAperture() = default;
  CodedAperture(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), data(h * w, fill) {}

  double& at(std::size_t h, std::size_t w) { return data[h * width + w]; }
  double at(std::size_t h, std::size_t w) const { return data[h * width + w]; }
  std::size_t size() const { return data.size(); }

  void validate() const {
    for (double v : data)
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("coded aperture: values must lie in [0, 1]");
  }
};

/// One dispersed 2D snapshot; width is measurement_width() of its config.
struct Measurement {
  std::size_t height = 0;
  std::size_t width = 0;       ///< W + (C-1)*step
  std::size_t shot_index = 1;  ///< 1-based position in the acquisition
  std::vector<double> data;

  Measurement() = default;
  Measurement(std::size_t h, std::size_t w, std::size_t shot = 1, double fill = 0.0)
      : height(h), width(w), shot_index(shot), data(h * w, fill) {}

  double& at(std::size_t h, std::size_t w) { return data[h * width + w]; }
  double at(std::size_t h, std::size_t w) const { return data[h * width + w]; }
  std::size_t size() const { return data.size(); }
};

/// Ordered snapshots of one acquisition.
struct MeasurementSet {
  std::vector<Measurement> shots;

  std::size_t count() const { return shots.size(); }

  void validate(const SensingConfig& cfg) const {
    if (shots.empty())
      throw std::invalid_argument("measurement set: at least one shot required");
    for (const Measurement& m : shots)
      if (m.height != cfg.height || m.width != cfg.measurement_width())
        throw std::invalid_argument("measurement set: shot shape does not match sensing config");
  }
};

// ---------------------------------------------------------------------------
// Deterministic accumulation
// ---------------------------------------------------------------------------

/// Kahan compensated accumulator. All reductions in this library accumulate
/// per output element in a fixed order, so results are independent of the
/// worker-thread count.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double v) {
    double y = v - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

// ---------------------------------------------------------------------------
// Threading
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t& thread_count_slot() {
  static std::size_t n = 1;
  return n;
}

}  // namespace detail

/// Set the worker-thread budget for row/band parallel loops. Results are
/// bit-identical for every value of n; this only affects wall time.
inline void set_threads(std::size_t n) { detail::thread_count_slot() = n == 0 ? 1 : n; }

inline std::size_t thread_count() { return detail::thread_count_slot(); }

namespace detail {

/// Fixed-order compensated dot product of two equally-sized buffers.
inline double buffer_dot(const std::vector<double>& a, const std::vector<double>& b) {
  KahanSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) acc.add(a[i] * b[i]);
  return acc.value();
}

/// Run fn(begin, end) over [0, count) split into contiguous blocks, one per
/// worker. Each output element must be written by exactly one block, so the
/// result cannot depend on the split.
template <typename Fn>
void parallel_blocks(std::size_t count, Fn&& fn) {
  std::size_t workers = thread_count();
  if (workers > count) workers = count;
  if (workers <= 1 || count == 0) {
    if (count > 0) fn(std::size_t(0), count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t t = 0; t < workers; ++t) {
    std::size_t b = t * chunk;
    std::size_t e = b + chunk < count ? b + chunk : count;
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (std::thread& th : pool) th.join();
}

}  // namespace detail

}  // namespace cassi
