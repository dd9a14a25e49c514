#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "cassi/types.hpp"

// HSC1 container: a minimal little-endian format for the three object kinds
// this toolkit exchanges (spectral cube, coded aperture, dispersed
// measurement).
//
//   offset  size  field
//   0       4     magic "HSC1" (48 53 43 31)
//   4       4     version, u32 = 1
//   8       1     kind: 0 = cube, 1 = aperture, 2 = measurement
//   9       1     dtype: 0 = f32, 1 = f64
//   10      1     rank: 3 for cubes (C, H, W), 2 otherwise (H, W)
//   11      1     reserved, must be 0
//   12      4*r   dims, u32 each
//   ...           payload, dims-product values in linear order
//                 ((c*H)+h)*W + w; no compression, no padding
//
// All multi-byte fields are little-endian. This implementation does bulk
// reads/writes of native scalars and therefore requires a little-endian host.

namespace cassi {

static_assert(std::endian::native == std::endian::little,
              "HSC1 serialization assumes a little-endian host");

enum class ContainerKind : std::uint8_t { cube = 0, aperture = 1, measurement = 2 };
enum class ContainerType : std::uint8_t { f32 = 0, f64 = 1 };

using ContainerObject = std::variant<HyperCube, CodedAperture, Measurement>;

namespace detail {

constexpr char kMagic[4] = {'H', 'S', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

inline void require_finite(const std::vector<double>& values, const std::string& path) {
  for (double v : values)
    if (!std::isfinite(v))
      throw format_error("HSC1 write: non-finite value rejected: " + path);
}

inline void write_payload(std::ofstream& out, const std::vector<double>& values,
                          ContainerType dtype) {
  if (dtype == ContainerType::f64) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    std::vector<float> f(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) f[i] = static_cast<float>(values[i]);
    out.write(reinterpret_cast<const char*>(f.data()),
              static_cast<std::streamsize>(f.size() * sizeof(float)));
  }
}

inline void write_header(std::ofstream& out, ContainerKind kind, ContainerType dtype,
                         const std::vector<std::uint32_t>& dims) {
  out.write(kMagic, 4);
  std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  std::uint8_t head[4] = {static_cast<std::uint8_t>(kind), static_cast<std::uint8_t>(dtype),
                          static_cast<std::uint8_t>(dims.size()), 0};
  out.write(reinterpret_cast<const char*>(head), 4);
  out.write(reinterpret_cast<const char*>(dims.data()),
            static_cast<std::streamsize>(dims.size() * 4));
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error("HSC1 write: cannot open " + path);
  return out;
}

}  // namespace detail

inline void write_container(const std::string& path, const HyperCube& cube,
                            ContainerType dtype = ContainerType::f64) {
  detail::require_finite(cube.data, path);
  auto out = detail::open_for_write(path);
  detail::write_header(out, ContainerKind::cube, dtype,
                       {static_cast<std::uint32_t>(cube.bands),
                        static_cast<std::uint32_t>(cube.height),
                        static_cast<std::uint32_t>(cube.width)});
  detail::write_payload(out, cube.data, dtype);
  if (!out) throw format_error("HSC1 write: I/O failure on " + path);
}

inline void write_container(const std::string& path, const CodedAperture& mask,
                            ContainerType dtype = ContainerType::f64) {
  detail::require_finite(mask.data, path);
  auto out = detail::open_for_write(path);
  detail::write_header(out, ContainerKind::aperture, dtype,
                       {static_cast<std::uint32_t>(mask.height),
                        static_cast<std::uint32_t>(mask.width)});
  detail::write_payload(out, mask.data, dtype);
  if (!out) throw format_error("HSC1 write: I/O failure on " + path);
}

inline void write_container(const std::string& path, const Measurement& meas,
                            ContainerType dtype = ContainerType::f64) {
  detail::require_finite(meas.data, path);
  auto out = detail::open_for_write(path);
  detail::write_header(out, ContainerKind::measurement, dtype,
                       {static_cast<std::uint32_t>(meas.height),
                        static_cast<std::uint32_t>(meas.width)});
  detail::write_payload(out, meas.data, dtype);
  if (!out) throw format_error("HSC1 write: I/O failure on " + path);
}

/// Parse an HSC1 file. Header fields and the payload length are validated;
/// aperture payloads must additionally lie in [0, 1] (type invariant).
/// Measurements come back with shot_index 1; the index is an in-memory
/// ordering aid, not part of the format.
inline ContainerObject read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("HSC1 read: cannot open " + path);

  auto fail = [&path](std::size_t offset, const std::string& what) -> format_error {
    return format_error("HSC1 read: " + path + ": byte " + std::to_string(offset) + ": " + what);
  };

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, detail::kMagic, 4) != 0)
    throw fail(0, "bad magic (expected \"HSC1\")");

  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (!in || version != detail::kVersion)
    throw fail(4, "unsupported version " + std::to_string(version));

  std::uint8_t head[4];
  in.read(reinterpret_cast<char*>(head), 4);
  if (!in) throw fail(8, "truncated header");
  if (head[0] > 2) throw fail(8, "unknown kind " + std::to_string(head[0]));
  if (head[1] > 1) throw fail(9, "unknown dtype " + std::to_string(head[1]));
  auto kind = static_cast<ContainerKind>(head[0]);
  auto dtype = static_cast<ContainerType>(head[1]);
  std::uint8_t rank = head[2];
  std::uint8_t expected_rank = kind == ContainerKind::cube ? 3 : 2;
  if (rank != expected_rank)
    throw fail(10, "rank " + std::to_string(rank) + " invalid for this kind");
  if (head[3] != 0) throw fail(11, "reserved byte must be 0");

  std::vector<std::uint32_t> dims(rank);
  in.read(reinterpret_cast<char*>(dims.data()), static_cast<std::streamsize>(4 * rank));
  if (!in) throw fail(12, "truncated dims");
  std::size_t count = 1;
  for (std::uint32_t d : dims) {
    if (d == 0) throw fail(12, "zero dimension");
    count *= d;
  }

  std::size_t header_bytes = 12 + 4ull * rank;
  std::size_t value_bytes = dtype == ContainerType::f64 ? 8 : 4;
  std::vector<double> values(count);
  if (dtype == ContainerType::f64) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(count * value_bytes));
  } else {
    std::vector<float> f(count);
    in.read(reinterpret_cast<char*>(f.data()),
            static_cast<std::streamsize>(count * value_bytes));
    for (std::size_t i = 0; i < count; ++i) values[i] = static_cast<double>(f[i]);
  }
  if (!in || static_cast<std::size_t>(in.gcount()) != count * value_bytes)
    throw fail(header_bytes, "payload shorter than dims require");
  // Trailing bytes would mean the dims lie about the payload.
  char extra;
  if (in.read(&extra, 1))
    throw fail(header_bytes + count * value_bytes, "trailing bytes after payload");

  switch (kind) {
    case ContainerKind::cube: {
      HyperCube cube(dims[0], dims[1], dims[2]);
      cube.data = std::move(values);
      return cube;
    }
    case ContainerKind::aperture: {
      CodedAperture mask(dims[0], dims[1]);
      mask.data = std::move(values);
      try {
        mask.validate();
      } catch (const std::invalid_argument& e) {
        throw format_error("HSC1 read: " + path + ": " + e.what());
      }
      return mask;
    }
    default: {
      Measurement meas(dims[0], dims[1]);
      meas.data = std::move(values);
      return meas;
    }
  }
}

/// Convenience typed readers; throw format_error when the file holds a
/// different kind.
inline HyperCube read_cube(const std::string& path) {
  ContainerObject obj = read_container(path);
  if (auto* c = std::get_if<HyperCube>(&obj)) return std::move(*c);
  throw format_error("HSC1 read: " + path + ": expected a cube");
}

inline CodedAperture read_aperture(const std::string& path) {
  ContainerObject obj = read_container(path);
  if (auto* m = std::get_if<CodedAperture>(&obj)) return std::move(*m);
  throw format_error("HSC1 read: " + path + ": expected a coded aperture");
}

inline Measurement read_measurement(const std::string& path) {
  ContainerObject obj = read_container(path);
  if (auto* m = std::get_if<Measurement>(&obj)) return std::move(*m);
  throw format_error("HSC1 read: " + path + ": expected a measurement");
}

}  // namespace cassi
