// Core fixtures: the PRNG against its published reference vector, the
// synthetic scene generator, and byte-level container round-trips.

#include <catch_amalgamated.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cassi/cassi.hpp"

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

void dump(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// PRNG
// ---------------------------------------------------------------------------

TEST_CASE("splitmix64 matches the published reference vector for seed 0") {
  cassi::SplitMix64 rng(0);
  REQUIRE(rng.next() == UINT64_C(0xE220A8397B1DCDAF));
  REQUIRE(rng.next() == UINT64_C(0x6E789E6AA1B965F4));
  REQUIRE(rng.next() == UINT64_C(0x06C45D188009454F));
  REQUIRE(rng.next() == UINT64_C(0xF88BB8A8724C81EC));
}

TEST_CASE("splitmix64 seed 42 golden values") {
  cassi::SplitMix64 rng(42);
  REQUIRE(rng.next() == UINT64_C(0xBDD732262FEB6E95));
  REQUIRE(rng.next() == UINT64_C(0x28EFE333B266F103));
  REQUIRE(rng.next() == UINT64_C(0x47526757130F9F52));
}

TEST_CASE("unit draws are the 64-bit outputs scaled by 2^-64, in [0, 1)") {
  cassi::SplitMix64 rng(0);
  REQUIRE(rng.next_unit() == 0.88331080821364272);
  REQUIRE(rng.next_unit() == 0.43152799704851003);
  REQUIRE(rng.next_unit() == 0.026433771592597816);
  REQUIRE(rng.next_unit() == 0.97088197815382848);

  cassi::SplitMix64 sweep(9);
  for (int i = 0; i < 10000; ++i) {
    double u = sweep.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("gaussian pairs are finite and consume exactly two uniforms") {
  cassi::SplitMix64 a(7), b(7);
  double g0, g1;
  a.next_gauss_pair(g0, g1);
  REQUIRE(std::isfinite(g0));
  REQUIRE(std::isfinite(g1));
  b.next();
  b.next();
  // After one pair the streams realign.
  REQUIRE(a.next() == b.next());
}

// ---------------------------------------------------------------------------
// Phantom
// ---------------------------------------------------------------------------

TEST_CASE("phantom is deterministic, in range, and seed-sensitive") {
  cassi::SensingConfig cfg{16, 16, 4, 1, 1};
  cassi::PhantomSpec spec;
  spec.seed = 5;
  spec.radius_min = 2;
  spec.radius_max = 5;

  cassi::HyperCube a = cassi::make_phantom(spec, cfg);
  cassi::HyperCube b = cassi::make_phantom(spec, cfg);
  REQUIRE(a.data == b.data);

  for (double v : a.data) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
  // Blobs must rise above the background somewhere.
  double peak = 0.0;
  for (double v : a.data) peak = std::max(peak, v);
  REQUIRE(peak > spec.background + 0.05);

  spec.seed = 6;
  cassi::HyperCube c = cassi::make_phantom(spec, cfg);
  REQUIRE(a.data != c.data);
}

TEST_CASE("phantom validates its parameters") {
  cassi::SensingConfig cfg{8, 8, 2, 1, 1};
  cassi::PhantomSpec spec;
  spec.background = 1.5;
  REQUIRE_THROWS_AS(cassi::make_phantom(spec, cfg), std::invalid_argument);
  spec.background = 0.1;
  spec.radius_min = 6.0;
  spec.radius_max = 2.0;
  REQUIRE_THROWS_AS(cassi::make_phantom(spec, cfg), std::invalid_argument);
}

TEST_CASE("single-band phantom keeps its spectral center at band zero") {
  cassi::SensingConfig cfg{8, 8, 1, 0, 1};
  cassi::PhantomSpec spec;
  spec.seed = 3;
  spec.radius_min = 2;
  spec.radius_max = 4;
  REQUIRE_NOTHROW(cassi::make_phantom(spec, cfg));
}

// ---------------------------------------------------------------------------
// Containers
// ---------------------------------------------------------------------------

TEST_CASE("cube round-trips in f64 exactly and in f32 to float precision") {
  cassi::HyperCube cube(3, 4, 4);
  cassi::SplitMix64 rng(11);
  for (double& v : cube.data) v = rng.next_unit();

  std::string p64 = temp_path("core_cube64.hsc1");
  cassi::write_container(p64, cube, cassi::ContainerType::f64);
  cassi::HyperCube back = cassi::read_cube(p64);
  REQUIRE(back.bands == 3);
  REQUIRE(back.height == 4);
  REQUIRE(back.width == 4);
  REQUIRE(back.data == cube.data);

  // Header is 12 bytes + 4 per dim; payload is count * 8 for f64.
  REQUIRE(std::filesystem::file_size(p64) == 12 + 4 * 3 + cube.data.size() * 8);

  std::string p32 = temp_path("core_cube32.hsc1");
  cassi::write_container(p32, cube, cassi::ContainerType::f32);
  REQUIRE(std::filesystem::file_size(p32) == 12 + 4 * 3 + cube.data.size() * 4);
  cassi::HyperCube back32 = cassi::read_cube(p32);
  for (std::size_t i = 0; i < cube.data.size(); ++i)
    REQUIRE(back32.data[i] == static_cast<double>(static_cast<float>(cube.data[i])));
}

TEST_CASE("aperture and measurement containers round-trip") {
  cassi::CodedAperture mask(3, 5);
  for (std::size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = (i % 2) ? 1.0 : 0.0;
  std::string pm = temp_path("core_mask.hsc1");
  cassi::write_container(pm, mask);
  cassi::CodedAperture mback = cassi::read_aperture(pm);
  REQUIRE(mback.height == 3);
  REQUIRE(mback.width == 5);
  REQUIRE(mback.data == mask.data);

  cassi::Measurement meas(2, 7, 4);
  for (std::size_t i = 0; i < meas.data.size(); ++i) meas.data[i] = 0.25 * double(i);
  std::string py = temp_path("core_meas.hsc1");
  cassi::write_container(py, meas);
  cassi::Measurement yback = cassi::read_measurement(py);
  REQUIRE(yback.height == 2);
  REQUIRE(yback.width == 7);
  REQUIRE(yback.data == meas.data);
  // The shot index orders sets in memory; the format does not carry it.
  REQUIRE(yback.shot_index == 1);
}

TEST_CASE("container header bytes sit at their documented offsets") {
  cassi::HyperCube cube(2, 1, 3);
  for (std::size_t i = 0; i < cube.data.size(); ++i) cube.data[i] = 0.1 * double(i);
  std::string path = temp_path("core_layout.hsc1");
  cassi::write_container(path, cube, cassi::ContainerType::f64);

  std::vector<char> bytes = slurp(path);
  REQUIRE(bytes.size() == 12 + 12 + 6 * 8);
  REQUIRE(std::memcmp(bytes.data(), "HSC1", 4) == 0);
  std::uint32_t version, d0, d1, d2;
  std::memcpy(&version, bytes.data() + 4, 4);
  REQUIRE(version == 1);
  REQUIRE(bytes[8] == 0);   // kind: cube
  REQUIRE(bytes[9] == 1);   // dtype: f64
  REQUIRE(bytes[10] == 3);  // rank
  REQUIRE(bytes[11] == 0);  // reserved
  std::memcpy(&d0, bytes.data() + 12, 4);
  std::memcpy(&d1, bytes.data() + 16, 4);
  std::memcpy(&d2, bytes.data() + 20, 4);
  REQUIRE(d0 == 2);
  REQUIRE(d1 == 1);
  REQUIRE(d2 == 3);
  double first, last;
  std::memcpy(&first, bytes.data() + 24, 8);
  std::memcpy(&last, bytes.data() + 24 + 5 * 8, 8);
  REQUIRE(first == 0.0);
  REQUIRE(last == 0.5);
}

TEST_CASE("malformed containers are rejected with the failing byte offset") {
  cassi::CodedAperture mask(2, 2);
  mask.data = {0.0, 1.0, 0.5, 0.25};
  std::string path = temp_path("core_bad.hsc1");
  cassi::write_container(path, mask);
  std::vector<char> good = slurp(path);

  auto expect_reject = [&](std::vector<char> bytes, const char* needle) {
    std::string bad_path = temp_path("core_bad_mut.hsc1");
    dump(bad_path, bytes);
    try {
      cassi::read_container(bad_path);
      FAIL("expected format_error");
    } catch (const cassi::format_error& e) {
      REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  std::vector<char> bytes = good;
  bytes[0] = 'X';
  expect_reject(bytes, "bad magic");

  bytes = good;
  bytes[4] = 9;
  expect_reject(bytes, "version");

  bytes = good;
  bytes[8] = 7;
  expect_reject(bytes, "kind");

  bytes = good;
  bytes[9] = 5;
  expect_reject(bytes, "dtype");

  bytes = good;
  bytes[10] = 3;  // rank 3 on an aperture
  expect_reject(bytes, "rank");

  bytes = good;
  bytes[11] = 1;
  expect_reject(bytes, "reserved");

  bytes = good;
  bytes[12] = 0;
  bytes[13] = 0;
  bytes[14] = 0;
  bytes[15] = 0;
  expect_reject(bytes, "zero dimension");

  bytes = good;
  bytes.pop_back();
  expect_reject(bytes, "payload shorter");

  bytes = good;
  bytes.push_back(0);
  expect_reject(bytes, "trailing bytes");

  // Aperture values outside [0, 1] violate the type invariant.
  bytes = good;
  double two = 2.0;
  std::memcpy(bytes.data() + 20, &two, 8);
  std::string bad_path = temp_path("core_bad_mut.hsc1");
  dump(bad_path, bytes);
  REQUIRE_THROWS_AS(cassi::read_container(bad_path), cassi::format_error);
}

TEST_CASE("typed readers reject mismatched kinds") {
  cassi::CodedAperture mask(2, 2);
  mask.data = {0.0, 1.0, 0.5, 0.25};
  std::string path = temp_path("core_kind.hsc1");
  cassi::write_container(path, mask);
  REQUIRE_THROWS_AS(cassi::read_cube(path), cassi::format_error);
  REQUIRE_THROWS_AS(cassi::read_measurement(path), cassi::format_error);
  REQUIRE_NOTHROW(cassi::read_aperture(path));
}

TEST_CASE("non-finite values never reach disk") {
  cassi::HyperCube cube(1, 1, 2);
  cube.data = {1.0, std::numeric_limits<double>::infinity()};
  REQUIRE_THROWS_AS(cassi::write_container(temp_path("core_inf.hsc1"), cube),
                    cassi::format_error);
}

// ---------------------------------------------------------------------------
// Geometry and shared helpers
// ---------------------------------------------------------------------------

TEST_CASE("measurement width follows the dispersion geometry") {
  REQUIRE(cassi::SensingConfig{4, 4, 3, 2, 1}.measurement_width() == 8);
  REQUIRE(cassi::SensingConfig{4, 7, 5, 1, 1}.measurement_width() == 11);
  REQUIRE(cassi::SensingConfig{4, 7, 5, 0, 1}.measurement_width() == 7);
}

TEST_CASE("kahan summation survives a classic cancellation pattern") {
  // Naive accumulation drops every tiny addend; the compensated sum keeps
  // them to within an ulp of the true value.
  double naive = 1.0;
  cassi::KahanSum acc;
  acc.add(1.0);
  for (int i = 0; i < 100; ++i) {
    naive += 1e-17;
    acc.add(1e-17);
  }
  REQUIRE(naive == 1.0);
  REQUIRE(std::abs(acc.value() - (1.0 + 100e-17)) < 3e-16);
  REQUIRE(acc.value() > 1.0);
}

TEST_CASE("parallel blocks cover the range exactly once for any thread count") {
  for (std::size_t threads : {1u, 2u, 3u, 8u}) {
    cassi::set_threads(threads);
    std::vector<int> hits(37, 0);
    cassi::detail::parallel_blocks(hits.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) hits[i]++;
    });
    for (int h : hits) REQUIRE(h == 1);
  }
  cassi::set_threads(1);
}
