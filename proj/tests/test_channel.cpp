#include <doctest.h>

#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "fimdd/channel.hpp"
#include "oracles.hpp"

using namespace fimdd;

namespace {

ScenarioParams small_params(int n, int paths, int elems_x = 2, int elems_z = 2) {
  ScenarioParams p;
  p.n = n;
  p.paths = paths;
  p.tx_bx = p.rx_bx = elems_x;
  p.tx_bz = p.rx_bz = elems_z;
  // Keep the largest tap inside a block of length n.
  if (n <= 8) p.max_range_m = 100.0;
  return p;
}

PhaseFn chirp_phase() { return afdm_cp_phase(0.37, 16); }

}  // namespace

TEST_CASE("path outer matrix") {
  const auto one = FimGeometry::half_wavelength(1, 1, 0.01);
  PropagationPath p;
  const auto m = path_outer_matrix(p, one, FimSurface::flat(one), one, FimSurface::flat(one), 1);
  REQUIRE(m.rows() == 1);
  CHECK(std::abs(m(0, 0) - cplx(1, 0)) < 1e-15);

  const auto sc = random_scenario(small_params(16, 3), 4);
  const auto tx = random_surface(sc.tx_geom, 1);
  const auto rx = random_surface(sc.rx_geom, 2);
  for (const auto& path : sc.paths) {
    const auto h = path_outer_matrix(path, sc.tx_geom, tx, sc.rx_geom, rx, 3);
    for (int i = 0; i + 1 < h.rows(); ++i) {
      for (int j = 0; j + 1 < h.cols(); ++j) {
        CHECK(std::abs(h(i, j) * h(i + 1, j + 1) - h(i, j + 1) * h(i + 1, j)) < 1e-12);
      }
    }
    CHECK(h.norm() == doctest::Approx(std::sqrt(16.0 / 3.0) * std::abs(path.gain)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(path_outer_matrix(p, one, FimSurface::flat(one), one, FimSurface::flat(one), 0),
                  ConfigError);
}

TEST_CASE("cyclic shift matrix") {
  const RMatrix p = cyclic_shift_matrix(3, 1);
  RMatrix expect(3, 3);
  expect << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  CHECK(p == expect);
  CHECK(cyclic_shift_matrix(6, 0) == RMatrix::Identity(6, 6));

  RMatrix acc = RMatrix::Identity(5, 5);
  for (int i = 0; i < 5; ++i) acc = cyclic_shift_matrix(5, 1) * acc;
  CHECK(acc == RMatrix::Identity(5, 5));
  CHECK_THROWS_AS(cyclic_shift_matrix(4, 4), RangeError);
  CHECK_THROWS_AS(cyclic_shift_matrix(4, -1), RangeError);
}

TEST_CASE("doppler matrix") {
  const auto d = doppler_matrix(4, 1.0);
  const cplx expect[] = {1, -kJ, -1, kJ};
  for (int k = 0; k < 4; ++k) CHECK(std::abs(d(k, k) - expect[k]) < 1e-15);
  CHECK((doppler_matrix(7, 0.0) - CMatrix::Identity(7, 7)).norm() == 0.0);
  const auto half = doppler_matrix(4, 0.5);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(half(k, k) - std::polar(1.0, -kPi * k / 4)) < 1e-15);
}

TEST_CASE("prefix phase matrix") {
  CHECK((cp_phase_matrix(8, 3, zero_cp_phase()) - CMatrix::Identity(8, 8)).norm() == 0.0);
  CHECK((cp_phase_matrix(8, 0, chirp_phase()) - CMatrix::Identity(8, 8)).norm() == 0.0);
  const auto afdm = cp_phase_matrix(4, 1, afdm_cp_phase(1.0 / 8, 4));
  CHECK(std::abs(afdm(0, 0) - cplx(1, 0)) < 1e-12);
  for (int k = 1; k < 4; ++k) CHECK(afdm(k, k) == cplx(1, 0));

  // Entry i holds phi(ell - i).
  const auto phi = chirp_phase();
  const auto m = cp_phase_matrix(16, 4, phi);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(m(i, i) - std::polar(1.0, -kTwoPi * phi(4 - i))) < 1e-12);
  CHECK_THROWS_AS(cp_phase_matrix(4, 4, phi), RangeError);
}

TEST_CASE("property: integer Doppler powers") {
  for (int f = -3; f <= 5; ++f) {
    CMatrix power = CMatrix::Identity(8, 8);
    const auto base = doppler_matrix(8, 1.0);
    for (int i = 0; i < std::abs(f); ++i) power = (f > 0 ? base : CMatrix(base.adjoint())) * power;
    CHECK((power - doppler_matrix(8, f)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("property: every delay-Doppler factor is unitary") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> fr(-3, 3), c(0, 1);
  for (int n : {4, 8, 16}) {
    for (int ell = 0; ell < n; ++ell) {
      CHECK(oracle::unitary_residual(cyclic_shift_matrix(n, ell).cast<cplx>()) < 1e-12);
      CHECK(oracle::unitary_residual(cp_phase_matrix(n, ell, afdm_cp_phase(c(rng), n))) < 1e-12);
    }
    for (int t = 0; t < 10; ++t) CHECK(oracle::unitary_residual(doppler_matrix(n, fr(rng))) < 1e-12);
  }
}

TEST_CASE("path time matrix") {
  auto sc = random_scenario(small_params(16, 1), 21);
  sc.paths[0].delay_s = 0.0;
  sc.paths[0].doppler_hz = 0.0;
  CHECK((path_time_matrix(sc, sc.paths[0], zero_cp_phase()) - CMatrix::Identity(16, 16)).norm() == 0.0);

  sc = random_scenario(small_params(16, 1), 22);
  const auto g = path_time_matrix(sc, sc.paths[0], chirp_phase());
  std::mt19937_64 rng(1);
  const auto x = oracle::random_cvector(16, rng);
  CHECK(std::abs((g * x).norm() - x.norm()) < 1e-12);

  // Delta input: circularly delayed, Doppler-ramped delta.
  const auto& p = sc.paths[0];
  const int ell = sc.tap(p);
  const double f = sc.normalized_doppler(p);
  const auto out = path_time_matrix(sc, p, zero_cp_phase()) * CVector::Unit(16, 3);
  for (int t = 0; t < 16; ++t) {
    const cplx expect = t == (3 + ell) % 16 ? std::polar(1.0, -kTwoPi * f * t / 16) : cplx(0);
    CHECK(std::abs(out[t] - expect) < 1e-12);
  }
}

TEST_CASE("effective time-domain channel") {
  auto sc = random_scenario(small_params(16, 1), 30);
  sc.paths[0].delay_s = 0.0;
  sc.paths[0].doppler_hz = 0.0;
  const auto tx = random_surface(sc.tx_geom, 3);
  const auto rx = random_surface(sc.rx_geom, 4);
  const auto h = assemble_effective_td(sc, tx, rx, zero_cp_phase());
  const CMatrix expect = Eigen::kroneckerProduct(
      path_outer_matrix(sc.paths[0], sc.tx_geom, tx, sc.rx_geom, rx, 1), CMatrix::Identity(16, 16));
  CHECK((h - expect).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(h.rows() == 64);
  CHECK(h.cols() == 64);
}

TEST_CASE("mismatched arrays reduce to d_s streams") {
  auto params = small_params(8, 2);
  params.tx_bx = 3;
  params.tx_bz = 2;
  const auto sc = random_scenario(params, 5);
  CHECK(sc.streams() == 4);
  const auto tx = random_surface(sc.tx_geom, 6);
  const auto rx = random_surface(sc.rx_geom, 7);
  const auto h = assemble_effective_td(sc, tx, rx, zero_cp_phase());
  CHECK(h.rows() == 32);
  CHECK((h - oracle::circular_io_matrix(sc, tx, rx, [](int) { return 0.0; })).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("property: assembled channel equals the circular-convolution sum") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = trial % 2 ? 16 : 8;
    const int paths = 1 + trial % 5;
    const int ex = 1 + trial % 2;
    const auto sc = random_scenario(small_params(n, paths, ex, 2), rng());
    const auto tx = random_surface(sc.tx_geom, rng());
    const auto rx = random_surface(sc.rx_geom, rng());
    const PhaseFn phi = trial % 3 ? afdm_cp_phase(0.1 + 0.05 * trial, n) : zero_cp_phase();
    const auto h = assemble_effective_td(sc, tx, rx, phi);
    CHECK((h - oracle::circular_io_matrix(sc, tx, rx, phi)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("property: spatial norm bookkeeping") {
  const auto sc = random_scenario(small_params(16, 5), 44);
  const auto tx = random_surface(sc.tx_geom, 1);
  const auto rx = random_surface(sc.rx_geom, 2);
  double lhs = 0.0, gains = 0.0;
  for (const auto& p : sc.paths) {
    lhs += path_outer_matrix(p, sc.tx_geom, tx, sc.rx_geom, rx, 5).squaredNorm();
    gains += std::norm(p.gain);
  }
  CHECK(lhs == doctest::Approx(16.0 / 5.0 * gains).epsilon(1e-12));
}

TEST_CASE("random scenario generation") {
  const ScenarioParams params;
  CHECK(params.nu_max() == doctest::Approx(19426.8).epsilon(1e-4));
  CHECK(params.tau_max() == doctest::Approx(0.4e-6).epsilon(1e-3));
  CHECK(params.max_tap() == 8);

  const auto a = random_scenario(params, 7);
  const auto b = random_scenario(params, 7);
  REQUIRE(a.paths.size() == 2);
  CHECK(a.n_cp == 8);
  for (std::size_t i = 0; i < a.paths.size(); ++i) {
    CHECK(a.paths[i].gain == b.paths[i].gain);
    CHECK(a.paths[i].delay_s == b.paths[i].delay_s);
  }

  auto wide = params;
  wide.paths = 400;
  const auto sc = random_scenario(wide, 8);
  double power = 0.0;
  for (const auto& p : sc.paths) {
    CHECK(p.delay_s >= 0.0);
    CHECK(p.delay_s <= params.tau_max());
    CHECK(std::abs(p.doppler_hz) <= params.nu_max());
    CHECK(std::abs(p.angles_in.azimuth) <= kPi / 2);
    CHECK(p.angles_in.elevation >= 0.0);
    CHECK(p.angles_in.elevation <= kPi);
    CHECK(sc.tap(p) <= sc.n_cp);
    power += std::norm(p.gain);
  }
  CHECK(power / 400 == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("scenario validation") {
  ScenarioParams p;
  p.paths = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = ScenarioParams{};
  p.n = 8;  // eight taps cannot fit in an 8-sample block
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = ScenarioParams{};
  p.n_cp = 4;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  auto sc = random_scenario(ScenarioParams{}, 1);
  sc.n_cp = 2;
  sc.paths[0].delay_s = 5 / sc.fs;
  CHECK_THROWS_AS(sc.validate(), ConfigError);
}
