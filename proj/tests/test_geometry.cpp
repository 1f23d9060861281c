#include <doctest.h>

#include <random>
#include <set>

#include "fimdd/geometry.hpp"
#include "oracles.hpp"

using namespace fimdd;

namespace {

const double kLambda = kSpeedOfLight / 28e9;

FimGeometry grid(int bx, int bz) { return FimGeometry::half_wavelength(bx, bz, kLambda); }

}  // namespace

TEST_CASE("element positions follow the x-then-z layout") {
  const auto g = grid(2, 2);
  const auto pos = element_positions(g, FimSurface::flat(g));
  REQUIRE(pos.size() == 4);
  const double h = kLambda / 2;
  const double xs[] = {0, h, 0, h};
  const double zs[] = {0, 0, h, h};
  for (int b = 0; b < 4; ++b) {
    CHECK(pos[b][0] == doctest::Approx(xs[b]));
    CHECK(pos[b][1] == 0.0);
    CHECK(pos[b][2] == doctest::Approx(zs[b]));
  }

  const auto single = grid(1, 1);
  const auto p1 = element_positions(single, FimSurface::flat(single));
  REQUIRE(p1.size() == 1);
  CHECK(p1[0] == Point3{0, 0, 0});

  const auto row = grid(3, 1);
  const auto p3 = element_positions(row, FimSurface::flat(row));
  CHECK(p3[2][0] == doctest::Approx(2 * row.dx));
  CHECK(p3[2][2] == 0.0);
}

TEST_CASE("element positions reject mismatched surfaces") {
  const auto g = grid(2, 2);
  FimSurface s{RVector::Zero(3)};
  CHECK_THROWS_AS(element_positions(g, s), DimensionError);
  CHECK_THROWS_AS(steering_vector(g, s, {}), DimensionError);
}

TEST_CASE("geometry validation") {
  auto g = grid(2, 2);
  CHECK_NOTHROW(g.validate());
  g.y_min = 1.0;
  g.y_max = 0.0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = grid(2, 2);
  g.lambda = 0.0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = grid(2, 2);
  g.bx = 0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  CHECK(grid(2, 2).morphing_range() == doctest::Approx(2 * kLambda));
}

TEST_CASE("steering vector small cases") {
  const auto one = grid(1, 1);
  const auto b = steering_vector(one, FimSurface::flat(one), {0.3, 1.1});
  CHECK(std::abs(b[0] - cplx(1, 0)) < 1e-15);

  const auto pair = grid(2, 1);
  const auto b2 = steering_vector(pair, FimSurface::flat(pair), {0.0, kPi / 2});
  CHECK(std::abs(b2[0] - cplx(1 / std::sqrt(2.0), 0)) < 1e-12);
  CHECK(std::abs(b2[1] - cplx(-1 / std::sqrt(2.0), 0)) < 1e-12);

  FimSurface quarter{RVector::Constant(1, kLambda / 4)};
  const auto bq = steering_vector(one, quarter, {kPi / 2, kPi / 2});
  CHECK(std::abs(bq[0] - kJ) < 1e-12);
}

TEST_CASE("steering derivative structure") {
  const auto g = grid(2, 2);
  const auto s = random_surface(g, 3);
  const auto zero = steering_derivative(g, s, {0.0, 1.0}, 2);
  CHECK(zero.norm() == 0.0);

  const PathAngles a{0.7, 1.2};
  for (int n = 0; n < 4; ++n) {
    const auto d = steering_derivative(g, s, a, n);
    for (int b = 0; b < 4; ++b) {
      if (b != n) CHECK(d[b] == cplx(0, 0));
    }
    CHECK(std::abs(d[n]) ==
          doctest::Approx(g.wavenumber() * std::abs(std::sin(a.azimuth) * std::sin(a.elevation)) / 2));
  }
  CHECK_THROWS_AS(steering_derivative(g, s, a, 4), RangeError);
  CHECK_THROWS_AS(steering_derivative(g, s, a, -1), RangeError);
}

TEST_CASE("property: steering vectors are unit norm and match the plane-wave oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> az(-kPi / 2, kPi / 2), el(0, kPi);
  for (int trial = 0; trial < 200; ++trial) {
    const int bx = 1 + static_cast<int>(rng() % 4);
    const int bz = 1 + static_cast<int>(rng() % 4);
    const auto g = grid(bx, bz);
    const auto s = random_surface(g, rng());
    const PathAngles a{az(rng), el(rng)};
    const auto b = steering_vector(g, s, a);
    CHECK(std::abs(b.norm() - 1.0) < 1e-14);
    for (int e = 0; e < g.elements(); ++e) {
      CHECK(std::abs(b[e] - oracle::steering_entry(g, s.y[e], e, a.azimuth, a.elevation)) < 1e-12);
    }
  }
}

TEST_CASE("property: steering derivative matches central differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> az(-kPi / 2, kPi / 2), el(0, kPi);
  const auto g = grid(2, 2);
  const double h = 1e-7 * kLambda;
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_surface(g, rng());
    const PathAngles a{az(rng), el(rng)};
    for (int n = 0; n < g.elements(); ++n) {
      const auto analytic = steering_derivative(g, s, a, n);
      const CMatrix fd = oracle::central_difference(
          [&](double y) -> CMatrix {
            FimSurface t = s;
            t.y[n] = y;
            return steering_vector(g, t, a);
          },
          s.y[n], h);
      const double scale = std::max(analytic.norm(), 1e-300);
      if (analytic.norm() > 1e-6 * g.wavenumber()) {
        CHECK((fd.col(0) - analytic).norm() / scale < 1e-6);
      } else {
        CHECK(fd.norm() < 1e-6 * g.wavenumber());
      }
    }
  }
}

TEST_CASE("property: element positions are injective") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = grid(1 + static_cast<int>(rng() % 5), 1 + static_cast<int>(rng() % 5));
    const auto pos = element_positions(g, random_surface(g, rng()));
    std::set<std::pair<double, double>> xz;
    for (const auto& p : pos) xz.insert({p[0], p[2]});
    CHECK(xz.size() == pos.size());
  }
}

TEST_CASE("projection clamps and is idempotent") {
  const auto g = grid(2, 2);
  const auto inside = random_surface(g, 1);
  CHECK(project_surface(g, inside).y == inside.y);

  FimSurface over = inside;
  over.y[1] = g.y_max + 0.1 * kLambda;
  CHECK(project_surface(g, over).y[1] == g.y_max);

  FimSurface below{RVector::Constant(4, g.y_min - 1.0)};
  CHECK(project_surface(g, below).y == RVector::Constant(4, g.y_min));

  std::mt19937_64 rng(2);
  std::normal_distribution<double> wide(0.0, 3 * kLambda);
  for (int trial = 0; trial < 100; ++trial) {
    FimSurface s{RVector(4)};
    for (int i = 0; i < 4; ++i) s.y[i] = wide(rng);
    const auto once = project_surface(g, s);
    CHECK(project_surface(g, once).y == once.y);
    CHECK(once.y.minCoeff() >= g.y_min);
    CHECK(once.y.maxCoeff() <= g.y_max);
  }
}

TEST_CASE("random surfaces") {
  auto g = grid(2, 2);
  CHECK(random_surface(g, 42).y == random_surface(g, 42).y);
  CHECK(random_surface(g, 42).y != random_surface(g, 43).y);

  auto pinned = g;
  pinned.y_min = pinned.y_max = 0.0;
  CHECK(random_surface(pinned, 9).y == RVector::Zero(4));

  auto big = grid(100, 100);
  const auto s = random_surface(big, 77);
  const double mean = s.y.mean();
  const double sd = big.morphing_range() / std::sqrt(12.0);
  CHECK(std::abs(mean - 0.5 * (big.y_min + big.y_max)) < 3 * sd / std::sqrt(1e4));
  CHECK(s.y.minCoeff() >= big.y_min);
  CHECK(s.y.maxCoeff() <= big.y_max);
}
