#include "fimdd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace fimdd {

void FimGeometry::validate() const {
  if (bx < 1 || bz < 1) throw ConfigError("FimGeometry: element counts must be >= 1");
  if (!(dx > 0.0) || !(dz > 0.0)) throw ConfigError("FimGeometry: spacings must be positive");
  if (!(lambda > 0.0)) throw ConfigError("FimGeometry: wavelength must be positive");
  // A degenerate range (y_min == y_max) describes a rigid array and is allowed.
  if (y_min > y_max) throw ConfigError("FimGeometry: y_min exceeds y_max");
}

FimGeometry FimGeometry::half_wavelength(int bx, int bz, double lambda) {
  return FimGeometry{bx, bz, lambda / 2.0, lambda / 2.0, lambda, -lambda, lambda};
}

FimSurface FimSurface::flat(const FimGeometry& geom, double level) {
  return FimSurface{RVector::Constant(geom.elements(), level)};
}

void check_surface(const FimGeometry& geom, const FimSurface& surf) {
  if (surf.size() != geom.elements()) {
    throw DimensionError("surface has " + std::to_string(surf.size()) + " entries, geometry has " +
                         std::to_string(geom.elements()) + " elements");
  }
}

std::vector<Point3> element_positions(const FimGeometry& geom, const FimSurface& surf) {
  check_surface(geom, surf);
  const int count = geom.elements();
  std::vector<Point3> out(static_cast<std::size_t>(count));
  for (int b = 0; b < count; ++b) {
    out[b] = {geom.dx * (b % geom.bx), surf.y[b], geom.dz * (b / geom.bx)};
  }
  return out;
}

CVector steering_vector(const FimGeometry& geom, const FimSurface& surf, const PathAngles& angles) {
  check_surface(geom, surf);
  const int count = geom.elements();
  const double k = geom.wavenumber();
  const double st = std::sin(angles.elevation);
  const double ux = st * std::cos(angles.azimuth);
  const double uy = st * std::sin(angles.azimuth);
  const double uz = std::cos(angles.elevation);
  const double scale = 1.0 / std::sqrt(static_cast<double>(count));

  CVector out(count);
  for (int b = 0; b < count; ++b) {
    const double x = geom.dx * (b % geom.bx);
    const double z = geom.dz * (b / geom.bx);
    out[b] = scale * std::polar(1.0, k * (x * ux + surf.y[b] * uy + z * uz));
  }
  return out;
}

CVector steering_derivative(const FimGeometry& geom, const FimSurface& surf,
                            const PathAngles& angles, int n) {
  check_surface(geom, surf);
  if (n < 0 || n >= geom.elements()) {
    throw RangeError("steering_derivative: element index " + std::to_string(n) + " out of range");
  }
  const CVector b = steering_vector(geom, surf, angles);
  CVector out = CVector::Zero(geom.elements());
  out[n] = kJ * geom.wavenumber() * std::sin(angles.azimuth) * std::sin(angles.elevation) * b[n];
  return out;
}

FimSurface project_surface(const FimGeometry& geom, const FimSurface& surf) {
  return FimSurface{surf.y.cwiseMax(geom.y_min).cwiseMin(geom.y_max)};
}

FimSurface random_surface(const FimGeometry& geom, std::uint64_t seed) {
  FimSurface out = FimSurface::flat(geom, geom.y_min);
  if (geom.y_max <= geom.y_min) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(geom.y_min, geom.y_max);
  for (int b = 0; b < out.size(); ++b) out.y[b] = dist(rng);
  return out;
}

}  // namespace fimdd
