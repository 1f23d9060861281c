#pragma once

// Morphable uniform planar array (UPA) model of a flexible intelligent
// metasurface. Elements sit on an x-z grid and each one may translate along
// the y axis inside [y_min, y_max].

#include <array>
#include <cstdint>
#include <vector>

#include "fimdd/types.hpp"

namespace fimdd {

struct FimGeometry {
  int bx = 2;             // elements along x
  int bz = 2;             // elements along z
  double dx = 0.0;        // spacing along x [m]
  double dz = 0.0;        // spacing along z [m]
  double lambda = 0.0;    // carrier wavelength [m]
  double y_min = 0.0;     // morphing bounds [m]
  double y_max = 0.0;

  int elements() const { return bx * bz; }
  double morphing_range() const { return y_max - y_min; }
  double wavenumber() const { return kTwoPi / lambda; }

  // Throws ConfigError when the layout is unusable.
  void validate() const;

  // Half-wavelength spaced bx-by-bz array with y in [-lambda, +lambda].
  static FimGeometry half_wavelength(int bx, int bz, double lambda);
};

// y-coordinate of every radiating element, one entry per element.
struct FimSurface {
  RVector y;

  static FimSurface flat(const FimGeometry& geom, double level = 0.0);
  int size() const { return static_cast<int>(y.size()); }
};

struct PathAngles {
  double azimuth = 0.0;    // [-pi/2, pi/2]
  double elevation = 0.0;  // [0, pi]
};

using Point3 = std::array<double, 3>;

/// Cartesian coordinates of each element. Element 0 is the reference and
/// sits at x = z = 0; x advances fastest, then z.
std::vector<Point3> element_positions(const FimGeometry& geom, const FimSurface& surf);

/// Unit-norm array response for a plane wave arriving from (or leaving
/// towards) `angles`. Entry b is exp(j k <p_b, u>) / sqrt(B) where u is the
/// direction vector (sin el cos az, sin el sin az, cos el).
CVector steering_vector(const FimGeometry& geom, const FimSurface& surf, const PathAngles& angles);

/// Derivative of the steering vector with respect to y[n] (0-based). Only
/// entry n is nonzero. The transmit-side derivative of b^H is the adjoint of
/// this vector.
CVector steering_derivative(const FimGeometry& geom, const FimSurface& surf,
                            const PathAngles& angles, int n);

/// Clamps every entry into [y_min, y_max].
FimSurface project_surface(const FimGeometry& geom, const FimSurface& surf);

/// i.i.d. uniform surface on [y_min, y_max], reproducible for a given seed.
FimSurface random_surface(const FimGeometry& geom, std::uint64_t seed);

// Throws DimensionError if the surface does not have one entry per element.
void check_surface(const FimGeometry& geom, const FimSurface& surf);

}  // namespace fimdd
