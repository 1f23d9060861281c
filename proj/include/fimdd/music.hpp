#pragma once

// Bistatic angle-of-arrival estimation with 2D MUSIC over the receive
// metasurface steering manifold.

#include <vector>

#include "fimdd/geometry.hpp"
#include "fimdd/types.hpp"

namespace fimdd {

struct AnglePair {
  double azimuth = 0.0;
  double elevation = 0.0;
};

struct MusicGrid {
  std::vector<double> azimuth_points;    // radians, ascending
  std::vector<double> elevation_points;  // radians, ascending
  RMatrix values;                        // rows: azimuth, cols: elevation; peak-normalized
  std::vector<AnglePair> peaks;

  // Full angle ranges sampled every `step_deg` degrees.
  static MusicGrid uniform(double step_deg);
};

/// Reshapes the stacked (N d_s) vector into a d_s x N matrix whose row v is
/// the sample sequence of stream v.
CMatrix unvec_frame(const CVector& y_bar, int n, int streams);

/// Sample covariance Y Y^H.
CMatrix rx_covariance(const CMatrix& y_mat);

/// Averages Y Y^H over several frames.
CMatrix rx_covariance(const std::vector<CMatrix>& frames);

/// Orthonormal eigenvectors of the d_s - P smallest eigenvalues.
CMatrix noise_subspace(const CMatrix& covariance, int num_scatterers);

inline constexpr double kMusicFloor = 1e-12;

/// Evaluates 1 / max(b^H U U^H b, floor) on the grid and normalizes the
/// peak to 1. When the array has more elements than the subspace rows, the
/// steering vector is restricted to the first rows (stream selection).
MusicGrid music_spectrum(const CMatrix& noise_basis, const FimGeometry& rx_geom,
                         const FimSurface& rx_surf, MusicGrid grid);

/// Denominator b^H U U^H b at a single angle pair.
double music_denominator(const CMatrix& noise_basis, const FimGeometry& rx_geom,
                         const FimSurface& rx_surf, const AnglePair& angles);

struct PeakList {
  std::vector<AnglePair> peaks;
  std::vector<double> values;
  bool short_count = false;  // fewer strict local maxima than requested
};

/// The `count` largest strict local maxima (8-neighbourhood). Ties go to the
/// lexicographically smaller (azimuth, elevation).
PeakList extract_peaks(const MusicGrid& grid, int count);

}  // namespace fimdd
