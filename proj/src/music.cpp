#include "fimdd/music.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace fimdd {

MusicGrid MusicGrid::uniform(double step_deg) {
  if (!(step_deg > 0.0)) throw ConfigError("MusicGrid: step must be positive");
  MusicGrid g;
  const double step = step_deg * kPi / 180.0;
  const int az_count = static_cast<int>(std::floor(180.0 / step_deg + 1e-9)) + 1;
  const int el_count = az_count;
  for (int i = 0; i < az_count; ++i) g.azimuth_points.push_back(-kPi / 2 + i * step);
  for (int i = 0; i < el_count; ++i) g.elevation_points.push_back(i * step);
  return g;
}

CMatrix unvec_frame(const CVector& y_bar, int n, int streams) {
  if (n < 1 || streams < 1 || y_bar.size() != static_cast<Eigen::Index>(n) * streams) {
    throw DimensionError("unvec_frame: expected " + std::to_string(n * streams) +
                         " samples, got " + std::to_string(y_bar.size()));
  }
  // Column-stacked N x d_s, then transposed so that rows index streams.
  return Eigen::Map<const CMatrix>(y_bar.data(), n, streams).transpose();
}

CMatrix rx_covariance(const CMatrix& y_mat) { return y_mat * y_mat.adjoint(); }

CMatrix rx_covariance(const std::vector<CMatrix>& frames) {
  if (frames.empty()) throw DimensionError("rx_covariance: no frames");
  CMatrix acc = CMatrix::Zero(frames.front().rows(), frames.front().rows());
  for (const auto& f : frames) acc += rx_covariance(f);
  return acc / static_cast<double>(frames.size());
}

CMatrix noise_subspace(const CMatrix& covariance, int num_scatterers) {
  if (covariance.rows() != covariance.cols()) {
    throw DimensionError("noise_subspace: covariance must be square");
  }
  const int ds = static_cast<int>(covariance.rows());
  if (num_scatterers < 1 || num_scatterers >= ds) {
    throw ConfigError("noise_subspace: need 1 <= P < d_s (P=" + std::to_string(num_scatterers) +
                      ", d_s=" + std::to_string(ds) + ")");
  }
  // Eigenvalues come back in ascending order.
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(covariance);
  if (eig.info() != Eigen::Success) throw NumericalError("noise_subspace: eigensolver failed");
  return eig.eigenvectors().leftCols(ds - num_scatterers);
}

namespace {

CVector restricted_steering(const CMatrix& basis, const FimGeometry& geom, const FimSurface& surf,
                            const AnglePair& angles) {
  const CVector b = steering_vector(geom, surf, {angles.azimuth, angles.elevation});
  if (b.size() < basis.rows()) {
    throw DimensionError("music: noise basis has more rows than array elements");
  }
  return b.head(basis.rows());
}

}  // namespace

double music_denominator(const CMatrix& noise_basis, const FimGeometry& rx_geom,
                         const FimSurface& rx_surf, const AnglePair& angles) {
  const CVector b = restricted_steering(noise_basis, rx_geom, rx_surf, angles);
  return (noise_basis.adjoint() * b).squaredNorm();
}

MusicGrid music_spectrum(const CMatrix& noise_basis, const FimGeometry& rx_geom,
                         const FimSurface& rx_surf, MusicGrid grid) {
  if (grid.azimuth_points.empty() || grid.elevation_points.empty()) {
    throw DimensionError("music_spectrum: empty grid");
  }
  if (noise_basis.cols() == 0) throw DimensionError("music_spectrum: empty noise subspace");
  const auto n_az = static_cast<Eigen::Index>(grid.azimuth_points.size());
  const auto n_el = static_cast<Eigen::Index>(grid.elevation_points.size());
  grid.values.resize(n_az, n_el);
  for (Eigen::Index i = 0; i < n_az; ++i) {
    for (Eigen::Index j = 0; j < n_el; ++j) {
      const double den = music_denominator(
          noise_basis, rx_geom, rx_surf, {grid.azimuth_points[i], grid.elevation_points[j]});
      grid.values(i, j) = 1.0 / std::max(den, kMusicFloor);
    }
  }
  grid.values /= grid.values.maxCoeff();
  grid.peaks.clear();
  return grid;
}

PeakList extract_peaks(const MusicGrid& grid, int count) {
  if (count < 1) throw ConfigError("extract_peaks: count must be >= 1");
  const RMatrix& v = grid.values;
  struct Candidate {
    double value;
    double az;
    double el;
  };
  std::vector<Candidate> found;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      bool strict = true;
      for (int di = -1; di <= 1 && strict; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const Eigen::Index ii = i + di;
          const Eigen::Index jj = j + dj;
          if (ii < 0 || jj < 0 || ii >= v.rows() || jj >= v.cols()) continue;
          if (!(v(i, j) > v(ii, jj))) {
            strict = false;
            break;
          }
        }
      }
      if (strict) found.push_back({v(i, j), grid.azimuth_points[i], grid.elevation_points[j]});
    }
  }
  std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
    if (a.value != b.value) return a.value > b.value;
    return std::tie(a.az, a.el) < std::tie(b.az, b.el);
  });
  PeakList out;
  out.short_count = static_cast<int>(found.size()) < count;
  const auto keep = std::min<std::size_t>(found.size(), static_cast<std::size_t>(count));
  for (std::size_t k = 0; k < keep; ++k) {
    out.peaks.push_back({found[k].az, found[k].el});
    out.values.push_back(found[k].value);
  }
  return out;
}

}  // namespace fimdd
