#include "fimdd/channel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

namespace fimdd {

int ChannelScenario::streams() const { return std::min(tx_geom.elements(), rx_geom.elements()); }

int ChannelScenario::tap(const PropagationPath& path) const {
  return static_cast<int>(std::lround(path.delay_s * fs));
}

double ChannelScenario::normalized_doppler(const PropagationPath& path) const {
  return static_cast<double>(n) * path.doppler_hz / fs;
}

void ChannelScenario::validate() const {
  tx_geom.validate();
  rx_geom.validate();
  if (paths.empty()) throw ConfigError("ChannelScenario: at least one path is required");
  if (n < 1) throw ConfigError("ChannelScenario: block length must be >= 1");
  if (!(fs > 0.0)) throw ConfigError("ChannelScenario: sampling rate must be positive");
  if (n_cp < 0 || n_cp >= n) throw ConfigError("ChannelScenario: CP length must lie in [0, N)");
  if (noise_var < 0.0) throw ConfigError("ChannelScenario: noise variance must be >= 0");
  for (const auto& path : paths) {
    const int ell = tap(path);
    if (ell < 0 || ell > n_cp) {
      throw ConfigError("ChannelScenario: path tap " + std::to_string(ell) +
                        " outside [0, N_CP=" + std::to_string(n_cp) + "]");
    }
  }
}

PhaseFn zero_cp_phase() {
  return [](int) { return 0.0; };
}

PhaseFn afdm_cp_phase(double c1, int n) {
  const double nn = static_cast<double>(n);
  return [c1, nn](int idx) { return c1 * (nn * nn - 2.0 * nn * idx); };
}

CMatrix path_outer_matrix(const PropagationPath& path, const FimGeometry& tx_geom,
                          const FimSurface& tx_surf, const FimGeometry& rx_geom,
                          const FimSurface& rx_surf, int num_paths) {
  if (num_paths < 1) throw ConfigError("path_outer_matrix: path count must be >= 1");
  const CVector b_tx = steering_vector(tx_geom, tx_surf, path.angles_out);
  const CVector b_rx = steering_vector(rx_geom, rx_surf, path.angles_in);
  const double scale =
      std::sqrt(static_cast<double>(tx_geom.elements()) * rx_geom.elements() / num_paths);
  return (scale * path.gain) * b_rx * b_tx.adjoint();
}

CMatrix select_streams(const CMatrix& spatial, int streams) {
  if (streams > spatial.rows() || streams > spatial.cols()) {
    throw DimensionError("select_streams: more streams than antennas");
  }
  return spatial.topLeftCorner(streams, streams);
}

RMatrix cyclic_shift_matrix(int n, int ell) {
  if (n < 1) throw DimensionError("cyclic_shift_matrix: n must be >= 1");
  if (ell < 0 || ell >= n) {
    throw RangeError("cyclic_shift_matrix: shift " + std::to_string(ell) + " outside [0, " +
                     std::to_string(n) + ")");
  }
  RMatrix out = RMatrix::Zero(n, n);
  for (int j = 0; j < n; ++j) out((j + ell) % n, j) = 1.0;
  return out;
}

CMatrix doppler_matrix(int n, double f) {
  CVector diag(n);
  for (int k = 0; k < n; ++k) diag[k] = std::polar(1.0, -kTwoPi * f * k / n);
  return diag.asDiagonal();
}

CMatrix cp_phase_matrix(int n, int ell, const PhaseFn& phase) {
  if (ell < 0 || ell >= n) {
    throw RangeError("cp_phase_matrix: tap " + std::to_string(ell) + " outside [0, " +
                     std::to_string(n) + ")");
  }
  CVector diag = CVector::Ones(n);
  for (int i = 0; i < ell; ++i) diag[i] = std::polar(1.0, -kTwoPi * phase(ell - i));
  return diag.asDiagonal();
}

CMatrix path_time_matrix(const ChannelScenario& scenario, const PropagationPath& path,
                         const PhaseFn& phase) {
  const int n = scenario.n;
  const int ell = scenario.tap(path);
  if (ell > scenario.n_cp) throw RangeError("path_time_matrix: tap exceeds the cyclic prefix");
  // Both leading factors are diagonal, so G_p[i, j] = theta_i omega_i Pi^l[i, j].
  const CMatrix theta = cp_phase_matrix(n, ell, phase);
  const CMatrix omega = doppler_matrix(n, scenario.normalized_doppler(path));
  CMatrix out = CMatrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    const int i = (j + ell) % n;
    out(i, j) = theta(i, i) * omega(i, i);
  }
  return out;
}

CMatrix assemble_effective_td(const ChannelScenario& scenario, const FimSurface& tx_surf,
                              const FimSurface& rx_surf, const PhaseFn& phase) {
  check_surface(scenario.tx_geom, tx_surf);
  check_surface(scenario.rx_geom, rx_surf);
  const int ds = scenario.streams();
  const int n = scenario.n;
  CMatrix out = CMatrix::Zero(n * ds, n * ds);
  for (const auto& path : scenario.paths) {
    const CMatrix spatial =
        select_streams(path_outer_matrix(path, scenario.tx_geom, tx_surf, scenario.rx_geom,
                                         rx_surf, scenario.num_paths()),
                       ds);
    out += Eigen::kroneckerProduct(spatial, path_time_matrix(scenario, path, phase)).eval();
  }
  return out;
}

int ScenarioParams::max_tap() const { return static_cast<int>(std::lround(tau_max() * fs)); }

int ScenarioParams::resolved_cp() const { return n_cp >= 0 ? n_cp : max_tap(); }

FimGeometry ScenarioParams::tx_geometry() const {
  const double lambda = wavelength();
  FimGeometry g = FimGeometry::half_wavelength(tx_bx, tx_bz, lambda);
  g.y_min = y_min_wavelengths * lambda;
  g.y_max = y_max_wavelengths * lambda;
  return g;
}

FimGeometry ScenarioParams::rx_geometry() const {
  const double lambda = wavelength();
  FimGeometry g = FimGeometry::half_wavelength(rx_bx, rx_bz, lambda);
  g.y_min = y_min_wavelengths * lambda;
  g.y_max = y_max_wavelengths * lambda;
  return g;
}

void ScenarioParams::validate() const {
  if (!(carrier_hz > 0.0)) throw ConfigError("carrier frequency must be positive");
  if (!(fs > 0.0)) throw ConfigError("sampling rate must be positive");
  if (n < 1) throw ConfigError("block length must be >= 1");
  if (paths < 1) throw ConfigError("path count must be >= 1");
  if (max_range_m < 0.0 || max_velocity_mps < 0.0) {
    throw ConfigError("maximum range and velocity must be non-negative");
  }
  if (noise_var < 0.0) throw ConfigError("noise variance must be >= 0");
  if (resolved_cp() < max_tap()) {
    throw ConfigError("cyclic prefix shorter than the maximum delay tap " +
                      std::to_string(max_tap()));
  }
  if (resolved_cp() >= n) throw ConfigError("cyclic prefix must be shorter than the block length");
  tx_geometry().validate();
  rx_geometry().validate();
}

ChannelScenario random_scenario(const ScenarioParams& params, std::uint64_t seed) {
  params.validate();
  ChannelScenario sc;
  sc.n = params.n;
  sc.fs = params.fs;
  sc.n_cp = params.resolved_cp();
  sc.tx_geom = params.tx_geometry();
  sc.rx_geom = params.rx_geometry();
  sc.noise_var = params.noise_var;
  sc.tau_max = params.tau_max();
  sc.nu_max = params.nu_max();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  sc.paths.reserve(static_cast<std::size_t>(params.paths));
  for (int p = 0; p < params.paths; ++p) {
    PropagationPath path;
    const double re = gauss(rng);
    const double im = gauss(rng);
    path.gain = {re, im};
    path.delay_s = uniform(0.0, sc.tau_max);
    path.doppler_hz = uniform(-sc.nu_max, sc.nu_max);
    path.angles_in = {uniform(-kPi / 2, kPi / 2), uniform(0.0, kPi)};
    path.angles_out = {uniform(-kPi / 2, kPi / 2), uniform(0.0, kPi)};
    sc.paths.push_back(path);
  }
  sc.validate();
  return sc;
}

}  // namespace fimdd
