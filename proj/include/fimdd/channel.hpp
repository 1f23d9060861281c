#pragma once

// Sampled doubly-dispersive MIMO channel between two metasurface arrays.
//
// Each path p contributes a spatial outer product H_p (receive steering times
// adjoint transmit steering) and an N x N time-domain operator
//   G_p = Theta_p * Omega^{f_p} * Pi^{l_p}
// (cyclic-prefix phase, Doppler ramp, cyclic delay). The stacked channel over
// d_s streams is sum_p kron(H_p, G_p).

#include <cstdint>
#include <functional>
#include <vector>

#include "fimdd/geometry.hpp"
#include "fimdd/types.hpp"

namespace fimdd {

struct PropagationPath {
  cplx gain{1.0, 0.0};   // h_p
  double delay_s = 0.0;  // tau_p
  double doppler_hz = 0.0;
  PathAngles angles_in;   // AoA at the receiver
  PathAngles angles_out;  // AoD at the transmitter
};

struct ChannelScenario {
  std::vector<PropagationPath> paths;
  int n = 16;            // block length in samples
  double fs = 20e6;      // sampling rate [Hz]
  int n_cp = 8;          // cyclic prefix length [samples]
  FimGeometry tx_geom;
  FimGeometry rx_geom;
  double noise_var = 1.0;
  double tau_max = 0.0;  // generation bounds; nu_max also drives the AFDM chirp rate
  double nu_max = 0.0;

  int num_paths() const { return static_cast<int>(paths.size()); }
  int streams() const;
  int tap(const PropagationPath& path) const;
  double normalized_doppler(const PropagationPath& path) const;

  void validate() const;
};

// Cyclic-prefix phase function phi_CP(sample index).
using PhaseFn = std::function<double(int)>;

PhaseFn zero_cp_phase();
// Chirp-periodic prefix phase c1 (N^2 - 2 N n).
PhaseFn afdm_cp_phase(double c1, int n);

/// Spatial matrix sqrt(N_T N_R / P) h_p b_R b_T^H, shape N_R x N_T.
CMatrix path_outer_matrix(const PropagationPath& path, const FimGeometry& tx_geom,
                          const FimSurface& tx_surf, const FimGeometry& rx_geom,
                          const FimSurface& rx_surf, int num_paths);

/// Applies the identity-column beamformers U = I[:, :d_s], V = I[:, :d_s].
CMatrix select_streams(const CMatrix& spatial, int streams);

/// Pi^ell with Pi[i, j] = 1 iff i == j + 1 (mod n).
RMatrix cyclic_shift_matrix(int n, int ell);

/// diag(exp(-j 2 pi f k / n)), fractional f allowed.
CMatrix doppler_matrix(int n, double f);

/// diag(exp(-j 2 pi phi(ell)), ..., exp(-j 2 pi phi(1)), 1, ..., 1).
CMatrix cp_phase_matrix(int n, int ell, const PhaseFn& phase);

/// G_p = Theta_p Omega^{f_p} Pi^{l_p}.
CMatrix path_time_matrix(const ChannelScenario& scenario, const PropagationPath& path,
                         const PhaseFn& phase);

/// Stacked time-domain channel sum_p kron(H_p, G_p), size (N d_s) x (N d_s).
CMatrix assemble_effective_td(const ChannelScenario& scenario, const FimSurface& tx_surf,
                              const FimSurface& rx_surf, const PhaseFn& phase);

// Scenario generation parameters.
struct ScenarioParams {
  double carrier_hz = 28e9;
  double fs = 20e6;
  int n = 16;
  int n_cp = -1;  // -1: derived as round(tau_max * fs)
  int tx_bx = 2, tx_bz = 2;
  int rx_bx = 2, rx_bz = 2;
  int paths = 2;
  double max_range_m = 120.0;
  double max_velocity_mps = 208.0;
  double y_min_wavelengths = -1.0;
  double y_max_wavelengths = 1.0;
  double noise_var = 1.0;

  double wavelength() const { return kSpeedOfLight / carrier_hz; }
  double tau_max() const { return max_range_m / kSpeedOfLight; }
  double nu_max() const { return max_velocity_mps * carrier_hz / kSpeedOfLight; }
  int max_tap() const;
  int resolved_cp() const;
  FimGeometry tx_geometry() const;
  FimGeometry rx_geometry() const;

  void validate() const;
};

/// Draws P paths: CN(0,1) gains, uniform delays in [0, tau_max], uniform
/// Dopplers in [-nu_max, nu_max], uniform angles. Deterministic per seed.
ChannelScenario random_scenario(const ScenarioParams& params, std::uint64_t seed);

}  // namespace fimdd
