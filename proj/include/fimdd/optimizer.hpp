#pragma once

// Surface-shape optimization for the penalized objective
//
//   f(y_T, y_R) = log2 det(I + H H^H / sigma^2) + beta * min{tr(H H^H) - psi, 0}
//
// with H the waveform-domain effective channel and identity transmit
// covariance. Gradients are closed-form per surface element; the ascent is a
// projected gradient method with Armijo backtracking.

#include <optional>
#include <vector>

#include "fimdd/channel.hpp"
#include "fimdd/geometry.hpp"
#include "fimdd/waveform.hpp"

namespace fimdd {

struct ArmijoParams {
  double initial_step = 0.0;   // mu_0 [m^2 per unit objective]
  double backtrack = 0.5;
  double sufficient_increase = 1e-4;
  int max_backtracks = 30;
};

struct OptimizerConfig {
  double beta = 2.0;
  double psi = 0.0;
  std::optional<double> p_t;  // only checked against tr(I) = N d_s
  int max_iters = 100;
  ArmijoParams armijo;
  double noise_var = 1.0;
  double min_step_norm = 1e-10;

  void validate() const;
  // mu_0 = 1e-3 lambda, the remaining Armijo constants at their defaults.
  static OptimizerConfig defaults(double lambda, double noise_var);
};

enum class StopReason { kMaxIterations, kSmallStep, kLineSearchFailed };

struct OptimizerResult {
  FimSurface tx_surface;
  FimSurface rx_surface;
  std::vector<double> objective_trace;  // entry 0 is the initial point
  std::vector<double> rate_trace;
  std::vector<double> slack_trace;
  int iterations_run = 0;
  StopReason stop = StopReason::kMaxIterations;
};

/// log2 det(I + H H^H / noise_var) via a Cholesky factorization.
double achievable_rate(const CMatrix& h_bar, double noise_var);

/// min{tr(H H^H) - psi, 0}.
double sensing_slack(const CMatrix& h_bar, double psi);

double objective_value(const CMatrix& h_bar, double beta, double psi, double noise_var);

/// dH/dy_T[n_t] = sum_p kron(h~_p b_R db_T^H, G_p) in the waveform domain.
CMatrix grad_h_bar_tx(const ChannelScenario& scenario, const FimSurface& tx_surf,
                      const FimSurface& rx_surf, const WaveformSpec& spec, int n_t);

/// dH/dy_R[n_r] = sum_p kron(h~_p db_R b_T^H, G_p) in the waveform domain.
CMatrix grad_h_bar_rx(const ChannelScenario& scenario, const FimSurface& tx_surf,
                      const FimSurface& rx_surf, const WaveformSpec& spec, int n_r);

/// (dH H^H + H dH^H) / noise_var.
CMatrix grad_q(const CMatrix& h_bar, const CMatrix& dh, double noise_var);

/// Scalar derivative of f along one surface coordinate given dH. The penalty
/// term only contributes while the sensing constraint is violated.
double grad_objective_element(const CMatrix& h_bar, const CMatrix& q, const CMatrix& dh,
                              double beta, double psi, double noise_var);

struct ObjectiveSample {
  double objective = 0.0;
  double rate = 0.0;
  double slack = 0.0;
};

// Caches the waveform-domain path matrices so the objective and its gradient
// can be evaluated repeatedly for different surfaces.
class SurfaceObjective {
 public:
  SurfaceObjective(const ChannelScenario& scenario, const WaveformSpec& spec, double beta,
                   double psi, double noise_var);

  CMatrix channel(const FimSurface& tx, const FimSurface& rx) const;
  ObjectiveSample evaluate(const FimSurface& tx, const FimSurface& rx) const;

  struct Gradient {
    RVector tx;
    RVector rx;
  };
  Gradient gradient(const FimSurface& tx, const FimSurface& rx) const;

  const ChannelScenario& scenario() const { return scenario_; }

 private:
  std::vector<CMatrix> spatial_matrices(const FimSurface& tx, const FimSurface& rx) const;

  ChannelScenario scenario_;
  std::vector<CMatrix> g_bar_;
  double beta_;
  double psi_;
  double noise_var_;
};

/// psi = fraction * tr(H0 H0^H) with H0 the flat-surface (y = 0) channel.
double default_psi(const ChannelScenario& scenario, const WaveformSpec& spec,
                   double fraction = 0.8);

OptimizerResult optimize(const ChannelScenario& scenario, const WaveformSpec& spec,
                         const OptimizerConfig& config, const FimSurface& init_tx,
                         const FimSurface& init_rx);

}  // namespace fimdd
