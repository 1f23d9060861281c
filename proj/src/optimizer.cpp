#include "fimdd/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

namespace fimdd {

namespace {

constexpr double kLn2 = std::numbers::ln2;

void check_square(const CMatrix& m, const char* what) {
  if (m.rows() != m.cols()) throw DimensionError(std::string(what) + ": matrix must be square");
}

Eigen::LLT<CMatrix> factor_identity_plus(const CMatrix& q) {
  CMatrix m = q;
  m.diagonal().array() += 1.0;
  Eigen::LLT<CMatrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError("Cholesky of I + Q failed");
  return llt;
}

// sum_ij a(i, j) b(j, i)
cplx trace_of_product(const Eigen::Ref<const CMatrix>& a, const Eigen::Ref<const CMatrix>& b) {
  return (a.transpose().cwiseProduct(b)).sum();
}

bool within_bounds(const FimGeometry& g, const FimSurface& s) {
  return (s.y.array() >= g.y_min).all() && (s.y.array() <= g.y_max).all();
}

// Path-summed spatial derivative, already reduced to the stream selectors.
CMatrix kron_sum(const std::vector<CMatrix>& spatial, const std::vector<CMatrix>& g_bar) {
  const Eigen::Index rows = spatial.front().rows() * g_bar.front().rows();
  CMatrix out = CMatrix::Zero(rows, rows);
  for (std::size_t p = 0; p < spatial.size(); ++p) {
    out += Eigen::kroneckerProduct(spatial[p], g_bar[p]).eval();
  }
  return out;
}

double path_scale(const ChannelScenario& sc) {
  return std::sqrt(static_cast<double>(sc.tx_geom.elements()) * sc.rx_geom.elements() /
                   sc.num_paths());
}

}  // namespace

void OptimizerConfig::validate() const {
  if (beta < 0.0) throw ConfigError("optimizer: beta must be >= 0");
  if (psi < 0.0) throw ConfigError("optimizer: psi must be >= 0");
  if (max_iters < 1) throw ConfigError("optimizer: max_iters must be >= 1");
  if (!(armijo.initial_step > 0.0)) throw ConfigError("optimizer: initial step must be positive");
  if (!(armijo.backtrack > 0.0 && armijo.backtrack < 1.0)) {
    throw ConfigError("optimizer: backtracking factor must lie in (0, 1)");
  }
  if (!(armijo.sufficient_increase > 0.0 && armijo.sufficient_increase < 1.0)) {
    throw ConfigError("optimizer: sufficient-increase constant must lie in (0, 1)");
  }
  if (armijo.max_backtracks < 0) throw ConfigError("optimizer: max_backtracks must be >= 0");
  if (!(noise_var > 0.0)) throw ConfigError("optimizer: noise variance must be positive");
  if (p_t && *p_t < 0.0) throw ConfigError("optimizer: power budget must be >= 0");
}

OptimizerConfig OptimizerConfig::defaults(double lambda, double noise_var) {
  OptimizerConfig cfg;
  cfg.armijo.initial_step = 1e-3 * lambda;
  cfg.noise_var = noise_var;
  return cfg;
}

double achievable_rate(const CMatrix& h_bar, double noise_var) {
  check_square(h_bar, "achievable_rate");
  if (!(noise_var > 0.0)) throw ConfigError("achievable_rate: noise variance must be positive");
  const CMatrix q = (h_bar * h_bar.adjoint()) / noise_var;
  const auto llt = factor_identity_plus(q);
  const auto diag = llt.matrixLLT().diagonal();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < diag.size(); ++i) log_det += 2.0 * std::log(diag[i].real());
  return log_det / kLn2;
}

double sensing_slack(const CMatrix& h_bar, double psi) {
  return std::min(h_bar.squaredNorm() - psi, 0.0);
}

double objective_value(const CMatrix& h_bar, double beta, double psi, double noise_var) {
  return achievable_rate(h_bar, noise_var) + beta * sensing_slack(h_bar, psi);
}

CMatrix grad_h_bar_tx(const ChannelScenario& scenario, const FimSurface& tx_surf,
                      const FimSurface& rx_surf, const WaveformSpec& spec, int n_t) {
  if (n_t < 0 || n_t >= scenario.tx_geom.elements()) {
    throw RangeError("grad_h_bar_tx: element index " + std::to_string(n_t) + " out of range");
  }
  const auto g_bar = waveform_path_matrices(spec, scenario);
  const double scale = path_scale(scenario);
  std::vector<CMatrix> spatial;
  for (const auto& path : scenario.paths) {
    const CVector b_rx = steering_vector(scenario.rx_geom, rx_surf, path.angles_in);
    const CVector db_tx = steering_derivative(scenario.tx_geom, tx_surf, path.angles_out, n_t);
    spatial.push_back(select_streams((scale * path.gain) * b_rx * db_tx.adjoint(),
                                     scenario.streams()));
  }
  return kron_sum(spatial, g_bar);
}

CMatrix grad_h_bar_rx(const ChannelScenario& scenario, const FimSurface& tx_surf,
                      const FimSurface& rx_surf, const WaveformSpec& spec, int n_r) {
  if (n_r < 0 || n_r >= scenario.rx_geom.elements()) {
    throw RangeError("grad_h_bar_rx: element index " + std::to_string(n_r) + " out of range");
  }
  const auto g_bar = waveform_path_matrices(spec, scenario);
  const double scale = path_scale(scenario);
  std::vector<CMatrix> spatial;
  for (const auto& path : scenario.paths) {
    const CVector db_rx = steering_derivative(scenario.rx_geom, rx_surf, path.angles_in, n_r);
    const CVector b_tx = steering_vector(scenario.tx_geom, tx_surf, path.angles_out);
    spatial.push_back(select_streams((scale * path.gain) * db_rx * b_tx.adjoint(),
                                     scenario.streams()));
  }
  return kron_sum(spatial, g_bar);
}

CMatrix grad_q(const CMatrix& h_bar, const CMatrix& dh, double noise_var) {
  if (h_bar.rows() != dh.rows() || h_bar.cols() != dh.cols()) {
    throw DimensionError("grad_q: H and dH must have the same shape");
  }
  if (!(noise_var > 0.0)) throw ConfigError("grad_q: noise variance must be positive");
  const CMatrix a = dh * h_bar.adjoint();
  return (a + a.adjoint()) / noise_var;
}

double grad_objective_element(const CMatrix& h_bar, const CMatrix& q, const CMatrix& dh,
                              double beta, double psi, double noise_var) {
  check_square(q, "grad_objective_element");
  if (q.rows() != h_bar.rows()) throw DimensionError("grad_objective_element: Q/H mismatch");
  const CMatrix dq = grad_q(h_bar, dh, noise_var);
  const auto llt = factor_identity_plus(q);
  const CMatrix solved = llt.solve(dq);
  double out = solved.trace().real() / kLn2;
  if (beta != 0.0 && sensing_slack(h_bar, psi) < 0.0) {
    const CMatrix a = dh * h_bar.adjoint();
    out += beta * (a + a.adjoint()).trace().real();
  }
  return out;
}

SurfaceObjective::SurfaceObjective(const ChannelScenario& scenario, const WaveformSpec& spec,
                                   double beta, double psi, double noise_var)
    : scenario_(scenario),
      g_bar_(waveform_path_matrices(spec, scenario)),
      beta_(beta),
      psi_(psi),
      noise_var_(noise_var) {
  if (!(noise_var > 0.0)) throw ConfigError("SurfaceObjective: noise variance must be positive");
}

std::vector<CMatrix> SurfaceObjective::spatial_matrices(const FimSurface& tx,
                                                        const FimSurface& rx) const {
  std::vector<CMatrix> out;
  out.reserve(scenario_.paths.size());
  for (const auto& path : scenario_.paths) {
    out.push_back(select_streams(path_outer_matrix(path, scenario_.tx_geom, tx, scenario_.rx_geom,
                                                   rx, scenario_.num_paths()),
                                 scenario_.streams()));
  }
  return out;
}

CMatrix SurfaceObjective::channel(const FimSurface& tx, const FimSurface& rx) const {
  return kron_sum(spatial_matrices(tx, rx), g_bar_);
}

ObjectiveSample SurfaceObjective::evaluate(const FimSurface& tx, const FimSurface& rx) const {
  const CMatrix h = channel(tx, rx);
  ObjectiveSample s;
  s.rate = achievable_rate(h, noise_var_);
  s.slack = sensing_slack(h, psi_);
  s.objective = s.rate + beta_ * s.slack;
  return s;
}

// Structured evaluation of grad_objective_element for every coordinate:
// df/dy = Re tr(K dH) with K = 2/(sigma^2 ln2) H^H (I+Q)^{-1} + 2 beta 1[g_c<0] H^H,
// and tr(K kron(dS, G)) = tr(dS T) where T[u, v] = tr(K_{u,v} G).
SurfaceObjective::Gradient SurfaceObjective::gradient(const FimSurface& tx,
                                                      const FimSurface& rx) const {
  const int ds = scenario_.streams();
  const int n = scenario_.n;
  const CMatrix h = channel(tx, rx);
  const CMatrix q = (h * h.adjoint()) / noise_var_;
  const auto llt = factor_identity_plus(q);
  // H^H (I+Q)^{-1} = ((I+Q)^{-1} H)^H
  CMatrix k = llt.solve(h).adjoint() * (2.0 / (noise_var_ * kLn2));
  if (beta_ != 0.0 && sensing_slack(h, psi_) < 0.0) k += (2.0 * beta_) * h.adjoint();

  std::vector<CMatrix> block_traces;
  block_traces.reserve(g_bar_.size());
  for (const auto& g : g_bar_) {
    CMatrix t(ds, ds);
    for (int u = 0; u < ds; ++u) {
      for (int v = 0; v < ds; ++v) t(u, v) = trace_of_product(k.block(u * n, v * n, n, n), g);
    }
    block_traces.push_back(std::move(t));
  }

  const double scale = path_scale(scenario_);
  Gradient grad{RVector::Zero(scenario_.tx_geom.elements()),
                RVector::Zero(scenario_.rx_geom.elements())};
  for (std::size_t p = 0; p < scenario_.paths.size(); ++p) {
    const auto& path = scenario_.paths[p];
    const CVector b_tx = steering_vector(scenario_.tx_geom, tx, path.angles_out);
    const CVector b_rx = steering_vector(scenario_.rx_geom, rx, path.angles_in);
    const cplx gain = scale * path.gain;
    const double k_tx = scenario_.tx_geom.wavenumber() * std::sin(path.angles_out.azimuth) *
                        std::sin(path.angles_out.elevation);
    const double k_rx = scenario_.rx_geom.wavenumber() * std::sin(path.angles_in.azimuth) *
                        std::sin(path.angles_in.elevation);
    const CMatrix& t = block_traces[p];
    // dS = gain b_R (j k_tx b_T[n] e_n)^H restricted to the selected streams:
    // tr(dS T) = gain conj(j k_tx b_T[n]) sum_v b_R[v] T[n, v].
    for (int nt = 0; nt < ds; ++nt) {
      const cplx db = std::conj(kJ * k_tx * b_tx[nt]);
      const cplx acc = (t.row(nt).transpose().cwiseProduct(b_rx.head(ds))).sum();
      grad.tx[nt] += (gain * db * acc).real();
    }
    // dS = gain (j k_rx b_R[n] e_n) b_T^H: tr(dS T) = gain j k_rx b_R[n] sum_u conj(b_T[u]) T[u, n].
    for (int nr = 0; nr < ds; ++nr) {
      const cplx db = kJ * k_rx * b_rx[nr];
      const cplx acc = (t.col(nr).cwiseProduct(b_tx.head(ds).conjugate())).sum();
      grad.rx[nr] += (gain * db * acc).real();
    }
  }
  return grad;
}

double default_psi(const ChannelScenario& scenario, const WaveformSpec& spec, double fraction) {
  const CMatrix h0 = effective_channel(spec, scenario, FimSurface::flat(scenario.tx_geom),
                                       FimSurface::flat(scenario.rx_geom));
  return fraction * h0.squaredNorm();
}

OptimizerResult optimize(const ChannelScenario& scenario, const WaveformSpec& spec,
                         const OptimizerConfig& config, const FimSurface& init_tx,
                         const FimSurface& init_rx) {
  config.validate();
  check_surface(scenario.tx_geom, init_tx);
  check_surface(scenario.rx_geom, init_rx);
  if (!within_bounds(scenario.tx_geom, init_tx) || !within_bounds(scenario.rx_geom, init_rx)) {
    throw ConfigError("optimize: initial surfaces violate the morphing bounds");
  }
  const double streams_power = static_cast<double>(scenario.n) * scenario.streams();
  if (config.p_t && streams_power > *config.p_t) {
    throw ConfigError("optimize: identity covariance exceeds the transmit power budget");
  }

  const SurfaceObjective objective(scenario, spec, config.beta, config.psi, config.noise_var);
  const int nt = scenario.tx_geom.elements();
  const int nr = scenario.rx_geom.elements();

  OptimizerResult result;
  result.tx_surface = init_tx;
  result.rx_surface = init_rx;
  ObjectiveSample current = objective.evaluate(init_tx, init_rx);
  result.objective_trace.push_back(current.objective);
  result.rate_trace.push_back(current.rate);
  result.slack_trace.push_back(current.slack);

  for (int iter = 0; iter < config.max_iters; ++iter) {
    const auto grad = objective.gradient(result.tx_surface, result.rx_surface);
    RVector direction(nt + nr);
    direction << grad.tx, grad.rx;

    double mu = config.armijo.initial_step;
    bool accepted = false;
    bool small_step = false;
    FimSurface next_tx;
    FimSurface next_rx;
    ObjectiveSample trial;
    for (int bt = 0; bt <= config.armijo.max_backtracks; ++bt, mu *= config.armijo.backtrack) {
      next_tx = project_surface(scenario.tx_geom,
                                FimSurface{result.tx_surface.y + mu * direction.head(nt)});
      next_rx = project_surface(scenario.rx_geom,
                                FimSurface{result.rx_surface.y + mu * direction.tail(nr)});
      RVector step(nt + nr);
      step << next_tx.y - result.tx_surface.y, next_rx.y - result.rx_surface.y;
      if (step.norm() < config.min_step_norm) {
        small_step = true;
        break;
      }
      trial = objective.evaluate(next_tx, next_rx);
      if (trial.objective >=
          current.objective + config.armijo.sufficient_increase * direction.dot(step)) {
        accepted = true;
        break;
      }
    }
    if (small_step) {
      result.stop = StopReason::kSmallStep;
      return result;
    }
    if (!accepted) {
      result.stop = StopReason::kLineSearchFailed;
      return result;
    }
    result.tx_surface = std::move(next_tx);
    result.rx_surface = std::move(next_rx);
    current = trial;
    result.objective_trace.push_back(current.objective);
    result.rate_trace.push_back(current.rate);
    result.slack_trace.push_back(current.slack);
    ++result.iterations_run;
  }
  result.stop = StopReason::kMaxIterations;
  return result;
}

}  // namespace fimdd
