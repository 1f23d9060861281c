#include "fimdd/waveform.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>

namespace fimdd {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

CVector chirp_diagonal(int n, double c) {
  CVector d(n);
  for (int k = 0; k < n; ++k) {
    const double kk = static_cast<double>(k);
    d[k] = std::polar(1.0, -kTwoPi * c * kk * kk);
  }
  return d;
}

void check_length(const WaveformSpec& spec, Eigen::Index len, const char* what) {
  if (len != block_length(spec)) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(block_length(spec)) +
                         " samples, got " + std::to_string(len));
  }
}

}  // namespace

int block_length(const WaveformSpec& spec) {
  return std::visit(Overloaded{[](const Ofdm& s) { return s.n; },
                               [](const Otfs& s) { return s.k * s.k_prime; },
                               [](const Afdm& s) { return s.n; }},
                    spec);
}

std::string waveform_name(const WaveformSpec& spec) {
  switch (waveform_kind(spec)) {
    case WaveformKind::kOfdm: return "OFDM";
    case WaveformKind::kOtfs: return "OTFS";
    case WaveformKind::kAfdm: return "AFDM";
  }
  return "?";
}

WaveformKind waveform_kind(const WaveformSpec& spec) {
  return std::visit(Overloaded{[](const Ofdm&) { return WaveformKind::kOfdm; },
                               [](const Otfs&) { return WaveformKind::kOtfs; },
                               [](const Afdm&) { return WaveformKind::kAfdm; }},
                    spec);
}

void validate(const WaveformSpec& spec) {
  std::visit(Overloaded{[](const Ofdm& s) {
                          if (s.n < 1) throw ConfigError("OFDM: N must be >= 1");
                        },
                        [](const Otfs& s) {
                          if (s.k < 1 || s.k_prime < 1) throw ConfigError("OTFS: K, K' must be >= 1");
                        },
                        [](const Afdm& s) {
                          if (s.n < 1) throw ConfigError("AFDM: N must be >= 1");
                          if (s.c1 < 0.0) throw ConfigError("AFDM: c1 must be >= 0");
                        }},
             spec);
}

WaveformKind parse_waveform_kind(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ofdm") return WaveformKind::kOfdm;
  if (lower == "otfs") return WaveformKind::kOtfs;
  if (lower == "afdm") return WaveformKind::kAfdm;
  throw ConfigError("unknown waveform '" + name + "'");
}

WaveformSpec make_waveform(WaveformKind kind, const ChannelScenario& scenario) {
  const int n = scenario.n;
  switch (kind) {
    case WaveformKind::kOfdm: return Ofdm{n};
    case WaveformKind::kOtfs: {
      const int root = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
      if (root * root != n) {
        throw ConfigError("OTFS: N=" + std::to_string(n) +
                          " is not a perfect square; supply the grid shape explicitly");
      }
      return Otfs{root, root};
    }
    case WaveformKind::kAfdm: return Afdm{n, afdm_c1(scenario), 0.0};
  }
  throw ConfigError("unknown waveform kind");
}

CMatrix dft_matrix(int n) {
  CMatrix f(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      // Reduce the exponent first so large N keeps full phase accuracy.
      const long long idx = (static_cast<long long>(r) * c) % n;
      f(r, c) = scale * std::polar(1.0, -kTwoPi * static_cast<double>(idx) / n);
    }
  }
  return f;
}

CMatrix domain_transform(const WaveformSpec& spec) {
  validate(spec);
  return std::visit(
      Overloaded{[](const Ofdm& s) -> CMatrix { return dft_matrix(s.n); },
                 [](const Otfs& s) -> CMatrix {
                   return Eigen::kroneckerProduct(dft_matrix(s.k_prime), CMatrix::Identity(s.k, s.k))
                       .eval();
                 },
                 [](const Afdm& s) -> CMatrix {
                   return chirp_diagonal(s.n, s.c2).asDiagonal() * dft_matrix(s.n) *
                          chirp_diagonal(s.n, s.c1).asDiagonal();
                 }},
      spec);
}

CVector modulate(const WaveformSpec& spec, const CVector& symbols) {
  check_length(spec, symbols.size(), "modulate");
  return domain_transform(spec).adjoint() * symbols;
}

CVector demodulate(const WaveformSpec& spec, const CVector& received) {
  check_length(spec, received.size(), "demodulate");
  return domain_transform(spec) * received;
}

PhaseFn cp_phase_for(const WaveformSpec& spec) {
  if (const auto* afdm = std::get_if<Afdm>(&spec)) return afdm_cp_phase(afdm->c1, afdm->n);
  return zero_cp_phase();
}

std::vector<CMatrix> waveform_path_matrices(const WaveformSpec& spec,
                                            const ChannelScenario& scenario) {
  if (block_length(spec) != scenario.n) {
    throw DimensionError("waveform block length " + std::to_string(block_length(spec)) +
                         " does not match scenario N=" + std::to_string(scenario.n));
  }
  const CMatrix w = domain_transform(spec);
  const PhaseFn phase = cp_phase_for(spec);
  std::vector<CMatrix> out;
  out.reserve(scenario.paths.size());
  for (const auto& path : scenario.paths) {
    out.push_back(w * path_time_matrix(scenario, path, phase) * w.adjoint());
  }
  return out;
}

CMatrix effective_channel(const WaveformSpec& spec, const ChannelScenario& scenario,
                          const FimSurface& tx_surf, const FimSurface& rx_surf) {
  check_surface(scenario.tx_geom, tx_surf);
  check_surface(scenario.rx_geom, rx_surf);
  const auto g_bar = waveform_path_matrices(spec, scenario);
  const int ds = scenario.streams();
  const int n = scenario.n;
  CMatrix out = CMatrix::Zero(n * ds, n * ds);
  for (std::size_t p = 0; p < scenario.paths.size(); ++p) {
    const CMatrix spatial =
        select_streams(path_outer_matrix(scenario.paths[p], scenario.tx_geom, tx_surf,
                                         scenario.rx_geom, rx_surf, scenario.num_paths()),
                       ds);
    out += Eigen::kroneckerProduct(spatial, g_bar[p]).eval();
  }
  return out;
}

double afdm_c1(const ChannelScenario& scenario) {
  const double n = static_cast<double>(scenario.n);
  const double f_max = n * scenario.nu_max / scenario.fs;
  return (2.0 * std::ceil(f_max) + 1.0) / (2.0 * n);
}

SymbolFrame random_qpsk_frame(int n, int streams, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> bit(0, 1);
  const double a = 1.0 / std::sqrt(2.0);
  SymbolFrame frame;
  frame.x.resize(static_cast<Eigen::Index>(n) * streams);
  for (Eigen::Index i = 0; i < frame.x.size(); ++i) {
    const double re = bit(rng) ? a : -a;
    const double im = bit(rng) ? a : -a;
    frame.x[i] = {re, im};
  }
  return frame;
}

CVector transmit_receive(const CMatrix& effective, double noise_var, const SymbolFrame& frame,
                         std::uint64_t seed) {
  if (effective.cols() != frame.x.size()) {
    throw DimensionError("transmit_receive: frame length " + std::to_string(frame.x.size()) +
                         " does not match channel width " + std::to_string(effective.cols()));
  }
  if (noise_var < 0.0) throw ConfigError("transmit_receive: noise variance must be >= 0");
  CVector out = effective * frame.x;
  if (noise_var > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(noise_var / 2.0));
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      out[i] += cplx(re, im);
    }
  }
  return out;
}

CVector transmit_receive(const WaveformSpec& spec, const ChannelScenario& scenario,
                         const FimSurface& tx_surf, const FimSurface& rx_surf,
                         const SymbolFrame& frame, std::uint64_t seed) {
  return transmit_receive(effective_channel(spec, scenario, tx_surf, rx_surf), scenario.noise_var,
                          frame, seed);
}

}  // namespace fimdd
