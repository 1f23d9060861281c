#pragma once

// OFDM, OTFS and AFDM as unitary domain transforms W acting on one stream of
// N samples. Modulation is W^H x and demodulation W r; the effective channel
// seen in the waveform domain is sum_p kron(H_p, W G_p W^H).

#include <cstdint>
#include <string>
#include <variant>

#include "fimdd/channel.hpp"
#include "fimdd/types.hpp"

namespace fimdd {

struct Ofdm {
  int n = 16;
};

// Delay-Doppler grid of k x k_prime symbols, column-stacked.
struct Otfs {
  int k = 4;
  int k_prime = 4;
};

struct Afdm {
  int n = 16;
  double c1 = 0.0;
  double c2 = 0.0;
};

using WaveformSpec = std::variant<Ofdm, Otfs, Afdm>;

enum class WaveformKind { kOfdm, kOtfs, kAfdm };

int block_length(const WaveformSpec& spec);
std::string waveform_name(const WaveformSpec& spec);
WaveformKind waveform_kind(const WaveformSpec& spec);
void validate(const WaveformSpec& spec);

/// Builds the default spec of a given kind for a scenario: OTFS uses a
/// sqrt(N) x sqrt(N) grid, AFDM uses afdm_c1(scenario) and c2 = 0.
WaveformSpec make_waveform(WaveformKind kind, const ChannelScenario& scenario);
WaveformKind parse_waveform_kind(const std::string& name);

/// Normalized N-point DFT matrix.
CMatrix dft_matrix(int n);

CMatrix domain_transform(const WaveformSpec& spec);

CVector modulate(const WaveformSpec& spec, const CVector& symbols);
CVector demodulate(const WaveformSpec& spec, const CVector& received);

/// Cyclic-prefix phase used by the waveform: zero for OFDM/OTFS, the
/// chirp-periodic prefix phase for AFDM.
PhaseFn cp_phase_for(const WaveformSpec& spec);

/// Per-path waveform-domain matrices W G_p W^H, in path order.
std::vector<CMatrix> waveform_path_matrices(const WaveformSpec& spec,
                                            const ChannelScenario& scenario);

CMatrix effective_channel(const WaveformSpec& spec, const ChannelScenario& scenario,
                          const FimSurface& tx_surf, const FimSurface& rx_surf);

/// AFDM first chirp rate (2 ceil(f_max) + 1) / (2N), f_max = N nu_max / F_s.
double afdm_c1(const ChannelScenario& scenario);

struct SymbolFrame {
  CVector x;                 // N d_s stacked stream symbols
  int order = 4;             // constellation size D
  double symbol_energy = 1;  // E_S
};

/// Unit-energy QPSK frame of n * streams symbols.
SymbolFrame random_qpsk_frame(int n, int streams, std::uint64_t seed);

/// H_X x + w with w ~ CN(0, noise_var I); deterministic per seed.
CVector transmit_receive(const WaveformSpec& spec, const ChannelScenario& scenario,
                         const FimSurface& tx_surf, const FimSurface& rx_surf,
                         const SymbolFrame& frame, std::uint64_t seed);

// Same as above but with a precomputed effective channel.
CVector transmit_receive(const CMatrix& effective, double noise_var, const SymbolFrame& frame,
                         std::uint64_t seed);

}  // namespace fimdd
