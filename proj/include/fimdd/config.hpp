#pragma once

// Experiment configuration. Files are flat `key = value` text, one entry per
// line, `#` starts a comment, lists are comma separated. Units are part of
// the key names.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fimdd/channel.hpp"
#include "fimdd/optimizer.hpp"
#include "fimdd/waveform.hpp"

namespace fimdd {

enum class FimMode { kNone, kRandom, kOptimized };

std::string fim_mode_name(FimMode mode);
FimMode parse_fim_mode(const std::string& name);

struct ExperimentConfig {
  ScenarioParams scenario;
  double bandwidth_hz = 20e6;

  std::vector<WaveformKind> waveforms{WaveformKind::kOfdm, WaveformKind::kOtfs,
                                      WaveformKind::kAfdm};
  std::optional<double> afdm_c1;  // default: derived from the Doppler bound
  double afdm_c2 = 0.0;
  std::optional<int> otfs_delay_bins;  // K; K' = N / K

  std::vector<double> snr_db{-10, -5, 0, 5, 10, 15, 20};
  std::vector<FimMode> fim_modes{FimMode::kNone, FimMode::kRandom, FimMode::kOptimized};
  int trials = 10;
  std::uint64_t seed = 1;
  int workers = 1;
  bool reuse_shapes = false;

  double beta = 2.0;
  std::optional<double> psi_power;  // absolute threshold; otherwise psi_fraction * flat power
  double psi_fraction = 0.8;
  int max_iterations = 100;
  double armijo_initial_step_wavelengths = 1e-3;
  double armijo_backtrack_factor = 0.5;
  double armijo_sufficient_increase = 1e-4;
  int armijo_max_backtracks = 30;
  double optimizer_snr_db = 10.0;

  double music_grid_step_deg = 1.0;
  std::optional<double> music_snr_db;  // unset: noise-free frames
  int music_frames = 1;

  std::filesystem::path output_dir = "results";

  void validate() const;

  // Waveform spec for a scenario honouring the overrides above.
  WaveformSpec waveform_for(WaveformKind kind, const ChannelScenario& scenario) const;
  OptimizerConfig optimizer_config(double noise_var, double psi) const;

  nlohmann::json to_json() const;
};

/// Applies `key = value` pairs on top of the defaults; unknown keys throw.
ExperimentConfig config_from_pairs(const std::map<std::string, std::string>& pairs);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Noise variance for a per-receive-sample SNR: the expected channel power
/// E||H||_F^2 = N d_s^2 spreads E_S d_s over each received sample.
double noise_var_for_snr(double snr_db, int streams, double symbol_energy = 1.0);

}  // namespace fimdd
