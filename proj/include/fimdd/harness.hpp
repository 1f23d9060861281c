#pragma once

// Experiment drivers: achievable-rate sweeps and MUSIC sensing runs over
// random Table-II style scenarios, plus CSV/JSON emission.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fimdd/config.hpp"
#include "fimdd/music.hpp"
#include "fimdd/optimizer.hpp"

namespace fimdd {

/// Independent 64-bit stream seed for (base seed, trial, purpose).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t trial, std::uint64_t stream);

struct RateRecord {
  std::string waveform;
  FimMode mode = FimMode::kNone;
  double snr_db = 0.0;
  int trial = 0;
  double rate_bits = 0.0;
};

struct RateSummary {
  std::string waveform;
  FimMode mode = FimMode::kNone;
  double snr_db = 0.0;
  double mean_bits = 0.0;
  double stderr_bits = 0.0;
  int trials = 0;
};

struct OptimizerRun {
  int trial = 0;
  std::string waveform;
  double snr_db = 0.0;
  int iterations = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  double initial_rate = 0.0;
  double final_rate = 0.0;
  bool monotone = true;
  StopReason stop = StopReason::kMaxIterations;
};

struct RateSweepResult {
  std::vector<RateRecord> records;  // ordered by trial, waveform, mode, SNR
  std::vector<OptimizerRun> optimizer_runs;
};

std::vector<RateSummary> summarize(const std::vector<RateRecord>& records);

RateSweepResult run_rate_sweep(const ExperimentConfig& config);

struct ScatterEstimate {
  int trial = 0;
  FimMode mode = FimMode::kNone;
  std::string waveform;
  int scatterer = 0;
  AnglePair truth;
  AnglePair estimate;     // NaN when no peak was assigned
  double azimuth_error_deg = 0.0;
  double elevation_error_deg = 0.0;
  bool within_one_step = false;
};

struct SpectrumCut {
  int scatterer = 0;
  std::string axis;  // "elevation" (fixed azimuth) or "azimuth" (fixed elevation)
  double fixed_angle = 0.0;
  std::vector<double> angles;
  std::vector<double> values;
};

struct MusicRun {
  FimMode mode = FimMode::kNone;
  std::string waveform;
  MusicGrid grid;  // spectrum of trial 0
  std::vector<AnglePair> truth;
  std::vector<SpectrumCut> cuts;
};

struct MusicExperimentResult {
  std::vector<MusicRun> runs;
  std::vector<ScatterEstimate> estimates;  // all trials
};

/// Assigns estimates to truths minimizing the summed angular distance.
/// Missing estimates leave the matching truth unassigned (NaN).
std::vector<AnglePair> match_to_truth(const std::vector<AnglePair>& truth,
                                      const std::vector<AnglePair>& estimates);

MusicExperimentResult run_music_experiment(const ExperimentConfig& config);

struct OptimizeOnceResult {
  ChannelScenario scenario;
  std::vector<std::string> waveforms;
  std::vector<OptimizerResult> results;
  double noise_var = 0.0;
  double psi = 0.0;
};

OptimizeOnceResult run_optimize_once(const ExperimentConfig& config);

// Output writers. Every writer creates `dir` if needed and throws
// std::runtime_error naming the offending path on I/O failure.
void emit_results(const RateSweepResult& result, const ExperimentConfig& config,
                  const std::filesystem::path& dir);
void emit_results(const MusicExperimentResult& result, const ExperimentConfig& config,
                  const std::filesystem::path& dir);
void emit_results(const OptimizeOnceResult& result, const ExperimentConfig& config,
                  const std::filesystem::path& dir);

std::string software_version();

}  // namespace fimdd
