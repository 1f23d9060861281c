#include "fimdd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#ifndef FIMDD_VERSION
#define FIMDD_VERSION "0.0.0"
#endif

namespace fimdd {

namespace {

constexpr double kRadToDeg = 180.0 / kPi;

// Seed streams within one trial.
enum SeedStream : std::uint64_t {
  kScenarioStream = 0,
  kRandomTxStream = 1,
  kRandomRxStream = 2,
  kSymbolStream = 16,
  kNoiseStream = 1024,
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Runs body(i) for i in [0, count) on up to `workers` threads. Each index is
// written to its own slot by the caller, so the outcome is order-independent.
template <class Body>
void parallel_for(int count, int workers, Body&& body) {
  const int threads = std::max(1, std::min(workers, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct TrialSetup {
  ChannelScenario scenario;
  FimSurface random_tx;
  FimSurface random_rx;
};

TrialSetup make_trial(const ExperimentConfig& config, int trial) {
  TrialSetup s;
  s.scenario = random_scenario(config.scenario, derive_seed(config.seed, trial, kScenarioStream));
  s.random_tx = random_surface(s.scenario.tx_geom, derive_seed(config.seed, trial, kRandomTxStream));
  s.random_rx = random_surface(s.scenario.rx_geom, derive_seed(config.seed, trial, kRandomRxStream));
  return s;
}

double resolve_psi(const ExperimentConfig& config, const ChannelScenario& scenario,
                   const WaveformSpec& spec) {
  if (config.psi_power) return *config.psi_power;
  return default_psi(scenario, spec, config.psi_fraction);
}

bool is_monotone(const std::vector<double>& trace) {
  return std::adjacent_find(trace.begin(), trace.end(),
                            [](double a, double b) { return b < a; }) == trace.end();
}

OptimizerRun describe_run(int trial, const std::string& waveform, double snr_db,
                          const OptimizerResult& r) {
  OptimizerRun run;
  run.trial = trial;
  run.waveform = waveform;
  run.snr_db = snr_db;
  run.iterations = r.iterations_run;
  run.initial_objective = r.objective_trace.front();
  run.final_objective = r.objective_trace.back();
  run.initial_rate = r.rate_trace.front();
  run.final_rate = r.rate_trace.back();
  run.monotone = is_monotone(r.objective_trace);
  run.stop = r.stop;
  return run;
}

struct SharedShapes {
  FimSurface random_tx, random_rx, opt_tx, opt_rx;
};

SharedShapes optimize_shared(const ExperimentConfig& config) {
  const TrialSetup setup = make_trial(config, 0);
  const WaveformSpec spec = config.waveform_for(config.waveforms.front(), setup.scenario);
  const double noise_var = noise_var_for_snr(config.optimizer_snr_db, setup.scenario.streams());
  const auto result =
      optimize(setup.scenario, spec,
               config.optimizer_config(noise_var, resolve_psi(config, setup.scenario, spec)),
               setup.random_tx, setup.random_rx);
  return {setup.random_tx, setup.random_rx, result.tx_surface, result.rx_surface};
}

std::string stop_name(StopReason r) {
  switch (r) {
    case StopReason::kMaxIterations: return "max_iterations";
    case StopReason::kSmallStep: return "small_step";
    case StopReason::kLineSearchFailed: return "line_search_failed";
  }
  return "?";
}

// CSV formatting with round-trip precision.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : path_(path), out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out_ << std::setprecision(17);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << fields, first = false), ...);
    out_ << '\n';
  }

  ~CsvWriter() noexcept(false) {
    out_.flush();
    if (!out_ && std::uncaught_exceptions() == 0) {
      throw std::runtime_error("write failure on " + path_.string());
    }
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_metadata(const std::filesystem::path& dir, const ExperimentConfig& config,
                    const std::string& command, nlohmann::json extra) {
  nlohmann::json meta;
  meta["command"] = command;
  meta["config"] = config.to_json();
  meta["seed"] = config.seed;
  meta["software_version"] = software_version();
  meta["snr_definition"] =
      "per-receive-sample SNR: noise_var = E_S * d_s / 10^(snr_db/10), from the expected channel "
      "power E||H||_F^2 = N * d_s^2 with unit-variance path gains and E_S = 1 (QPSK)";
  meta["transmit_covariance"] = "identity";
  for (auto& [k, v] : extra.items()) meta[k] = v;
  const auto path = dir / "run_metadata.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << meta.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failure on " + path.string());
}

double to_db(double v) { return 10.0 * std::log10(std::max(v, std::numeric_limits<double>::min())); }

}  // namespace

std::string software_version() { return FIMDD_VERSION; }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t trial, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ splitmix64(trial * 0x100000001B3ULL + stream));
}

std::vector<RateSummary> summarize(const std::vector<RateRecord>& records) {
  using Key = std::tuple<std::string, int, double>;
  std::map<Key, std::vector<double>> groups;
  std::vector<Key> order;
  for (const auto& r : records) {
    const Key key{r.waveform, static_cast<int>(r.mode), r.snr_db};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(r.rate_bits);
  }
  std::vector<RateSummary> out;
  for (const auto& key : order) {
    const auto& v = groups.at(key);
    RateSummary s;
    s.waveform = std::get<0>(key);
    s.mode = static_cast<FimMode>(std::get<1>(key));
    s.snr_db = std::get<2>(key);
    s.trials = static_cast<int>(v.size());
    s.mean_bits = std::accumulate(v.begin(), v.end(), 0.0) / s.trials;
    if (s.trials > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean_bits) * (x - s.mean_bits);
      s.stderr_bits = std::sqrt(ss / (s.trials - 1)) / std::sqrt(static_cast<double>(s.trials));
    }
    out.push_back(s);
  }
  return out;
}

RateSweepResult run_rate_sweep(const ExperimentConfig& config) {
  config.validate();
  std::optional<SharedShapes> shared;
  const bool want_optimized = std::find(config.fim_modes.begin(), config.fim_modes.end(),
                                        FimMode::kOptimized) != config.fim_modes.end();
  if (config.reuse_shapes) shared = optimize_shared(config);

  struct TrialOutput {
    std::vector<RateRecord> records;
    std::vector<OptimizerRun> runs;
  };
  std::vector<TrialOutput> per_trial(static_cast<std::size_t>(config.trials));

  parallel_for(config.trials, config.workers, [&](int trial) {
    TrialSetup setup = make_trial(config, trial);
    if (shared) {
      setup.random_tx = shared->random_tx;
      setup.random_rx = shared->random_rx;
    }
    const auto& sc = setup.scenario;
    const FimSurface flat_tx = FimSurface::flat(sc.tx_geom);
    const FimSurface flat_rx = FimSurface::flat(sc.rx_geom);
    auto& out = per_trial[static_cast<std::size_t>(trial)];

    for (const auto kind : config.waveforms) {
      const WaveformSpec spec = config.waveform_for(kind, sc);
      const std::string name = waveform_name(spec);
      const CMatrix h_flat = effective_channel(spec, sc, flat_tx, flat_rx);
      const CMatrix h_random = effective_channel(spec, sc, setup.random_tx, setup.random_rx);
      CMatrix h_shared_opt;
      if (shared && want_optimized) h_shared_opt = effective_channel(spec, sc, shared->opt_tx, shared->opt_rx);
      const double psi = resolve_psi(config, sc, spec);

      for (const auto mode : config.fim_modes) {
        for (const double snr : config.snr_db) {
          const double noise_var = noise_var_for_snr(snr, sc.streams());
          double rate = 0.0;
          switch (mode) {
            case FimMode::kNone: rate = achievable_rate(h_flat, noise_var); break;
            case FimMode::kRandom: rate = achievable_rate(h_random, noise_var); break;
            case FimMode::kOptimized:
              if (shared) {
                rate = achievable_rate(h_shared_opt, noise_var);
              } else {
                const auto result = optimize(sc, spec, config.optimizer_config(noise_var, psi),
                                             setup.random_tx, setup.random_rx);
                rate = result.rate_trace.back();
                out.runs.push_back(describe_run(trial, name, snr, result));
              }
              break;
          }
          out.records.push_back({name, mode, snr, trial, rate});
        }
      }
    }
  });

  RateSweepResult result;
  for (auto& t : per_trial) {
    result.records.insert(result.records.end(), t.records.begin(), t.records.end());
    result.optimizer_runs.insert(result.optimizer_runs.end(), t.runs.begin(), t.runs.end());
  }
  return result;
}

std::vector<AnglePair> match_to_truth(const std::vector<AnglePair>& truth,
                                      const std::vector<AnglePair>& estimates) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<AnglePair> assigned(truth.size(), AnglePair{nan, nan});
  if (truth.empty() || estimates.empty()) return assigned;
  const std::size_t used = std::min(truth.size(), estimates.size());
  std::vector<std::size_t> perm(truth.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t k = 0; k < used; ++k) {
      cost += std::hypot(truth[perm[k]].azimuth - estimates[k].azimuth,
                         truth[perm[k]].elevation - estimates[k].elevation);
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (std::size_t k = 0; k < used; ++k) assigned[best[k]] = estimates[k];
  return assigned;
}

MusicExperimentResult run_music_experiment(const ExperimentConfig& config) {
  config.validate();
  const int streams = std::min(config.scenario.tx_bx * config.scenario.tx_bz,
                               config.scenario.rx_bx * config.scenario.rx_bz);
  if (config.scenario.paths >= streams) {
    throw ConfigError("music: scatterer count P=" + std::to_string(config.scenario.paths) +
                      " must be smaller than d_s=" + std::to_string(streams));
  }
  const double frame_noise =
      config.music_snr_db ? noise_var_for_snr(*config.music_snr_db, streams) : 0.0;
  const double opt_noise = noise_var_for_snr(config.optimizer_snr_db, streams);
  const double step_deg = config.music_grid_step_deg;

  struct TrialOutput {
    std::vector<MusicRun> runs;
    std::vector<ScatterEstimate> estimates;
  };
  std::vector<TrialOutput> per_trial(static_cast<std::size_t>(config.trials));

  parallel_for(config.trials, config.workers, [&](int trial) {
    const TrialSetup setup = make_trial(config, trial);
    const auto& sc = setup.scenario;
    std::vector<AnglePair> truth;
    for (const auto& p : sc.paths) truth.push_back({p.angles_in.azimuth, p.angles_in.elevation});
    auto& out = per_trial[static_cast<std::size_t>(trial)];

    for (const auto kind : config.waveforms) {
      const WaveformSpec spec = config.waveform_for(kind, sc);
      const std::string name = waveform_name(spec);
      for (const auto mode : config.fim_modes) {
        FimSurface tx = FimSurface::flat(sc.tx_geom);
        FimSurface rx = FimSurface::flat(sc.rx_geom);
        if (mode == FimMode::kRandom) {
          tx = setup.random_tx;
          rx = setup.random_rx;
        } else if (mode == FimMode::kOptimized) {
          const auto r = optimize(sc, spec,
                                  config.optimizer_config(opt_noise, resolve_psi(config, sc, spec)),
                                  setup.random_tx, setup.random_rx);
          tx = r.tx_surface;
          rx = r.rx_surface;
        }
        const CMatrix h = effective_channel(spec, sc, tx, rx);
        std::vector<CMatrix> frames;
        for (int f = 0; f < config.music_frames; ++f) {
          const SymbolFrame frame =
              random_qpsk_frame(sc.n, sc.streams(), derive_seed(config.seed, trial, kSymbolStream + f));
          const CVector y =
              transmit_receive(h, frame_noise, frame, derive_seed(config.seed, trial, kNoiseStream + f));
          frames.push_back(unvec_frame(y, sc.n, sc.streams()));
        }
        const CMatrix basis = noise_subspace(rx_covariance(frames), sc.num_paths());
        MusicGrid grid = music_spectrum(basis, sc.rx_geom, rx, MusicGrid::uniform(step_deg));
        const PeakList peaks = extract_peaks(grid, sc.num_paths());
        grid.peaks = peaks.peaks;

        const auto matched = match_to_truth(truth, peaks.peaks);
        for (std::size_t p = 0; p < truth.size(); ++p) {
          ScatterEstimate e;
          e.trial = trial;
          e.mode = mode;
          e.waveform = name;
          e.scatterer = static_cast<int>(p);
          e.truth = truth[p];
          e.estimate = matched[p];
          e.azimuth_error_deg = std::abs(matched[p].azimuth - truth[p].azimuth) * kRadToDeg;
          e.elevation_error_deg = std::abs(matched[p].elevation - truth[p].elevation) * kRadToDeg;
          e.within_one_step = e.azimuth_error_deg <= step_deg + 1e-9 &&
                              e.elevation_error_deg <= step_deg + 1e-9;
          out.estimates.push_back(e);
        }

        if (trial == 0) {
          MusicRun run;
          run.mode = mode;
          run.waveform = name;
          run.truth = truth;
          for (std::size_t p = 0; p < truth.size(); ++p) {
            auto nearest = [](const std::vector<double>& pts, double v) {
              const auto it = std::min_element(pts.begin(), pts.end(), [v](double a, double b) {
                return std::abs(a - v) < std::abs(b - v);
              });
              return static_cast<Eigen::Index>(it - pts.begin());
            };
            const auto i = nearest(grid.azimuth_points, truth[p].azimuth);
            const auto j = nearest(grid.elevation_points, truth[p].elevation);
            SpectrumCut el_cut{static_cast<int>(p), "elevation", grid.azimuth_points[i],
                               grid.elevation_points, {}};
            for (Eigen::Index c = 0; c < grid.values.cols(); ++c) el_cut.values.push_back(grid.values(i, c));
            SpectrumCut az_cut{static_cast<int>(p), "azimuth", grid.elevation_points[j],
                               grid.azimuth_points, {}};
            for (Eigen::Index r = 0; r < grid.values.rows(); ++r) az_cut.values.push_back(grid.values(r, j));
            run.cuts.push_back(std::move(el_cut));
            run.cuts.push_back(std::move(az_cut));
          }
          run.grid = std::move(grid);
          out.runs.push_back(std::move(run));
        }
      }
    }
  });

  MusicExperimentResult result;
  for (auto& t : per_trial) {
    for (auto& r : t.runs) result.runs.push_back(std::move(r));
    result.estimates.insert(result.estimates.end(), t.estimates.begin(), t.estimates.end());
  }
  return result;
}

OptimizeOnceResult run_optimize_once(const ExperimentConfig& config) {
  config.validate();
  const TrialSetup setup = make_trial(config, 0);
  OptimizeOnceResult out;
  out.scenario = setup.scenario;
  out.noise_var = noise_var_for_snr(config.optimizer_snr_db, setup.scenario.streams());
  for (const auto kind : config.waveforms) {
    const WaveformSpec spec = config.waveform_for(kind, setup.scenario);
    out.psi = resolve_psi(config, setup.scenario, spec);
    out.waveforms.push_back(waveform_name(spec));
    out.results.push_back(optimize(setup.scenario, spec, config.optimizer_config(out.noise_var, out.psi),
                                   setup.random_tx, setup.random_rx));
  }
  return out;
}

void emit_results(const RateSweepResult& result, const ExperimentConfig& config,
                  const std::filesystem::path& dir) {
  prepare_dir(dir);
  {
    CsvWriter csv(dir / "rate_sweep.csv", {"waveform", "fim_mode", "snr_db", "trial", "rate_bits"});
    for (const auto& r : result.records) {
      csv.row(r.waveform, fim_mode_name(r.mode), r.snr_db, r.trial, r.rate_bits);
    }
  }
  {
    CsvWriter csv(dir / "rate_summary.csv",
                  {"waveform", "fim_mode", "snr_db", "mean_rate_bits", "stderr_rate_bits", "trials"});
    for (const auto& s : summarize(result.records)) {
      csv.row(s.waveform, fim_mode_name(s.mode), s.snr_db, s.mean_bits, s.stderr_bits, s.trials);
    }
  }
  {
    CsvWriter csv(dir / "optimizer_runs.csv",
                  {"trial", "waveform", "snr_db", "iterations", "initial_objective",
                   "final_objective", "initial_rate_bits", "final_rate_bits", "monotone", "stop"});
    for (const auto& r : result.optimizer_runs) {
      csv.row(r.trial, r.waveform, r.snr_db, r.iterations, r.initial_objective, r.final_objective,
              r.initial_rate, r.final_rate, r.monotone ? 1 : 0, stop_name(r.stop));
    }
  }
  write_metadata(dir, config, "rate-sweep", nlohmann::json::object());
}

void emit_results(const MusicExperimentResult& result, const ExperimentConfig& config,
                  const std::filesystem::path& dir) {
  prepare_dir(dir);
  for (const auto& run : result.runs) {
    const std::string suffix = fim_mode_name(run.mode) + "_" + run.waveform;
    {
      CsvWriter csv(dir / ("music_spectrum_" + suffix + ".csv"),
                    {"azimuth_deg", "elevation_deg", "value_db"});
      const auto& g = run.grid;
      for (std::size_t i = 0; i < g.azimuth_points.size(); ++i) {
        for (std::size_t j = 0; j < g.elevation_points.size(); ++j) {
          csv.row(g.azimuth_points[i] * kRadToDeg, g.elevation_points[j] * kRadToDeg,
                  to_db(g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
        }
      }
    }
    {
      CsvWriter csv(dir / ("music_cuts_" + suffix + ".csv"),
                    {"scatterer", "profile", "fixed_angle_deg", "angle_deg", "value_db"});
      for (const auto& cut : run.cuts) {
        for (std::size_t k = 0; k < cut.angles.size(); ++k) {
          csv.row(cut.scatterer, cut.axis, cut.fixed_angle * kRadToDeg, cut.angles[k] * kRadToDeg,
                  to_db(cut.values[k]));
        }
      }
    }
  }
  {
    CsvWriter csv(dir / "music_estimates.csv",
                  {"trial", "fim_mode", "waveform", "scatterer", "true_azimuth_deg",
                   "true_elevation_deg", "est_azimuth_deg", "est_elevation_deg",
                   "azimuth_error_deg", "elevation_error_deg", "within_one_step"});
    for (const auto& e : result.estimates) {
      csv.row(e.trial, fim_mode_name(e.mode), e.waveform, e.scatterer, e.truth.azimuth * kRadToDeg,
              e.truth.elevation * kRadToDeg, e.estimate.azimuth * kRadToDeg,
              e.estimate.elevation * kRadToDeg, e.azimuth_error_deg, e.elevation_error_deg,
              e.within_one_step ? 1 : 0);
    }
  }
  write_metadata(dir, config, "music", nlohmann::json::object());
}

void emit_results(const OptimizeOnceResult& result, const ExperimentConfig& config,
                  const std::filesystem::path& dir) {
  prepare_dir(dir);
  {
    CsvWriter csv(dir / "optimize_trace.csv",
                  {"waveform", "iteration", "objective", "rate_bits", "sensing_slack"});
    for (std::size_t w = 0; w < result.results.size(); ++w) {
      const auto& r = result.results[w];
      for (std::size_t i = 0; i < r.objective_trace.size(); ++i) {
        csv.row(result.waveforms[w], i, r.objective_trace[i], r.rate_trace[i], r.slack_trace[i]);
      }
    }
  }
  {
    CsvWriter csv(dir / "surfaces.csv", {"waveform", "side", "element", "y_m"});
    for (std::size_t w = 0; w < result.results.size(); ++w) {
      const auto& r = result.results[w];
      for (int b = 0; b < r.tx_surface.size(); ++b) csv.row(result.waveforms[w], "tx", b, r.tx_surface.y[b]);
      for (int b = 0; b < r.rx_surface.size(); ++b) csv.row(result.waveforms[w], "rx", b, r.rx_surface.y[b]);
    }
  }
  nlohmann::json extra;
  extra["noise_var"] = result.noise_var;
  extra["psi"] = result.psi;
  write_metadata(dir, config, "optimize-once", extra);
}

}  // namespace fimdd
