#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "fimdd/harness.hpp"

using namespace fimdd;
namespace fs = std::filesystem;

namespace {

ExperimentConfig quick_config() {
  ExperimentConfig c;
  c.trials = 2;
  c.snr_db = {0, 10, 20};
  c.max_iterations = 15;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fimdd_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("config text parsing") {
  const auto c = parse_config_text(
      "# comment\n"
      "block_length_samples = 64\n"
      "waveforms = ofdm, afdm\n"
      "snr_db = -5, 5  # trailing comment\n"
      "fim_modes = none,optimized\n"
      "trials = 3\n"
      "seed = 18446744073709551615\n"
      "reuse_shapes = true\n"
      "afdm_c1 = 0.015625\n"
      "music_snr_db = inf\n"
      "\n");
  CHECK(c.scenario.n == 64);
  CHECK(c.waveforms == std::vector<WaveformKind>{WaveformKind::kOfdm, WaveformKind::kAfdm});
  CHECK(c.snr_db == std::vector<double>{-5, 5});
  CHECK(c.fim_modes == std::vector<FimMode>{FimMode::kNone, FimMode::kOptimized});
  CHECK(c.trials == 3);
  CHECK(c.seed == 18446744073709551615ULL);
  CHECK(c.reuse_shapes);
  CHECK(c.afdm_c1 == 0.015625);
  CHECK_FALSE(c.music_snr_db.has_value());

  CHECK_THROWS_AS(parse_config_text("no_such_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("trials = 1\ntrials = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("trials = two\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("trials\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("trials = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("snr_db = \n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("waveforms = fsk\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/fimdd.cfg"), std::runtime_error);
}

TEST_CASE("config defaults and derived values") {
  const ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.scenario.carrier_hz == 28e9);
  CHECK(c.bandwidth_hz == 20e6);
  CHECK(c.beta == 2.0);
  const auto j = c.to_json();
  for (const char* key :
       {"carrier_frequency_hz", "bandwidth_hz", "sampling_frequency_hz", "block_length_samples",
        "tx_elements", "rx_elements", "streams", "num_paths", "max_range_m", "max_velocity_mps",
        "y_min_m", "y_max_m", "wavelength_m", "max_doppler_hz", "max_delay_taps"}) {
    CHECK_MESSAGE(j.contains(key), key);
  }
  CHECK(j["max_delay_taps"] == 8);
  CHECK(j["streams"] == 4);
  const auto sc = random_scenario(c.scenario, 1);
  const auto afdm = std::get<Afdm>(c.waveform_for(WaveformKind::kAfdm, sc));
  CHECK(afdm.c1 == doctest::Approx(afdm_c1(sc)));
  auto o = c;
  o.otfs_delay_bins = 2;
  const auto otfs = std::get<Otfs>(o.waveform_for(WaveformKind::kOtfs, sc));
  CHECK(otfs.k == 2);
  CHECK(otfs.k_prime == 8);
  o.otfs_delay_bins = 3;
  CHECK_THROWS_AS(o.waveform_for(WaveformKind::kOtfs, sc), ConfigError);

  const auto oc = c.optimizer_config(0.5, 3.0);
  CHECK(oc.armijo.initial_step == doctest::Approx(1e-3 * c.scenario.wavelength()));
  CHECK(oc.psi == 3.0);
  CHECK(oc.noise_var == 0.5);
}

TEST_CASE("noise variance for an SNR") {
  CHECK(noise_var_for_snr(0.0, 4) == doctest::Approx(4.0));
  CHECK(noise_var_for_snr(10.0, 4) == doctest::Approx(0.4));
  CHECK(noise_var_for_snr(10.0, 4, 2.0) == doctest::Approx(0.8));
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 0, 0) == derive_seed(1, 0, 0));
  CHECK(derive_seed(1, 0, 0) != derive_seed(1, 0, 1));
  CHECK(derive_seed(1, 0, 0) != derive_seed(1, 1, 0));
  CHECK(derive_seed(1, 0, 0) != derive_seed(2, 0, 0));
}

TEST_CASE("summaries") {
  std::vector<RateRecord> recs{{"OFDM", FimMode::kNone, 0, 0, 1.0},
                               {"OFDM", FimMode::kNone, 0, 1, 3.0},
                               {"OFDM", FimMode::kRandom, 0, 0, 5.0}};
  const auto s = summarize(recs);
  REQUIRE(s.size() == 2);
  CHECK(s[0].mean_bits == 2.0);
  CHECK(s[0].stderr_bits == doctest::Approx(1.0));
  CHECK(s[0].trials == 2);
  CHECK(s[1].stderr_bits == 0.0);
}

TEST_CASE("truth matching") {
  const std::vector<AnglePair> truth{{0.1, 1.0}, {-0.5, 2.0}};
  const auto m = match_to_truth(truth, {{-0.49, 2.01}, {0.12, 0.98}});
  CHECK(m[0].azimuth == 0.12);
  CHECK(m[1].azimuth == -0.49);
  const auto partial = match_to_truth(truth, {{-0.5, 2.0}});
  CHECK(std::isnan(partial[0].azimuth));
  CHECK(partial[1].azimuth == -0.5);
}

TEST_CASE("rate sweep properties") {
  auto c = quick_config();
  const auto r = run_rate_sweep(c);
  CHECK(r.records.size() == 2u * 3 * 3 * 3);
  std::map<std::tuple<int, int, double>, std::vector<double>> by_point;
  std::map<std::tuple<std::string, int, int>, std::vector<double>> by_curve;
  for (const auto& rec : r.records) {
    by_point[{rec.trial, static_cast<int>(rec.mode), rec.snr_db}].push_back(rec.rate_bits);
    by_curve[{rec.waveform, static_cast<int>(rec.mode), rec.trial}].push_back(rec.rate_bits);
  }
  for (const auto& [key, rates] : by_point) {
    REQUIRE(rates.size() == 3);
    if (std::get<1>(key) == static_cast<int>(FimMode::kOptimized)) continue;
    CHECK(std::abs(rates[1] - rates[0]) < 1e-9 * rates[0]);
    CHECK(std::abs(rates[2] - rates[0]) < 1e-9 * rates[0]);
  }
  for (const auto& [key, rates] : by_curve) {
    if (std::get<1>(key) == static_cast<int>(FimMode::kOptimized)) continue;
    CHECK(std::is_sorted(rates.begin(), rates.end()));
  }
  for (const auto& run : r.optimizer_runs) {
    CHECK(run.monotone);
    CHECK(run.final_objective >= run.initial_objective);
  }
  CHECK(r.optimizer_runs.size() == 2u * 3 * 3);
}

TEST_CASE("reuse mode optimizes once") {
  auto c = quick_config();
  c.reuse_shapes = true;
  c.waveforms = {WaveformKind::kOfdm};
  const auto r = run_rate_sweep(c);
  CHECK(r.optimizer_runs.empty());
  CHECK(r.records.size() == 2u * 3 * 3);
}

TEST_CASE("worker count does not change results") {
  auto c = quick_config();
  c.waveforms = {WaveformKind::kAfdm};
  c.trials = 3;
  const auto serial = run_rate_sweep(c);
  c.workers = 3;
  const auto parallel = run_rate_sweep(c);
  REQUIRE(serial.records.size() == parallel.records.size());
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    CHECK(serial.records[i].rate_bits == parallel.records[i].rate_bits);
    CHECK(serial.records[i].trial == parallel.records[i].trial);
  }
}

TEST_CASE("music experiment") {
  auto c = quick_config();
  c.trials = 1;
  c.music_grid_step_deg = 2.0;
  c.fim_modes = {FimMode::kNone, FimMode::kRandom};
  const auto r = run_music_experiment(c);
  CHECK(r.runs.size() == 6);
  CHECK(r.estimates.size() == 12);
  for (const auto& run : r.runs) {
    CHECK(run.grid.values.maxCoeff() == doctest::Approx(1.0));
    CHECK(run.cuts.size() == 4);
    CHECK(run.grid.peaks.size() <= 2);
  }

  auto bad = c;
  bad.scenario.paths = 4;
  CHECK_THROWS_AS(run_music_experiment(bad), ConfigError);
}

TEST_CASE("emission: headers, round trip and metadata") {
  const auto dir = scratch("emit");
  auto c = quick_config();
  emit_results(RateSweepResult{}, c, dir);
  CHECK(slurp(dir / "rate_sweep.csv") == "waveform,fim_mode,snr_db,trial,rate_bits\n");

  c.waveforms = {WaveformKind::kOfdm};
  const auto r = run_rate_sweep(c);
  emit_results(r, c, dir);
  const auto rows = read_csv(dir / "rate_sweep.csv");
  REQUIRE(rows.size() == r.records.size() + 1);
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    auto& a = acc[{rows[i][1], rows[i][2]}];
    a.first += std::stod(rows[i][4]);
    a.second += 1;
  }
  for (const auto& s : summarize(r.records)) {
    std::ostringstream snr;
    snr << std::setprecision(17) << s.snr_db;
    const auto& a = acc.at({fim_mode_name(s.mode), snr.str()});
    CHECK(a.first / a.second == doctest::Approx(s.mean_bits).epsilon(1e-14));
  }

  const auto meta = nlohmann::json::parse(slurp(dir / "run_metadata.json"));
  CHECK(meta["seed"] == c.seed);
  CHECK(meta["software_version"] == software_version());
  CHECK(meta["config"]["carrier_frequency_hz"] == 28e9);
  CHECK(meta["config"]["max_velocity_mps"] == 208.0);
  CHECK(meta.contains("snr_definition"));
  fs::remove_all(dir);
}

TEST_CASE("emission: music and optimizer traces") {
  const auto dir = scratch("emit_music");
  auto c = quick_config();
  c.trials = 1;
  c.music_grid_step_deg = 5.0;
  c.waveforms = {WaveformKind::kOtfs};
  c.fim_modes = {FimMode::kRandom};
  emit_results(run_music_experiment(c), c, dir);
  const auto rows = read_csv(dir / "music_spectrum_random_OTFS.csv");
  CHECK(rows[0] == std::vector<std::string>{"azimuth_deg", "elevation_deg", "value_db"});
  CHECK(rows.size() == 37u * 37 + 1);
  double peak = -1e300;
  for (std::size_t i = 1; i < rows.size(); ++i) peak = std::max(peak, std::stod(rows[i][2]));
  CHECK(peak == doctest::Approx(0.0));
  CHECK(fs::exists(dir / "music_cuts_random_OTFS.csv"));
  CHECK(fs::exists(dir / "music_estimates.csv"));

  emit_results(run_optimize_once(c), c, dir);
  CHECK(read_csv(dir / "surfaces.csv").size() == 9);
  CHECK(fs::exists(dir / "optimize_trace.csv"));
  fs::remove_all(dir);
}

TEST_CASE("emission failures name the path") {
  const auto file = scratch("blocker");
  { std::ofstream(file) << "x"; }
  try {
    emit_results(RateSweepResult{}, ExperimentConfig{}, file / "sub");
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(file.string()) != std::string::npos);
  }
  fs::remove(file);
}
