#include "fimdd/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace fimdd {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

long long to_integer(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  }
}

int to_int(const std::string& key, const std::string& value) {
  return static_cast<int>(to_integer(key, value));
}

bool to_bool(const std::string& key, const std::string& value) {
  const std::string v = lower(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

}  // namespace

std::string fim_mode_name(FimMode mode) {
  switch (mode) {
    case FimMode::kNone: return "none";
    case FimMode::kRandom: return "random";
    case FimMode::kOptimized: return "optimized";
  }
  return "?";
}

FimMode parse_fim_mode(const std::string& name) {
  const std::string v = lower(name);
  if (v == "none" || v == "flat") return FimMode::kNone;
  if (v == "random") return FimMode::kRandom;
  if (v == "optimized") return FimMode::kOptimized;
  throw ConfigError("unknown FIM mode '" + name + "'");
}

void ExperimentConfig::validate() const {
  scenario.validate();
  if (waveforms.empty()) throw ConfigError("at least one waveform is required");
  if (snr_db.empty()) throw ConfigError("SNR list must not be empty");
  if (fim_modes.empty()) throw ConfigError("at least one FIM mode is required");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (beta < 0.0) throw ConfigError("beta must be >= 0");
  if (psi_power && *psi_power < 0.0) throw ConfigError("psi_power must be >= 0");
  if (psi_fraction < 0.0) throw ConfigError("psi_fraction must be >= 0");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(music_grid_step_deg > 0.0)) throw ConfigError("music_grid_step_deg must be positive");
  if (music_frames < 1) throw ConfigError("music_frames must be >= 1");
  if (afdm_c1 && *afdm_c1 < 0.0) throw ConfigError("afdm_c1 must be >= 0");
  if (otfs_delay_bins) {
    if (*otfs_delay_bins < 1 || scenario.n % *otfs_delay_bins != 0) {
      throw ConfigError("otfs_delay_bins must divide the block length");
    }
  }
  optimizer_config(1.0, 0.0).validate();
}

WaveformSpec ExperimentConfig::waveform_for(WaveformKind kind,
                                            const ChannelScenario& scenario_in) const {
  switch (kind) {
    case WaveformKind::kOfdm: return Ofdm{scenario_in.n};
    case WaveformKind::kOtfs:
      if (otfs_delay_bins) {
        if (*otfs_delay_bins < 1 || scenario_in.n % *otfs_delay_bins != 0) {
          throw ConfigError("otfs_delay_bins must divide the block length");
        }
        return Otfs{*otfs_delay_bins, scenario_in.n / *otfs_delay_bins};
      }
      return make_waveform(kind, scenario_in);
    case WaveformKind::kAfdm:
      return Afdm{scenario_in.n, afdm_c1 ? *afdm_c1 : fimdd::afdm_c1(scenario_in), afdm_c2};
  }
  throw ConfigError("unknown waveform kind");
}

OptimizerConfig ExperimentConfig::optimizer_config(double noise_var, double psi) const {
  OptimizerConfig cfg = OptimizerConfig::defaults(scenario.wavelength(), noise_var);
  cfg.beta = beta;
  cfg.psi = psi;
  cfg.max_iters = max_iterations;
  cfg.armijo.initial_step = armijo_initial_step_wavelengths * scenario.wavelength();
  cfg.armijo.backtrack = armijo_backtrack_factor;
  cfg.armijo.sufficient_increase = armijo_sufficient_increase;
  cfg.armijo.max_backtracks = armijo_max_backtracks;
  return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  const auto& s = scenario;
  j["carrier_frequency_hz"] = s.carrier_hz;
  j["wavelength_m"] = s.wavelength();
  j["bandwidth_hz"] = bandwidth_hz;
  j["sampling_frequency_hz"] = s.fs;
  j["block_length_samples"] = s.n;
  j["cp_length_samples"] = s.resolved_cp();
  j["tx_elements_x"] = s.tx_bx;
  j["tx_elements_z"] = s.tx_bz;
  j["rx_elements_x"] = s.rx_bx;
  j["rx_elements_z"] = s.rx_bz;
  j["tx_elements"] = s.tx_bx * s.tx_bz;
  j["rx_elements"] = s.rx_bx * s.rx_bz;
  j["streams"] = std::min(s.tx_bx * s.tx_bz, s.rx_bx * s.rx_bz);
  j["num_paths"] = s.paths;
  j["max_range_m"] = s.max_range_m;
  j["max_velocity_mps"] = s.max_velocity_mps;
  j["max_delay_s"] = s.tau_max();
  j["max_doppler_hz"] = s.nu_max();
  j["max_delay_taps"] = s.max_tap();
  j["y_min_wavelengths"] = s.y_min_wavelengths;
  j["y_max_wavelengths"] = s.y_max_wavelengths;
  j["y_min_m"] = s.y_min_wavelengths * s.wavelength();
  j["y_max_m"] = s.y_max_wavelengths * s.wavelength();
  j["element_spacing_m"] = s.wavelength() / 2.0;

  std::vector<std::string> wf;
  for (auto k : waveforms) {
    wf.push_back(k == WaveformKind::kOfdm ? "OFDM" : k == WaveformKind::kOtfs ? "OTFS" : "AFDM");
  }
  j["waveforms"] = wf;
  j["afdm_c1"] = afdm_c1 ? nlohmann::json(*afdm_c1) : nlohmann::json("derived");
  j["afdm_c2"] = afdm_c2;
  j["otfs_delay_bins"] = otfs_delay_bins ? nlohmann::json(*otfs_delay_bins) : nlohmann::json("sqrt");
  j["snr_db"] = snr_db;
  std::vector<std::string> modes;
  for (auto m : fim_modes) modes.push_back(fim_mode_name(m));
  j["fim_modes"] = modes;
  j["trials"] = trials;
  j["seed"] = seed;
  j["workers"] = workers;
  j["reuse_shapes"] = reuse_shapes;
  j["beta"] = beta;
  j["psi_power"] = psi_power ? nlohmann::json(*psi_power) : nlohmann::json(nullptr);
  j["psi_fraction"] = psi_fraction;
  j["max_iterations"] = max_iterations;
  j["armijo_initial_step_wavelengths"] = armijo_initial_step_wavelengths;
  j["armijo_backtrack_factor"] = armijo_backtrack_factor;
  j["armijo_sufficient_increase"] = armijo_sufficient_increase;
  j["armijo_max_backtracks"] = armijo_max_backtracks;
  j["optimizer_snr_db"] = optimizer_snr_db;
  j["music_grid_step_deg"] = music_grid_step_deg;
  j["music_snr_db"] = music_snr_db ? nlohmann::json(*music_snr_db) : nlohmann::json("inf");
  j["music_frames"] = music_frames;
  return j;
}

ExperimentConfig config_from_pairs(const std::map<std::string, std::string>& pairs) {
  ExperimentConfig c;
  auto& s = c.scenario;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"carrier_frequency_hz", [&](auto& k, auto& v) { s.carrier_hz = to_double(k, v); }},
      {"bandwidth_hz", [&](auto& k, auto& v) { c.bandwidth_hz = to_double(k, v); }},
      {"sampling_frequency_hz", [&](auto& k, auto& v) { s.fs = to_double(k, v); }},
      {"block_length_samples", [&](auto& k, auto& v) { s.n = to_int(k, v); }},
      {"cp_length_samples", [&](auto& k, auto& v) { s.n_cp = to_int(k, v); }},
      {"tx_elements_x", [&](auto& k, auto& v) { s.tx_bx = to_int(k, v); }},
      {"tx_elements_z", [&](auto& k, auto& v) { s.tx_bz = to_int(k, v); }},
      {"rx_elements_x", [&](auto& k, auto& v) { s.rx_bx = to_int(k, v); }},
      {"rx_elements_z", [&](auto& k, auto& v) { s.rx_bz = to_int(k, v); }},
      {"num_paths", [&](auto& k, auto& v) { s.paths = to_int(k, v); }},
      {"max_range_m", [&](auto& k, auto& v) { s.max_range_m = to_double(k, v); }},
      {"max_velocity_mps", [&](auto& k, auto& v) { s.max_velocity_mps = to_double(k, v); }},
      {"y_min_wavelengths", [&](auto& k, auto& v) { s.y_min_wavelengths = to_double(k, v); }},
      {"y_max_wavelengths", [&](auto& k, auto& v) { s.y_max_wavelengths = to_double(k, v); }},
      {"waveforms",
       [&](auto&, auto& v) {
         c.waveforms.clear();
         for (const auto& item : split_list(v)) c.waveforms.push_back(parse_waveform_kind(item));
       }},
      {"afdm_c1", [&](auto& k, auto& v) { c.afdm_c1 = to_double(k, v); }},
      {"afdm_c2", [&](auto& k, auto& v) { c.afdm_c2 = to_double(k, v); }},
      {"otfs_delay_bins", [&](auto& k, auto& v) { c.otfs_delay_bins = to_int(k, v); }},
      {"snr_db",
       [&](auto& k, auto& v) {
         c.snr_db.clear();
         for (const auto& item : split_list(v)) c.snr_db.push_back(to_double(k, item));
       }},
      {"fim_modes",
       [&](auto&, auto& v) {
         c.fim_modes.clear();
         for (const auto& item : split_list(v)) c.fim_modes.push_back(parse_fim_mode(item));
       }},
      {"trials", [&](auto& k, auto& v) { c.trials = to_int(k, v); }},
      {"seed",
       [&](auto& k, auto& v) {
         // stoull silently wraps negative input, so reject a sign up front.
         if (v.empty() || v[0] == '-' || v[0] == '+') {
           throw ConfigError("config key '" + k + "': expected an unsigned integer, got '" + v + "'");
         }
         try {
           std::size_t used = 0;
           c.seed = std::stoull(v, &used);
           if (used != v.size()) throw std::invalid_argument("trailing characters");
         } catch (const std::exception&) {
           throw ConfigError("config key '" + k + "': expected an unsigned integer, got '" + v + "'");
         }
       }},
      {"workers", [&](auto& k, auto& v) { c.workers = to_int(k, v); }},
      {"reuse_shapes", [&](auto& k, auto& v) { c.reuse_shapes = to_bool(k, v); }},
      {"beta", [&](auto& k, auto& v) { c.beta = to_double(k, v); }},
      {"psi_power", [&](auto& k, auto& v) { c.psi_power = to_double(k, v); }},
      {"psi_fraction", [&](auto& k, auto& v) { c.psi_fraction = to_double(k, v); }},
      {"max_iterations", [&](auto& k, auto& v) { c.max_iterations = to_int(k, v); }},
      {"armijo_initial_step_wavelengths",
       [&](auto& k, auto& v) { c.armijo_initial_step_wavelengths = to_double(k, v); }},
      {"armijo_backtrack_factor",
       [&](auto& k, auto& v) { c.armijo_backtrack_factor = to_double(k, v); }},
      {"armijo_sufficient_increase",
       [&](auto& k, auto& v) { c.armijo_sufficient_increase = to_double(k, v); }},
      {"armijo_max_backtracks", [&](auto& k, auto& v) { c.armijo_max_backtracks = to_int(k, v); }},
      {"optimizer_snr_db", [&](auto& k, auto& v) { c.optimizer_snr_db = to_double(k, v); }},
      {"music_grid_step_deg", [&](auto& k, auto& v) { c.music_grid_step_deg = to_double(k, v); }},
      {"music_snr_db",
       [&](auto& k, auto& v) {
         if (lower(v) == "inf") {
           c.music_snr_db.reset();
         } else {
           c.music_snr_db = to_double(k, v);
         }
       }},
      {"music_frames", [&](auto& k, auto& v) { c.music_frames = to_int(k, v); }},
      {"output_dir", [&](auto&, auto& v) { c.output_dir = v; }},
  };
  for (const auto& [key, value] : pairs) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(key, value);
  }
  c.validate();
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> pairs;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!pairs.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return config_from_pairs(pairs);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

double noise_var_for_snr(double snr_db, int streams, double symbol_energy) {
  return symbol_energy * streams / std::pow(10.0, snr_db / 10.0);
}

}  // namespace fimdd
