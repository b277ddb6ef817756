#include "sideband/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "sideband/scan.hpp"

namespace sideband::config {

namespace {

constexpr std::string_view kQePrefix = "cal.quantum_efficiency.";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

const KeySpec* find_spec(const std::string& key) {
  const auto& keys = known_keys();
  const auto it = std::find_if(keys.begin(), keys.end(), [&](const KeySpec& k) { return k.key == key; });
  return it == keys.end() ? nullptr : &*it;
}

bool is_dynamic_key(const std::string& key) {
  return key.size() > kQePrefix.size() && key.compare(0, kQePrefix.size(), kQePrefix) == 0;
}

}  // namespace

const std::vector<KeySpec>& known_keys() {
  static const std::vector<KeySpec> keys = {
      {"subcommand", "", "subcommand that produced this file (informational)"},
      {"input", "", "analyze: input shots CSV"},
      {"out", "", "output directory"},
      {"seed", "1", "master RNG seed"},
      {"n_blocks", "20", "blocks for the g2 error estimate"},
      {"tol", "1e-06", "oracle agreement and classification tolerance"},

      {"model.r", "", "squeezing parameter r; overrides model.sinh2_r when set"},
      {"model.sinh2_r", "100000000000", "perturbing photons sinh^2 r"},
      {"model.phi", "0", "squeezing phase phi [rad]"},
      {"model.eps1_amp", "1", "|eps1|, sum-frequency harmonic amplitude"},
      {"model.eps1_theta", "0", "theta1 [rad]"},
      {"model.eps2_amp", "1", "|eps2|, difference-frequency harmonic amplitude"},
      {"model.eps2_theta", "0", "theta2 [rad]"},
      {"model.gamma_t", "7.8539816339744827e-06", "interaction strength gamma t"},

      {"oracle.check", "false", "model: cross-check against the Fock oracle"},
      {"oracle.target_leakage", "1e-10", "oracle edge-population target"},
      {"oracle.max_total_cutoff", "4096", "oracle cap on cutoff0 + cutoff_sb"},

      {"cal.adc_range_volts", "20", "ADC input range [V]"},
      {"cal.adc_levels", "4096", "ADC levels"},
      {"cal.boxcar_sens", "0.02", "boxcar sensitivity V_in/V_out"},
      {"cal.input_impedance_ohms", "1000000", "boxcar input impedance [Ohm]"},
      {"cal.pmt_gain", "10000000", "PMT gain"},
      {"cal.rep_rate_hz", "1000", "laser repetition rate [Hz]"},
      {"cal.quantum_efficiency", "0.5", "detector quantum efficiency (per channel: cal.quantum_efficiency.<column>)"},

      {"sim.n_shots", "30000", "simulated shots"},
      {"sim.pump_mean", "1", "mean pump energy [monitor units]"},
      {"sim.pump_jitter", "0.05", "relative Gaussian pump jitter"},
      {"sim.tail_fraction", "0", "fraction of shots in the low-energy pump tail"},
      {"sim.tail_scale", "0.5", "pump energy multiplier for tail shots"},
      {"sim.bsv_sinh2_r", "10000", "BSV photons per squeezed mode"},
      {"sim.bsv_modes", "1.6", "BSV effective mode number K"},
      {"sim.kappa", "0.003", "sideband photons per BSV photon"},
      {"sim.harmonic_mean", "200", "harmonic photons per shot at mean pump"},
      {"sim.harmonic_pump_power", "1", "harmonic yield exponent in pump energy"},
      {"sim.bsv_monitor_gain", "0.001", "BSV monitor units per photon"},
      {"sim.bsv_monitor_offset", "0", "BSV monitor offset"},
      {"sim.mir_monitor_gain", "1", "pump monitor units per pump unit"},
      {"sim.mir_monitor_offset", "0", "pump monitor offset"},

      {"grid.phi_min", "-3.1415926535897931", "phi axis start [rad]"},
      {"grid.phi_max", "3.1415926535897931", "phi axis end [rad]"},
      {"grid.phi_points", "201", "phi axis points"},
      {"grid.dtheta_min", "-3.1415926535897931", "theta1 - theta2 axis start [rad]"},
      {"grid.dtheta_max", "3.1415926535897931", "theta1 - theta2 axis end [rad]"},
      {"grid.dtheta_points", "201", "theta1 - theta2 axis points"},
      {"scan.cut", "", "scan: dtheta of the exported line cut [rad]"},

      {"analyze.postselect", "true", "analyze: apply the pump-band post-selection"},
      {"analyze.band_fraction", "0.2", "half-width of the pump band in standard deviations"},
      {"analyze.hist_bins", "50", "histogram bins per channel"},

      {"selfcheck.oracle_points", "20", "selfcheck: random oracle comparisons"},
  };
  return keys;
}

Config::Config() {
  for (const auto& k : known_keys()) values_[k.key] = k.default_value;
}

void Config::load(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("{}:{}: expected key = value", source, line_no));
    }
    try {
      set(std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1))));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  load(in, path);
}

void Config::set(const std::string& key, const std::string& value) {
  if (!find_spec(key) && !is_dynamic_key(key)) throw ConfigError(fmt::format("unknown config key '{}'", key));
  values_[key] = value;
}

void Config::assign(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError(fmt::format("expected key=value, got '{}'", assignment));
  set(std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
}

bool Config::is_set(const std::string& key) const {
  const auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

const std::string& Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
  return it->second;
}

double Config::real(const std::string& key) const {
  const std::string& s = raw(key);
  double v = 0.0;
  const char* begin = s.data() + (!s.empty() && s.front() == '+' ? 1 : 0);
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || std::isnan(v)) {
    throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, s));
  }
  return v;
}

std::int64_t Config::integer(const std::string& key) const {
  const std::string& s = raw(key);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(fmt::format("{}: expected an integer, got '{}'", key, s));
  }
  return v;
}

std::uint64_t Config::unsigned_integer(const std::string& key) const {
  const std::string& s = raw(key);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, s));
  }
  return v;
}

bool Config::boolean(const std::string& key) const {
  const std::string& s = raw(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(fmt::format("{}: expected true/false, got '{}'", key, s));
}

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> keys;
  for (const auto& [k, v] : values_) {
    if (k.compare(0, prefix.size(), prefix) == 0) keys.push_back(k);
  }
  return keys;
}

void Config::write(std::ostream& os) const {
  for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
}

// ---------------------------------------------------------------------------

namespace {

template <class Fn>
auto rethrow_as_config(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

ModelParams model_params(const Config& cfg) {
  return rethrow_as_config([&] {
    const double phi = cfg.real("model.phi");
    const SqueezeParams sq = cfg.is_set("model.r") ? SqueezeParams(cfg.real("model.r"), phi)
                                                   : SqueezeParams::from_sinh2(cfg.real("model.sinh2_r"), phi);
    return ModelParams(sq, HarmonicField(cfg.real("model.eps1_amp"), cfg.real("model.eps1_theta")),
                       HarmonicField(cfg.real("model.eps2_amp"), cfg.real("model.eps2_theta")),
                       cfg.real("model.gamma_t"));
  });
}

pipeline::CalibrationSet calibration(const Config& cfg) {
  return rethrow_as_config([&] {
    pipeline::CalibrationSet set;
    auto& c = set.fallback;
    c.adc_range_volts = cfg.real("cal.adc_range_volts");
    c.adc_levels = cfg.integer("cal.adc_levels");
    c.boxcar_sens = cfg.real("cal.boxcar_sens");
    c.input_impedance_ohms = cfg.real("cal.input_impedance_ohms");
    c.pmt_gain = cfg.real("cal.pmt_gain");
    c.rep_rate_hz = cfg.real("cal.rep_rate_hz");
    c.quantum_efficiency = cfg.real("cal.quantum_efficiency");
    c.validate();
    for (const std::string& key : cfg.keys_with_prefix(std::string(kQePrefix))) {
      if (!cfg.is_set(key)) continue;
      pipeline::DetectorCalibration channel = c;
      channel.quantum_efficiency = cfg.real(key);
      channel.validate();
      set.per_channel[key.substr(kQePrefix.size())] = channel;
    }
    return set;
  });
}

pipeline::SimulatorConfig simulator(const Config& cfg) {
  return rethrow_as_config([&] {
    pipeline::SimulatorConfig s;
    s.n_shots = cfg.unsigned_integer("sim.n_shots");
    s.seed = cfg.unsigned_integer("seed");
    s.pump_mean = cfg.real("sim.pump_mean");
    s.pump_jitter = cfg.real("sim.pump_jitter");
    s.tail_fraction = cfg.real("sim.tail_fraction");
    s.tail_scale = cfg.real("sim.tail_scale");
    s.bsv_sinh2_r = cfg.real("sim.bsv_sinh2_r");
    s.bsv_modes = cfg.real("sim.bsv_modes");
    s.kappa = cfg.real("sim.kappa");
    s.harmonic_mean = cfg.real("sim.harmonic_mean");
    s.harmonic_pump_power = cfg.real("sim.harmonic_pump_power");
    s.bsv_monitor_gain = cfg.real("sim.bsv_monitor_gain");
    s.bsv_monitor_offset = cfg.real("sim.bsv_monitor_offset");
    s.mir_monitor_gain = cfg.real("sim.mir_monitor_gain");
    s.mir_monitor_offset = cfg.real("sim.mir_monitor_offset");
    s.validate();
    return s;
  });
}

GridAxes grid_axes(const Config& cfg) {
  return rethrow_as_config([&] {
    const auto axis = [&](const std::string& name) {
      const double lo = cfg.real("grid." + name + "_min");
      const double hi = cfg.real("grid." + name + "_max");
      const std::int64_t n = cfg.integer("grid." + name + "_points");
      if (n < 1) throw ConfigError(fmt::format("grid.{}_points must be >= 1, got {}", name, n));
      if (!std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError(fmt::format("grid.{} bounds must be finite", name));
      if (n > 1 && !(hi > lo)) {
        throw ConfigError(fmt::format("grid.{}_max ({}) must exceed grid.{}_min ({})", name, hi, name, lo));
      }
      return scan::linspace(lo, hi, static_cast<std::size_t>(n));
    };
    return GridAxes{axis("phi"), axis("dtheta")};
  });
}

}  // namespace sideband::config
