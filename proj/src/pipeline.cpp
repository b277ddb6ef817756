#include "sideband/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string_view>

#include <fmt/format.h>

#include "sideband/output.hpp"
#include "sideband/random.hpp"

namespace sideband::pipeline {

void DetectorCalibration::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(fmt::format("calibration {} must be positive, got {}", name, v));
    }
  };
  positive(adc_range_volts, "adc_range_volts");
  positive(static_cast<double>(adc_levels), "adc_levels");
  positive(boxcar_sens, "boxcar_sens");
  positive(input_impedance_ohms, "input_impedance_ohms");
  positive(pmt_gain, "pmt_gain");
  positive(rep_rate_hz, "rep_rate_hz");
  positive(quantum_efficiency, "quantum_efficiency");
  if (quantum_efficiency > 1.0) {
    throw std::invalid_argument(fmt::format("quantum_efficiency must be <= 1, got {}", quantum_efficiency));
  }
}

double photons_per_adu(const DetectorCalibration& cal) {
  cal.validate();
  const double volts_per_adu = cal.adc_range_volts / static_cast<double>(cal.adc_levels);
  const double charge_per_volt = 1.0 / (cal.input_impedance_ohms * cal.rep_rate_hz);
  return volts_per_adu * cal.boxcar_sens * charge_per_volt / (kElementaryCharge * cal.pmt_gain) /
         cal.quantum_efficiency;
}

double adu_to_photons(double adu, const DetectorCalibration& cal) { return adu * photons_per_adu(cal); }

MissingColumnError::MissingColumnError(std::string column)
    : InputError(fmt::format("missing column '{}'", column)), column_(std::move(column)) {}

std::size_t ShotTable::selected_count() const {
  return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), std::uint8_t{1}));
}

std::size_t ShotTable::channel_index(const std::string& name) const {
  const auto it = std::find(channel_names.begin(), channel_names.end(), name);
  if (it == channel_names.end()) throw MissingColumnError(name);
  return static_cast<std::size_t>(it - channel_names.begin());
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& value) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

IngestResult ingest_shots(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw InputError(fmt::format("{}: empty file", source));

  const auto header = split(line);
  const auto find_col = [&](std::string_view name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw MissingColumnError(std::string(name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_id = find_col("shot_id");
  const std::size_t c_pmt = find_col("pmt_adu");
  const std::size_t c_bsv = find_col("bsv_monitor");
  const std::size_t c_mir = find_col("mir_monitor");

  IngestResult result;
  ShotTable& t = result.table;
  std::vector<std::size_t> channel_cols{c_pmt};
  t.channel_names.emplace_back("pmt_adu");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i != c_pmt && ends_with(header[i], "_adu")) {
      if (std::find(t.channel_names.begin(), t.channel_names.end(), header[i]) != t.channel_names.end()) {
        throw InputError(fmt::format("{}: duplicate column '{}'", source, header[i]));
      }
      channel_cols.push_back(i);
      t.channel_names.emplace_back(header[i]);
    }
  }
  t.channels.resize(channel_cols.size());

  IngestReport& rep = result.report;
  std::vector<double> row_values(channel_cols.size());
  const auto skip = [&](std::string reason) {
    ++rep.skipped;
    if (rep.skip_reasons.size() < 10) rep.skip_reasons.push_back(fmt::format("line {}: {}", line_no, reason));
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++rep.data_rows;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      skip(fmt::format("expected {} fields, got {}", header.size(), fields.size()));
      continue;
    }
    std::int64_t id = 0;
    if (!parse_number(fields[c_id], id)) {
      skip(fmt::format("bad shot_id '{}'", fields[c_id]));
      continue;
    }
    if (!t.shot_id.empty() && id <= t.shot_id.back()) {
      skip(fmt::format("shot_id {} not increasing", id));
      continue;
    }
    const auto value = [&](std::size_t col, double& v) {
      if (!parse_number(fields[col], v) || !std::isfinite(v) || v < 0.0) {
        skip(fmt::format("bad {} '{}'", header[col], fields[col]));
        return false;
      }
      return true;
    };
    double bsv = 0.0, mir = 0.0;
    bool ok = value(c_bsv, bsv) && value(c_mir, mir);
    for (std::size_t k = 0; ok && k < channel_cols.size(); ++k) ok = value(channel_cols[k], row_values[k]);
    if (!ok) continue;
    t.shot_id.push_back(id);
    t.bsv_monitor.push_back(bsv);
    t.mir_monitor.push_back(mir);
    for (std::size_t k = 0; k < channel_cols.size(); ++k) t.channels[k].push_back(row_values[k]);
  }

  const std::size_t allowed = std::max<std::size_t>(1, rep.data_rows / 100);
  if (rep.skipped > allowed) {
    throw InputError(fmt::format("{}: {} of {} rows malformed (limit {}); first: {}", source, rep.skipped,
                                 rep.data_rows, allowed, rep.skip_reasons.front()));
  }
  if (t.rows() < 2) {
    throw InputError(fmt::format("{}: {} usable rows, at least 2 are needed", source, t.rows()));
  }
  t.selected.assign(t.rows(), 1);
  return result;
}

IngestResult ingest_shots(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path));
  return ingest_shots(in, path);
}

void write_shots_csv(std::ostream& os, const ShotTable& t) {
  os << "shot_id";
  for (const auto& name : t.channel_names) os << ',' << name;
  os << ",bsv_monitor,mir_monitor\n";
  for (std::size_t i = 0; i < t.rows(); ++i) {
    os << t.shot_id[i];
    for (const auto& col : t.channels) os << ',' << out::number(col[i]);
    os << ',' << out::number(t.bsv_monitor[i]) << ',' << out::number(t.mir_monitor[i]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Calibration, selection, reports

const DetectorCalibration& CalibrationSet::for_channel(const std::string& name) const {
  const auto it = per_channel.find(name);
  return it == per_channel.end() ? fallback : it->second;
}

ShotTable calibrate(ShotTable table, const CalibrationSet& cal) {
  std::vector<std::vector<double>> photons(table.channels.size());
  for (std::size_t k = 0; k < table.channels.size(); ++k) {
    const double scale = photons_per_adu(cal.for_channel(table.channel_names[k]));
    photons[k].resize(table.rows());
    std::transform(table.channels[k].begin(), table.channels[k].end(), photons[k].begin(),
                   [scale](double adu) { return adu * scale; });
  }
  table.photons = std::move(photons);
  return table;
}

ShotTable postselect_pump_band(ShotTable table, double band_fraction) {
  if (!(band_fraction >= 0.0)) throw std::invalid_argument(fmt::format("band fraction {}", band_fraction));
  const std::size_t n = table.rows();
  if (n < 2) throw std::invalid_argument("post-selection needs at least two shots");
  if (table.selected.size() != n) table.selected.assign(n, 1);
  if (std::isinf(band_fraction)) {
    if (table.selected_count() == 0) throw EmptySelectionError("post-selection: no shots were selected on input");
    return table;
  }
  const auto& mir = table.mir_monitor;
  const double mean = std::accumulate(mir.begin(), mir.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (const double v : mir) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  // slack absorbs rounding of the mean for (nearly) constant columns
  const double half_width = band_fraction * sd + 64.0 * std::numeric_limits<double>::epsilon() * std::abs(mean);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(mir[i] - mean) > half_width) table.selected[i] = 0;
  }
  if (table.selected_count() == 0) {
    throw EmptySelectionError(fmt::format(
        "post-selection kept no shots: band +-{} sd around mean {} (sd {}) of {} rows", band_fraction, mean, sd, n));
  }
  return table;
}

ChannelReport channel_report(const ShotTable& table, const std::string& channel, const CalibrationSet& cal,
                             std::size_t n_blocks, std::size_t hist_bins) {
  std::vector<double> scratch;
  const std::vector<double>* source = nullptr;
  double scale = 1.0;
  if (channel == "bsv_monitor") {
    source = &table.bsv_monitor;
  } else if (channel == "mir_monitor") {
    source = &table.mir_monitor;
  } else {
    const std::size_t k = table.channel_index(channel);
    if (table.photons) {
      source = &(*table.photons)[k];
    } else {
      source = &table.channels[k];
      scale = photons_per_adu(cal.for_channel(channel));
    }
  }
  std::vector<double> values;
  values.reserve(table.selected_count());
  for (std::size_t i = 0; i < table.rows(); ++i) {
    if (table.selected[i]) values.push_back((*source)[i] * scale);
  }
  if (values.empty()) throw EmptySelectionError(fmt::format("channel '{}': no selected shots", channel));

  const stats::ShotSeries series(std::move(values), channel);
  ChannelReport rep;
  rep.label = channel;
  rep.mean_photons = series.mean();
  rep.g2 = stats::block_g2(series, n_blocks).pooled;
  rep.histogram = stats::histogram(series.values(), hist_bins);
  rep.n_shots_used = series.size();
  return rep;
}

std::string to_json(const ChannelReport& r) {
  const std::string hist = out::JsonObject()
                               .add_raw("edges", out::array(r.histogram.edges))
                               .add_raw("counts", out::array(r.histogram.counts))
                               .str();
  return out::JsonObject()
      .add("label", r.label)
      .add("mean_photons", r.mean_photons)
      .add_raw("g2", stats::g2_json(r.g2))
      .add_raw("histogram", hist)
      .add("n_shots_used", static_cast<std::uint64_t>(r.n_shots_used))
      .str();
}

// ---------------------------------------------------------------------------
// Simulator

void SimulatorConfig::validate() const {
  const auto check = [](bool ok, const char* what, double v) {
    if (!ok) throw std::invalid_argument(fmt::format("simulator {} invalid: {}", what, v));
  };
  check(n_shots >= 2, "n_shots", static_cast<double>(n_shots));
  check(pump_mean > 0.0 && std::isfinite(pump_mean), "pump_mean", pump_mean);
  check(pump_jitter >= 0.0 && std::isfinite(pump_jitter), "pump_jitter", pump_jitter);
  check(tail_fraction >= 0.0 && tail_fraction <= 1.0, "tail_fraction", tail_fraction);
  check(tail_scale >= 0.0 && std::isfinite(tail_scale), "tail_scale", tail_scale);
  check(bsv_sinh2_r > 0.0 && std::isfinite(bsv_sinh2_r), "bsv_sinh2_r", bsv_sinh2_r);
  check(bsv_modes > 0.0 && std::isfinite(bsv_modes), "bsv_modes", bsv_modes);
  check(kappa >= 0.0 && std::isfinite(kappa), "kappa", kappa);
  check(harmonic_mean >= 0.0 && std::isfinite(harmonic_mean), "harmonic_mean", harmonic_mean);
  check(std::isfinite(harmonic_pump_power), "harmonic_pump_power", harmonic_pump_power);
  check(bsv_monitor_gain > 0.0 && std::isfinite(bsv_monitor_gain), "bsv_monitor_gain", bsv_monitor_gain);
  check(bsv_monitor_offset >= 0.0 && std::isfinite(bsv_monitor_offset), "bsv_monitor_offset", bsv_monitor_offset);
  check(mir_monitor_gain > 0.0 && std::isfinite(mir_monitor_gain), "mir_monitor_gain", mir_monitor_gain);
  check(mir_monitor_offset >= 0.0 && std::isfinite(mir_monitor_offset), "mir_monitor_offset", mir_monitor_offset);
}

namespace {

enum Stream : std::uint64_t { kPump = 1, kBsv = 2, kSideband = 3, kHarmonic = 4 };

std::uint64_t stream_seed(std::uint64_t seed, Stream s) { return splitmix64(seed + 0x632be59bd9b4e019ULL * s); }

/// Poisson counts with per-shot means; chunk offsets are recovered from the
/// span position so that the draw stays aligned with `means`.
std::vector<double> poisson_counts(const std::vector<double>& means, std::uint64_t seed) {
  std::vector<double> out(means.size(), 0.0);
  const double* base = out.data();
  fill_chunked(out, seed, [&means, base](Engine& e, std::span<double> chunk) {
    const auto offset = static_cast<std::size_t>(chunk.data() - base);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const double mu = means[offset + i];
      if (mu > 0.0) {
        std::poisson_distribution<long long> dist(mu);
        chunk[i] = static_cast<double>(dist(e));
      } else {
        chunk[i] = 0.0;
      }
    }
  });
  return out;
}

}  // namespace

ShotTable simulate_experiment(const SimulatorConfig& cfg, const CalibrationSet& cal) {
  cfg.validate();
  const std::size_t n = cfg.n_shots;

  std::vector<double> pump(n);
  fill_chunked(pump, stream_seed(cfg.seed, kPump), [&cfg](Engine& e, std::span<double> chunk) {
    std::normal_distribution<double> jitter(cfg.pump_mean, cfg.pump_jitter * cfg.pump_mean);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& x : chunk) {
      double p = std::max(0.0, jitter(e));
      if (u(e) < cfg.tail_fraction) p *= cfg.tail_scale;
      x = p;
    }
  });

  const auto bsv = stats::sample_multimode_squeezed_vacuum(cfg.bsv_sinh2_r, cfg.bsv_modes, n,
                                                           stream_seed(cfg.seed, kBsv));
  const auto energy = bsv.values();

  std::vector<double> sb_mean(n), hh_mean(n);
  for (std::size_t i = 0; i < n; ++i) {
    sb_mean[i] = cfg.kappa * energy[i];
    hh_mean[i] = cfg.harmonic_mean * std::pow(pump[i] / cfg.pump_mean, cfg.harmonic_pump_power);
  }
  const auto sideband = poisson_counts(sb_mean, stream_seed(cfg.seed, kSideband));
  const auto harmonic = poisson_counts(hh_mean, stream_seed(cfg.seed, kHarmonic));

  ShotTable t;
  t.shot_id.resize(n);
  std::iota(t.shot_id.begin(), t.shot_id.end(), std::int64_t{0});
  t.channel_names = {"pmt_adu", "harmonic_adu"};
  const double sb_scale = photons_per_adu(cal.for_channel("pmt_adu"));
  const double hh_scale = photons_per_adu(cal.for_channel("harmonic_adu"));
  t.channels.assign(2, std::vector<double>(n));
  t.bsv_monitor.resize(n);
  t.mir_monitor.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.channels[0][i] = sideband[i] / sb_scale;
    t.channels[1][i] = harmonic[i] / hh_scale;
    t.bsv_monitor[i] = cfg.bsv_monitor_gain * energy[i] + cfg.bsv_monitor_offset;
    t.mir_monitor[i] = cfg.mir_monitor_gain * pump[i] + cfg.mir_monitor_offset;
  }
  t.selected.assign(n, 1);
  return t;
}

}  // namespace sideband::pipeline
