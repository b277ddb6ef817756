#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sideband/statistics.hpp"

namespace sideband::pipeline {

inline constexpr double kElementaryCharge = 1.602176634e-19;  // C

/// Boxcar + PMT chain converting integrated ADC counts to photons per shot.
struct DetectorCalibration {
  double adc_range_volts = 20.0;
  std::int64_t adc_levels = 4096;
  double boxcar_sens = 0.02;  // V_in / V_out
  double input_impedance_ohms = 1e6;
  double pmt_gain = 1e7;
  double rep_rate_hz = 1e3;
  double quantum_efficiency = 0.5;

  /// Throws std::invalid_argument unless all fields are positive and QE <= 1.
  void validate() const;
};

/// Photons per ADC count.
double photons_per_adu(const DetectorCalibration& cal);
double adu_to_photons(double adu, const DetectorCalibration& cal);

/// Bad input data (missing columns, too many malformed rows, empty file).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingColumnError : public InputError {
 public:
  explicit MissingColumnError(std::string column);
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

/// Post-selection removed every shot.
class EmptySelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-shot acquisition table. ADC channels are the pmt_adu column plus any
/// further *_adu columns; monitors are in arbitrary units.
struct ShotTable {
  std::vector<std::int64_t> shot_id;
  std::vector<std::string> channel_names;       // pmt_adu first
  std::vector<std::vector<double>> channels;    // one column per channel name
  std::vector<double> bsv_monitor;
  std::vector<double> mir_monitor;
  std::vector<std::uint8_t> selected;           // post-selection flags, 1 = kept
  /// Photon columns, parallel to `channels`; present only after calibrate().
  std::optional<std::vector<std::vector<double>>> photons;

  std::size_t rows() const { return shot_id.size(); }
  std::size_t selected_count() const;
  /// Index into channel_names; throws MissingColumnError when absent.
  std::size_t channel_index(const std::string& name) const;
};

struct IngestReport {
  std::size_t data_rows = 0;  // non-empty lines after the header
  std::size_t skipped = 0;
  std::vector<std::string> skip_reasons;  // first few, "line N: reason"
};

struct IngestResult {
  ShotTable table;
  IngestReport report;
};

/// Streams a CSV with header shot_id,pmt_adu,bsv_monitor,mir_monitor (any
/// order, extra columns allowed). Rows with unparsable, non-finite or negative
/// fields or a non-increasing shot_id are skipped. More than max(1, 1%) bad
/// rows, a missing column or fewer than two good rows throw InputError.
IngestResult ingest_shots(std::istream& in, const std::string& source = "<stream>");
IngestResult ingest_shots(const std::string& path);

void write_shots_csv(std::ostream& os, const ShotTable& table);

/// Per-channel calibration, keyed by channel name; channels without an entry use `fallback`.
struct CalibrationSet {
  DetectorCalibration fallback;
  std::map<std::string, DetectorCalibration> per_channel;

  const DetectorCalibration& for_channel(const std::string& name) const;
};

/// Fills table.photons for every ADC channel.
ShotTable calibrate(ShotTable table, const CalibrationSet& cal);

/// Flags shots with |mir - mean| <= band_fraction * std over all rows, ANDed
/// into the existing flags. band_fraction = infinity keeps everything.
ShotTable postselect_pump_band(ShotTable table, double band_fraction = 0.2);

struct ChannelReport {
  std::string label;
  double mean_photons = 0.0;
  stats::G2Estimate g2;
  stats::Histogram histogram;
  std::size_t n_shots_used = 0;
};

/// Report over the selected shots of one channel. ADC channels are calibrated
/// to photons; bsv_monitor and mir_monitor are reported in monitor units.
ChannelReport channel_report(const ShotTable& table, const std::string& channel, const CalibrationSet& cal,
                             std::size_t n_blocks = 20, std::size_t hist_bins = 50);

std::string to_json(const ChannelReport& report);

struct SimulatorConfig {
  std::size_t n_shots = 30000;
  std::uint64_t seed = 1;
  double pump_mean = 1.0;            // mid-IR pulse energy, arbitrary units
  double pump_jitter = 0.05;         // relative Gaussian standard deviation
  double tail_fraction = 0.0;        // share of shots in the low-energy tail
  double tail_scale = 0.5;           // pump energy multiplier of tail shots
  double bsv_sinh2_r = 1e4;          // photons per squeezed mode
  double bsv_modes = 1.6;            // effective mode number K
  double kappa = 3e-3;               // sideband photons per BSV photon
  double harmonic_mean = 200.0;      // harmonic photons at pump_mean
  double harmonic_pump_power = 1.0;  // harmonic yield ~ pump^power
  double bsv_monitor_gain = 1e-3;    // monitor units per BSV photon
  double bsv_monitor_offset = 0.0;
  double mir_monitor_gain = 1.0;     // monitor units per pump unit
  double mir_monitor_offset = 0.0;

  void validate() const;
};

/// Synthetic acquisition with columns pmt_adu (sideband), harmonic_adu and
/// both monitors. Counts are converted to ADC units through `cal`, so
/// calibrate() recovers them up to rounding. Deterministic in cfg.seed for any
/// thread count.
ShotTable simulate_experiment(const SimulatorConfig& cfg, const CalibrationSet& cal);

}  // namespace sideband::pipeline
