#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "sideband/pipeline.hpp"
#include "sideband/statistics.hpp"

using namespace sideband;
using namespace sideband::pipeline;

namespace {

// 20 V / 4096 levels * 0.02 / (1 MOhm * 1 kHz) / (e * 1e7) / 0.5, per ADU
constexpr double kHandPhotonsPerAdu = 20.0 / 4096.0 * 0.02 / (1e6 * 1e3) / (1.602176634e-19 * 1e7) / 0.5;

IngestResult ingest_text(const std::string& text) {
  std::istringstream in(text);
  return ingest_shots(in, "test.csv");
}

std::string make_csv(std::size_t rows, std::size_t bad_every = 0) {
  std::string s = "shot_id,pmt_adu,bsv_monitor,mir_monitor\n";
  for (std::size_t i = 0; i < rows; ++i) {
    if (bad_every && i % bad_every == 1) {
      s += std::to_string(i) + ",nan,1,1\n";
    } else {
      s += std::to_string(i) + "," + std::to_string(10 + i % 7) + ",2.5,1." + std::to_string(i % 10) + "\n";
    }
  }
  return s;
}

}  // namespace

TEST(Calibration, MatchesHandComputation) {
  const DetectorCalibration cal;
  EXPECT_EQ(adu_to_photons(0.0, cal), 0.0);
  EXPECT_NEAR(adu_to_photons(4096.0, cal), 4096.0 * kHandPhotonsPerAdu, 1e-12);
  EXPECT_NEAR(adu_to_photons(4096.0, cal), 499.3207, 1e-3);
  DetectorCalibration unity = cal;
  unity.quantum_efficiency = 1.0;
  EXPECT_NEAR(adu_to_photons(4096.0, unity), 0.5 * adu_to_photons(4096.0, cal), 1e-12);
}

TEST(Calibration, IsLinear) {
  const DetectorCalibration cal;
  for (const auto& [a, b] : {std::pair{1.0, 2.0}, {100.5, 3000.25}, {0.0, 17.0}}) {
    EXPECT_NEAR(adu_to_photons(a + b, cal), adu_to_photons(a, cal) + adu_to_photons(b, cal),
                1e-13 * adu_to_photons(a + b, cal) + 1e-300);
  }
}

TEST(Calibration, RejectsInvalidFields) {
  DetectorCalibration cal;
  cal.quantum_efficiency = 1.2;
  EXPECT_THROW(cal.validate(), std::invalid_argument);
  cal.quantum_efficiency = 0.0;
  EXPECT_THROW(cal.validate(), std::invalid_argument);
  cal = DetectorCalibration{};
  cal.pmt_gain = -1.0;
  EXPECT_THROW(adu_to_photons(1.0, cal), std::invalid_argument);
  cal = DetectorCalibration{};
  cal.adc_levels = 0;
  EXPECT_THROW(cal.validate(), std::invalid_argument);
}

TEST(Ingest, WellFormedFile) {
  const auto r = ingest_text(
      "shot_id,pmt_adu,bsv_monitor,mir_monitor\n1,10,2,3\n2,11,2.5,3.1\n3,9,2.4,2.9\n4,12,2.6,3.0\n");
  EXPECT_EQ(r.table.rows(), 4u);
  EXPECT_EQ(r.report.skipped, 0u);
  EXPECT_EQ(r.table.channels[0][1], 11.0);
  EXPECT_EQ(r.table.mir_monitor[2], 2.9);
  EXPECT_EQ(r.table.selected_count(), 4u);
  EXPECT_FALSE(r.table.photons.has_value());
}

TEST(Ingest, NanRowIsSkippedAndCounted) {
  const auto r = ingest_text(
      "shot_id,pmt_adu,bsv_monitor,mir_monitor\n1,10,2,3\n2,nan,2.5,3.1\n3,9,2.4,2.9\n4,12,2.6,3.0\n");
  EXPECT_EQ(r.table.rows(), 3u);
  EXPECT_EQ(r.report.skipped, 1u);
  EXPECT_EQ(r.report.data_rows, 4u);
  ASSERT_EQ(r.report.skip_reasons.size(), 1u);
  EXPECT_NE(r.report.skip_reasons[0].find("line 3"), std::string::npos);
}

TEST(Ingest, HeaderOnlyAndEmptyFilesFail) {
  EXPECT_THROW(ingest_text("shot_id,pmt_adu,bsv_monitor,mir_monitor\n"), InputError);
  EXPECT_THROW(ingest_text(""), InputError);
  EXPECT_THROW(ingest_text("shot_id,pmt_adu,bsv_monitor,mir_monitor\n1,1,1,1\n"), InputError);
}

TEST(Ingest, MissingColumnNamesTheColumn) {
  try {
    ingest_text("shot_id,pmt_adu,mir_monitor\n1,1,1\n2,2,2\n");
    FAIL() << "expected MissingColumnError";
  } catch (const MissingColumnError& e) {
    EXPECT_EQ(e.column(), "bsv_monitor");
    EXPECT_NE(std::string(e.what()).find("bsv_monitor"), std::string::npos);
  }
}

TEST(Ingest, TooManyMalformedRowsAreFatal) {
  EXPECT_NO_THROW(ingest_text(make_csv(500, 250)));  // 2 of 500, limit 5
  EXPECT_THROW(ingest_text(make_csv(500, 10)), InputError);  // 50 of 500
}

TEST(Ingest, OrderingWhitespaceAndExtraChannels) {
  const auto r = ingest_text(
      "\xEF\xBB\xBFmir_monitor, shot_id ,harmonic_adu,pmt_adu,bsv_monitor,note\r\n"
      "1.0,5,7,10,2,a\r\n"
      "1.1,6,8,11,2,b\r\n"
      "1.2,6,9,12,2,c\r\n"
      "\n"
      "1.4,9,11,13,2,e\r\n");
  EXPECT_EQ(r.table.rows(), 3u);
  EXPECT_EQ(r.report.skipped, 1u);  // repeated shot_id
  EXPECT_EQ(r.table.channel_names, (std::vector<std::string>{"pmt_adu", "harmonic_adu"}));
  EXPECT_EQ(r.table.channels[1], (std::vector<double>{7, 8, 11}));
  EXPECT_EQ(r.table.shot_id, (std::vector<std::int64_t>{5, 6, 9}));
}

TEST(PostSelect, ConstantColumnKeepsEverything) {
  auto t = ingest_text("shot_id,pmt_adu,bsv_monitor,mir_monitor\n1,1,1,0.3\n2,2,1,0.3\n3,3,1,0.3\n").table;
  t = postselect_pump_band(std::move(t), 0.2);
  EXPECT_EQ(t.selected_count(), 3u);
}

TEST(PostSelect, GaussianJitterKeepsAboutSixteenPercent) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(1.0, 0.05);
  ShotTable t;
  const std::size_t rows = 200000;
  for (std::size_t i = 0; i < rows; ++i) {
    t.shot_id.push_back(static_cast<std::int64_t>(i));
    t.mir_monitor.push_back(n(rng));
    t.bsv_monitor.push_back(1.0);
  }
  t.channel_names = {"pmt_adu"};
  t.channels = {std::vector<double>(rows, 1.0)};
  t.selected.assign(rows, 1);
  const auto once = postselect_pump_band(t, 0.2);
  const double kept = static_cast<double>(once.selected_count()) / rows;
  EXPECT_NEAR(kept, std::erf(0.2 / std::sqrt(2.0)), 0.004);  // 2 Phi(0.2) - 1 = 0.1585
  const auto twice = postselect_pump_band(once, 0.2);
  EXPECT_EQ(once.selected, twice.selected);
  EXPECT_EQ(postselect_pump_band(t, INFINITY).selected_count(), rows);
  EXPECT_THROW(postselect_pump_band(t, 0.0), EmptySelectionError);
}

TEST(ChannelReport, UsesOnlySelectedShots) {
  const CalibrationSet cal;
  auto t = calibrate(ingest_text(make_csv(400)).table, cal);
  ASSERT_TRUE(t.photons.has_value());
  const auto all = channel_report(t, "pmt_adu", cal, 20, 10);
  EXPECT_EQ(all.n_shots_used, 400u);
  t.selected.assign(400, 0);
  for (std::size_t i = 0; i < 100; ++i) t.selected[i] = 1;
  const auto part = channel_report(t, "pmt_adu", cal, 20, 10);
  EXPECT_EQ(part.n_shots_used, 100u);
  double mean = 0;
  for (std::size_t i = 0; i < 100; ++i) mean += (*t.photons)[0][i] / 100.0;
  EXPECT_NEAR(part.mean_photons, mean, 1e-9 * mean);
  const auto mon = channel_report(t, "bsv_monitor", cal, 20, 10);
  EXPECT_DOUBLE_EQ(mon.mean_photons, 2.5);
  t.selected.assign(400, 0);
  EXPECT_THROW(channel_report(t, "pmt_adu", cal), EmptySelectionError);
  EXPECT_THROW(channel_report(t, "nope_adu", cal), MissingColumnError);
}

TEST(ChannelReport, CalibratesOnTheFlyAndPerChannel) {
  CalibrationSet cal;
  cal.per_channel["pmt_adu"] = DetectorCalibration{};
  cal.per_channel["pmt_adu"].quantum_efficiency = 1.0;
  const auto t = ingest_text(make_csv(100)).table;
  const auto r = channel_report(t, "pmt_adu", cal, 10, 5);
  double adu = 0;
  for (double v : t.channels[0]) adu += v / 100.0;
  EXPECT_NEAR(r.mean_photons, 0.5 * adu * kHandPhotonsPerAdu, 1e-9 * r.mean_photons);
}

TEST(ChannelReport, JsonSchema) {
  const CalibrationSet cal;
  const auto t = calibrate(ingest_text(make_csv(200)).table, cal);
  const auto j = nlohmann::json::parse(to_json(channel_report(t, "pmt_adu", cal, 20, 8)));
  EXPECT_EQ(j["label"], "pmt_adu");
  EXPECT_TRUE(j["mean_photons"].is_number());
  for (const char* k : {"value", "stderr", "n_blocks", "n_shots"}) EXPECT_TRUE(j["g2"].contains(k)) << k;
  EXPECT_EQ(j["g2"]["n_blocks"], 20);
  EXPECT_EQ(j["histogram"]["edges"].size(), 9u);
  EXPECT_EQ(j["histogram"]["counts"].size(), 8u);
  EXPECT_EQ(j["n_shots_used"], 200);
}

TEST(Simulator, ZeroCouplingGivesEmptySideband) {
  SimulatorConfig cfg;
  cfg.n_shots = 2000;
  cfg.kappa = 0.0;
  const auto t = simulate_experiment(cfg, CalibrationSet{});
  for (double v : t.channels[0]) ASSERT_EQ(v, 0.0);
  EXPECT_EQ(t.channel_names[1], "harmonic_adu");
}

TEST(Simulator, DeterministicAndThreadIndependent) {
  SimulatorConfig cfg;
  cfg.n_shots = 10000;
  cfg.seed = 77;
  const int before = omp_get_max_threads();
  omp_set_num_threads(1);
  std::ostringstream a, b, c;
  write_shots_csv(a, simulate_experiment(cfg, CalibrationSet{}));
  omp_set_num_threads(3);
  write_shots_csv(b, simulate_experiment(cfg, CalibrationSet{}));
  omp_set_num_threads(before);
  cfg.seed = 78;
  write_shots_csv(c, simulate_experiment(cfg, CalibrationSet{}));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

TEST(Simulator, CsvRoundTripRecoversPhotons) {
  SimulatorConfig cfg;
  cfg.n_shots = 3000;
  const CalibrationSet cal;
  const auto t = simulate_experiment(cfg, cal);
  std::ostringstream os;
  write_shots_csv(os, t);
  const auto back = calibrate(ingest_text(os.str()).table, cal);
  EXPECT_EQ(back.rows(), t.rows());
  for (std::size_t i = 0; i < back.rows(); ++i) {
    const double photons = (*back.photons)[0][i];
    ASSERT_NEAR(photons, std::round(photons), 1e-9 * std::max(1.0, photons));
    ASSERT_EQ(back.channels[1][i], t.channels[1][i]);
  }
}

TEST(Simulator, SidebandInheritsBsvIntensityStatistics) {
  SimulatorConfig cfg;
  cfg.n_shots = 30000;
  cfg.seed = 5;
  const CalibrationSet cal;
  const auto t = calibrate(simulate_experiment(cfg, cal), cal);
  const auto sb = channel_report(t, "pmt_adu", cal).g2;
  std::vector<double> energy;
  for (double v : t.bsv_monitor) energy.push_back(v / cfg.bsv_monitor_gain);
  const double g2_energy = stats::g2_single_detector(energy);
  // Poisson(kappa E) has <c(c-1)>/<c>^2 = <E^2>/<E>^2 = g2(E) + 1/<E>
  double mean_e = 0;
  for (double v : energy) mean_e += v / energy.size();
  EXPECT_NEAR(sb.value, g2_energy + 1.0 / mean_e, 3 * sb.std_error);
  EXPECT_NEAR(sb.value, 1.0 + 2.0 / 1.6, 4 * sb.std_error);
}

TEST(Simulator, HarmonicAndSidebandRegimes) {
  SimulatorConfig cfg;
  const CalibrationSet cal;
  auto t = postselect_pump_band(calibrate(simulate_experiment(cfg, cal), cal), 0.2);
  const auto hh = channel_report(t, "harmonic_adu", cal);
  const auto sb = channel_report(t, "pmt_adu", cal);
  EXPECT_LT(hh.g2.value, 1.4);
  EXPECT_GT(sb.g2.value, 1.6);
  EXPECT_NEAR(hh.g2.value, 1.0, 3 * hh.g2.std_error + 0.01);
  EXPECT_LT(t.selected_count(), t.rows() / 4);
}

TEST(Simulator, LowEnergyTailIsRemovedByPostSelection) {
  SimulatorConfig cfg;
  cfg.n_shots = 20000;
  cfg.tail_fraction = 0.1;
  cfg.tail_scale = 0.3;
  cfg.harmonic_pump_power = 3.0;
  const CalibrationSet cal;
  auto t = calibrate(simulate_experiment(cfg, cal), cal);
  const auto raw = channel_report(t, "harmonic_adu", cal);
  t = postselect_pump_band(std::move(t), 0.2);
  const auto kept = channel_report(t, "harmonic_adu", cal);
  EXPECT_GT(raw.g2.value, 1.1);
  EXPECT_LT(kept.g2.value, raw.g2.value);
}

TEST(Simulator, ValidatesConfig) {
  SimulatorConfig cfg;
  cfg.bsv_modes = 0.0;
  EXPECT_THROW(simulate_experiment(cfg, CalibrationSet{}), std::invalid_argument);
  cfg = SimulatorConfig{};
  cfg.tail_fraction = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Ingest, NegativeValueIsSkipped) {
  const auto r = ingest_text(
      "shot_id,pmt_adu,bsv_monitor,mir_monitor\n1,10,2,3\n2,-1,2.5,3.1\n3,9,2.4,2.9\n4,12,2.6,3.0\n");
  EXPECT_EQ(r.table.rows(), 3u);
  EXPECT_EQ(r.report.skipped, 1u);
}
