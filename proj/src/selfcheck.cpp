#include "sideband/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "sideband/fock.hpp"
#include "sideband/output.hpp"
#include "sideband/pipeline.hpp"
#include "sideband/random.hpp"
#include "sideband/scan.hpp"
#include "sideband/statistics.hpp"

namespace sideband::selfcheck {

double relative_error(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }

double relative_error(complex a, complex b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }

std::vector<ModelParams> oracle_sweep(std::size_t points, std::uint64_t seed) {
  Engine rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<ModelParams> out;
  out.reserve(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double r = 2.0 * u(rng);
    const double gt = 0.05 + 1.15 * u(rng);
    const double e1 = u(rng), e2 = u(rng);
    const double phi = two_pi * u(rng), t1 = two_pi * u(rng), t2 = two_pi * u(rng);
    out.emplace_back(SqueezeParams(r, phi), HarmonicField(e1, t1), HarmonicField(e2, t2), gt);
  }
  return out;
}

CheckResult check_oracle_equivalence(const Options& opts) {
  fock::ConvergeOptions conv;
  conv.max_total_cutoff = opts.max_total_cutoff;
  double worst = 0.0;
  for (const ModelParams& p : oracle_sweep(opts.oracle_points, opts.seed)) {
    const SidebandObservables a = sideband_observables(p);
    const auto o = fock::oracle_observables(p, opts.target_leakage, conv);
    worst = std::max({worst, relative_error(a.mean_n, o.sideband.mean_n), relative_error(a.var_x, o.sideband.var_x),
                      relative_error(a.var_p, o.sideband.var_p), relative_error(a.a_sq, o.sideband.a_sq)});
  }
  return {"oracle_equivalence", worst < opts.tol, worst, opts.tol,
          fmt::format("{} random points, worst relative error", opts.oracle_points)};
}

CheckResult check_squashed_identity() {
  const auto axis = scan::default_axis();
  const auto grid = scan::phase_map(scan::bright_squeezing_params(), axis, {0.0});
  double worst = 0.0;
  for (const double v : grid.plane_var_p) worst = std::max(worst, std::abs(v - 1.0));
  return {"squashed_identity", worst < 1e-9, worst, 1e-9, "max |var_p - 1| on the dtheta = 0 row"};
}

CheckResult check_squeezing_case() {
  const auto s = scan::squeezing_case(scan::default_axis());
  const double target_min = std::pow(std::sqrt(21.0) - std::sqrt(20.0), 2);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.phi.size(); ++i) {
    worst = std::max({worst, std::abs(s.n[i] - 20.0), std::abs(s.var_min[i] - target_min),
                      std::abs(s.var_min[i] * s.var_max[i] - 1.0)});
  }
  const std::size_t zero = s.phi.size() / 2;  // phi = 0 on the default axis
  worst = std::max({worst, std::abs(s.var_x[zero] - target_min), std::abs(s.var_x[zero] * s.var_p[zero] - 1.0)});
  return {"squeezing_case", worst < 1e-9, worst, 1e-9,
          "max deviation of n, principal variances and var_x, var_x var_p at phi = 0"};
}

CheckResult check_conversion_efficiency() {
  ModelParams p = scan::bright_squeezing_params();
  double peak = 0.0;
  const std::size_t points = 720;
  for (std::size_t i = 0; i < points; ++i) {
    p.squeeze = SqueezeParams(p.squeeze.r(), 2.0 * std::numbers::pi * static_cast<double>(i) / points);
    peak = std::max(peak, conversion_efficiency(p));
  }
  return {"conversion_efficiency", peak >= 1e-10 && peak <= 4e-10, peak, 4e-10, "peak over phi, window [1e-10, 4e-10]"};
}

CheckResult check_estimators(std::uint64_t seed, std::size_t seeds) {
  const std::size_t shots = 100000, blocks = 20;
  const double r_sq = std::asinh(std::sqrt(5.0));
  std::size_t worst_hits = seeds;
  for (int kind = 0; kind < 3; ++kind) {
    const double expected = kind == 0 ? 1.0 : (kind == 1 ? 2.0 : 3.2);
    std::size_t hits = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
      const std::uint64_t sd = chunk_seed(seed, 1000 * static_cast<std::uint64_t>(kind) + s);
      const auto series = kind == 0 ? stats::sample_poisson(50.0, shots, sd)
                                    : (kind == 1 ? stats::sample_thermal(20.0, shots, sd)
                                                 : stats::sample_squeezed_vacuum_counts(r_sq, 1, shots, sd));
      const auto g2 = stats::block_g2(series, blocks).pooled;
      if (std::abs(g2.value - expected) <= 3.0 * g2.std_error) ++hits;
    }
    worst_hits = std::min(worst_hits, hits);
  }
  const auto needed = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(seeds)));
  return {"estimator_calibration", worst_hits >= needed, static_cast<double>(worst_hits), static_cast<double>(needed),
          fmt::format("fewest seeds (of {}) within 3 stderr over Poisson, thermal, squeezed vacuum", seeds)};
}

namespace {

struct SimulatedReports {
  pipeline::ChannelReport sideband;
  pipeline::ChannelReport harmonic;
  double bsv_mean = 0.0;
};

SimulatedReports simulate_reports(const pipeline::SimulatorConfig& cfg, bool postselect) {
  const pipeline::CalibrationSet cal;
  auto table = pipeline::calibrate(pipeline::simulate_experiment(cfg, cal), cal);
  if (postselect) table = pipeline::postselect_pump_band(std::move(table), 0.2);
  SimulatedReports r;
  r.sideband = pipeline::channel_report(table, "pmt_adu", cal);
  r.harmonic = pipeline::channel_report(table, "harmonic_adu", cal);
  double sum = 0.0;
  for (const double v : table.bsv_monitor) sum += (v - cfg.bsv_monitor_offset) / cfg.bsv_monitor_gain;
  r.bsv_mean = sum / static_cast<double>(table.rows());
  return r;
}

}  // namespace

CheckResult check_dichotomy(std::uint64_t seed, std::size_t seeds) {
  double worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < seeds; ++s) {
    pipeline::SimulatorConfig cfg;
    cfg.seed = chunk_seed(seed, 5000 + s);
    const auto r = simulate_reports(cfg, true);
    worst_margin = std::min({worst_margin, 1.4 - r.harmonic.g2.value, r.sideband.g2.value - 1.6});
  }
  return {"g2_dichotomy", worst_margin > 0.0, worst_margin, 0.0,
          fmt::format("min over {} seeds of (1.4 - harmonic g2, sideband g2 - 1.6)", seeds)};
}

CheckResult check_scaling(std::uint64_t seed) {
  std::vector<double> x, y, h;
  for (int k = 1; k <= 5; ++k) {
    pipeline::SimulatorConfig cfg;
    cfg.seed = chunk_seed(seed, 7000 + static_cast<std::uint64_t>(k));
    cfg.bsv_sinh2_r = 0.5e4 * k;
    const auto r = simulate_reports(cfg, false);
    x.push_back(r.bsv_mean);
    y.push_back(r.sideband.mean_photons);
    h.push_back(r.harmonic.mean_photons);
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double r2 = sxy * sxy / (sxx * syy);
  const auto [hmin, hmax] = std::minmax_element(h.begin(), h.end());
  double hmean = 0;
  for (const double v : h) hmean += v / n;
  const double spread = (*hmax - *hmin) / hmean;
  return {"bsv_scaling", r2 > 0.999 && spread < 0.01, r2, 0.999,
          fmt::format("R^2 of sideband vs BSV mean; harmonic spread {:.3g}", spread)};
}

CheckResult check_calibration() {
  // 20 V / 4096 * 4096 ADU * 0.02 / (1e6 Ohm * 1e3 Hz) / (1.602176634e-19 C * 1e7) / 0.5
  const double hand = 499.32072595686105;
  const double got = pipeline::adu_to_photons(4096.0, pipeline::DetectorCalibration{});
  const double rel = std::abs(got - hand) / hand;
  return {"calibration_formula", rel < 1e-3, got, hand, "adu_to_photons(4096) with default calibration"};
}

CheckResult check_heisenberg(std::uint64_t seed, std::size_t draws) {
  Engine rng(chunk_seed(seed, 9000));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  std::size_t violations = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < draws; ++i) {
    const ModelParams p(SqueezeParams(6.0 * u(rng), two_pi * u(rng)), HarmonicField(2.0 * u(rng), two_pi * u(rng)),
                        HarmonicField(2.0 * u(rng), two_pi * u(rng)), 0.01 + 2.0 * u(rng));
    const auto v = quadrature_variances(p);
    const double prod = v.var_x * v.var_p;
    worst = std::min(worst, prod);
    if (!(prod >= 1.0 - 1e-9)) ++violations;
  }
  return {"heisenberg", violations == 0, worst, 1.0 - 1e-9,
          fmt::format("{} violations in {} random draws; measured = min var_x var_p", violations, draws)};
}

std::vector<CheckResult> run_all(const Options& opts, std::ostream* log) {
  std::vector<CheckResult> results;
  const auto record = [&](CheckResult r) {
    if (log) *log << fmt::format("{:<24} {}  measured {:.6g} (bound {:.6g})\n", r.name, r.pass ? "PASS" : "FAIL", r.measured, r.bound);
    results.push_back(std::move(r));
  };
  record(check_oracle_equivalence(opts));
  record(check_squashed_identity());
  record(check_squeezing_case());
  record(check_conversion_efficiency());
  record(check_estimators(opts.seed));
  record(check_dichotomy(opts.seed));
  record(check_scaling(opts.seed));
  record(check_calibration());
  record(check_heisenberg(opts.seed));
  return results;
}

std::string to_json(const CheckResult& r) {
  return out::JsonObject()
      .add("name", r.name)
      .add("pass", r.pass)
      .add("measured", r.measured)
      .add("bound", r.bound)
      .add("detail", r.detail)
      .str();
}

}  // namespace sideband::selfcheck
