// Acceptance gate: one PASS/FAIL line per criterion. `acceptance` runs all
// nine, `acceptance N` runs only criterion N. Exit status is nonzero if any
// selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sideband/analytic.hpp"
#include "sideband/fock.hpp"
#include "sideband/pipeline.hpp"
#include "sideband/scan.hpp"
#include "sideband/statistics.hpp"

using namespace sideband;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass;
  std::string detail;
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }
double rel_err(complex a, complex b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> r_d(0.0, 2.0), gt_d(0.05, 1.2), amp_d(0.0, 1.0), ph_d(0.0, 2 * kPi);
  double worst = 0.0, worst_leak = 0.0;
  std::size_t max_dim = 0;
  for (int i = 0; i < 200; ++i) {
    const double r = r_d(rng), gt = gt_d(rng), a1 = amp_d(rng), a2 = amp_d(rng);
    const double phi = ph_d(rng), t1 = ph_d(rng), t2 = ph_d(rng);
    const ModelParams p(SqueezeParams(r, phi), HarmonicField(a1, t1), HarmonicField(a2, t2), gt);
    const auto a = sideband_observables(p);
    const auto o = fock::oracle_observables(p, 1e-10);
    worst = std::max({worst, rel_err(a.mean_n, o.sideband.mean_n), rel_err(a.var_x, o.sideband.var_x),
                      rel_err(a.var_p, o.sideband.var_p), rel_err(a.a_sq, o.sideband.a_sq)});
    worst_leak = std::max(worst_leak, o.leakage);
    max_dim = std::max(max_dim, o.cutoff0 * o.cutoff_sb);
  }
  const double elapsed = seconds_since(t0);
  return {worst < 1e-6 && worst_leak < 1e-8 && elapsed < 60.0,
          fmt::format("200 points, max rel err {:.3g} (< 1e-6), max leakage {:.3g} (< 1e-8), largest basis {}, "
                      "{:.1f} s (< 60 s)",
                      worst, worst_leak, max_dim, elapsed)};
}

Outcome squashed_identity() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> r_d(0.0, 3.0), gt_d(1e-6, 1.5), amp_d(0.0, 2.0), ph_d(-kPi, kPi);
  double worst = 0.0;
  for (int i = 0; i < 201; ++i) {
    const double amp = amp_d(rng);
    const ModelParams p(SqueezeParams(r_d(rng), ph_d(rng)), HarmonicField(amp, 0.0), HarmonicField(amp, 0.0),
                        gt_d(rng));
    worst = std::max(worst, std::abs(quadrature_variances(p).var_p - 1.0));
  }
  const auto cut = scan::line_cut(scan::phase_map(scan::bright_squeezing_params(), scan::default_axis(),
                                                  scan::default_axis()),
                                  0.0);
  double worst_row = 0.0;
  for (double v : cut.var_p) worst_row = std::max(worst_row, std::abs(v - 1.0));
  return {worst < 1e-9 && worst_row < 1e-9 && cut.dtheta == scan::default_axis()[100],
          fmt::format("201 random equal-amplitude settings max |var_p - 1| {:.3g}; dtheta = 0 map row max {:.3g} "
                      "(< 1e-9)",
                      worst, worst_row)};
}

Outcome squeezing_case() {
  const double r = std::asinh(std::sqrt(20.0));
  const ModelParams p(SqueezeParams(r, 0.0), HarmonicField(1.0, 0.0), HarmonicField(0.0, 0.0), kPi / 2);
  const auto o = sideband_observables(p);
  const double expect = std::pow(std::sqrt(21.0) - std::sqrt(20.0), 2);
  const double d_n = std::abs(o.mean_n - 20.0);
  const double var_min = std::min(o.var_x, o.var_p);
  const double d_min = std::abs(var_min - expect);
  const double d_prod = std::abs(o.var_x * o.var_p - 1.0);
  // the invariant must also hold for the principal axes at every phi
  double worst_principal = 0.0;
  for (double phi : scan::default_axis()) {
    const ModelParams q(SqueezeParams(r, phi), HarmonicField(1.0, 0.0), HarmonicField(0.0, 0.0), kPi / 2);
    const auto pv = principal_variances(q);
    worst_principal = std::max({worst_principal, std::abs(pv.var_min - expect), std::abs(pv.var_min * pv.var_max - 1),
                                std::abs(sideband_mean_photons(q) - 20.0)});
  }
  const bool pass = d_n < 1e-9 && d_min < 1e-9 && d_prod < 1e-9 && worst_principal < 1e-9;
  return {pass, fmt::format("n = {:.15g}, min variance {:.12g} (expect {:.12g}), product - 1 = {:.3g}, principal-axis "
                            "worst over 201 phi {:.3g}",
                            o.mean_n, var_min, expect, o.var_x * o.var_p - 1.0, worst_principal)};
}

Outcome conversion_efficiency_peak() {
  const double gt = kPi / 4e5;
  const double r = SqueezeParams::from_sinh2(1e11, 0.0).r();
  double peak = 0.0, at = 0.0;
  const int samples = 3600;
  for (int i = 0; i < samples; ++i) {
    const double phi = 2 * kPi * i / samples;
    const double e = conversion_efficiency(ModelParams(SqueezeParams(r, phi), HarmonicField(1, 0), HarmonicField(1, 0), gt));
    if (e > peak) peak = e, at = phi;
  }
  return {peak >= 1e-10 && peak <= 4e-10,
          fmt::format("peak efficiency {:.6g} at phi = {:.4f} rad, required in [1e-10, 4e-10]", peak, at)};
}

Outcome estimator_calibration() {
  const double r_sv = std::asinh(std::sqrt(5.0));
  int ok_p = 0, ok_t = 0, ok_s = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto p = stats::block_g2(stats::sample_poisson(50.0, 100000, 1000 + seed), 20).pooled;
    const auto t = stats::block_g2(stats::sample_thermal(20.0, 100000, 2000 + seed), 20).pooled;
    const auto s = stats::block_g2(stats::sample_squeezed_vacuum_counts(r_sv, 1, 100000, 3000 + seed), 20).pooled;
    ok_p += std::abs(p.value - 1.0) <= 3 * p.std_error;
    ok_t += std::abs(t.value - 2.0) <= 3 * t.std_error;
    ok_s += std::abs(s.value - 3.2) <= 3 * s.std_error;
  }
  return {ok_p >= 28 && ok_t >= 28 && ok_s >= 28,
          fmt::format("seeds within 3 stderr: poisson {}/30, thermal {}/30, squeezed vacuum {}/30 (need 28)", ok_p,
                      ok_t, ok_s)};
}

Outcome dichotomy() {
  const auto t0 = std::chrono::steady_clock::now();
  const pipeline::CalibrationSet cal;
  double worst_h = 0.0, worst_s = INFINITY;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    pipeline::SimulatorConfig cfg;
    cfg.seed = seed;
    cfg.n_shots = 30000;
    cfg.bsv_modes = 1.6;
    cfg.pump_jitter = 0.05;
    auto t = pipeline::postselect_pump_band(pipeline::calibrate(pipeline::simulate_experiment(cfg, cal), cal), 0.2);
    worst_h = std::max(worst_h, pipeline::channel_report(t, "harmonic_adu", cal).g2.value);
    worst_s = std::min(worst_s, pipeline::channel_report(t, "pmt_adu", cal).g2.value);
  }
  const double elapsed = seconds_since(t0);
  return {worst_h < 1.4 && worst_s > 1.6 && elapsed < 30.0,
          fmt::format("10 seeds: max harmonic g2 {:.4f} (< 1.4), min sideband g2 {:.4f} (> 1.6), {:.1f} s (< 30 s)",
                      worst_h, worst_s, elapsed)};
}

Outcome scaling() {
  const pipeline::CalibrationSet cal;
  std::vector<double> x, y, h;
  for (int k = 1; k <= 5; ++k) {
    pipeline::SimulatorConfig cfg;
    cfg.seed = 100 + static_cast<std::uint64_t>(k);
    cfg.bsv_sinh2_r = 0.5e4 * k;
    const auto t = pipeline::calibrate(pipeline::simulate_experiment(cfg, cal), cal);
    x.push_back(pipeline::channel_report(t, "bsv_monitor", cal).mean_photons / cfg.bsv_monitor_gain);
    y.push_back(pipeline::channel_report(t, "pmt_adu", cal).mean_photons);
    h.push_back(pipeline::channel_report(t, "harmonic_adu", cal).mean_photons);
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
  for (double v : h) hmean += v / n;
  const double spread = (*hmax - *hmin) / hmean;
  return {r2 > 0.999 && spread < 0.01,
          fmt::format("R^2 = {:.6f} (> 0.999), slope {:.4g}, harmonic mean spread {:.3f}% (< 1%)", r2, sxy / sxx,
                      100 * spread)};
}

Outcome calibration_formula() {
  const pipeline::DetectorCalibration cal;
  const double got = pipeline::adu_to_photons(4096.0, cal);
  // volts per ADU * boxcar sensitivity / (impedance * rep rate) = charge per pulse; / (e * gain) / QE
  const double hand = (20.0 / 4096.0) * 4096.0 * 0.02 / (1e6 * 1e3) / (1.602176634e-19 * 1e7) / 0.5;
  const double target = 10.0;
  const bool pass = std::abs(got - target) <= 1e-3 * target;
  return {pass, fmt::format("adu_to_photons(4096) = {:.10g}; hand-computed formula {:.10g} (rel diff {:.2g}); "
                            "required 10.0 +/- 0.1%",
                            got, hand, rel_err(got, hand))};
}

Outcome heisenberg() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> r_d(0.0, 13.0), gt_d(1e-6, 2.0), amp_d(0.0, 2.0), ph_d(-kPi, kPi);
  std::size_t violations = 0;
  double lowest = INFINITY;
  for (int i = 0; i < 10000; ++i) {
    const ModelParams p(SqueezeParams(r_d(rng), ph_d(rng)), HarmonicField(amp_d(rng), ph_d(rng)),
                        HarmonicField(amp_d(rng), ph_d(rng)), gt_d(rng));
    const auto v = quadrature_variances(p);
    const double prod = v.var_x * v.var_p;
    lowest = std::min(lowest, prod);
    if (!(prod >= 1.0 - 1e-9)) ++violations;
  }
  return {violations == 0, fmt::format("10000 draws, {} violations, min var_x var_p = {:.12g}", violations, lowest)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"squashed-state identity", squashed_identity},
      {"full up-conversion squeezing", squeezing_case},
      {"conversion efficiency", conversion_efficiency_peak},
      {"estimator calibration", estimator_calibration},
      {"harmonic/sideband dichotomy", dichotomy},
      {"sideband scaling", scaling},
      {"calibration formula", calibration_formula},
      {"Heisenberg bound", heisenberg},
  };
  std::vector<std::size_t> selected;
  if (argc > 1) {
    const int k = std::atoi(argv[1]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::cerr << "usage: acceptance [1-" << criteria.size() << "]\n";
      return 2;
    }
    selected.push_back(static_cast<std::size_t>(k - 1));
  } else {
    for (std::size_t i = 0; i < criteria.size(); ++i) selected.push_back(i);
  }
  bool all = true;
  for (std::size_t i : selected) {
    Outcome o{false, ""};
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << fmt::format("criterion {}: {} : {} : {}", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                             o.detail)
              << std::endl;
  }
  return all ? 0 : 1;
}
