#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sideband/analytic.hpp"

namespace sideband::selfcheck {

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double bound = 0.0;
  std::string detail;
};

struct Options {
  std::size_t oracle_points = 20;
  std::uint64_t seed = 1;
  double tol = 1e-6;
  double target_leakage = 1e-10;
  std::size_t max_total_cutoff = 4096;
};

/// |a - b| / max(|b|, 1e-12): relative error with a floor for values that vanish.
double relative_error(double a, double b);
double relative_error(complex a, complex b);

/// Seeded random parameters with r in [0, 2], gamma t in [0.05, 1.2],
/// amplitudes in [0, 1] and uniform phases.
std::vector<ModelParams> oracle_sweep(std::size_t points, std::uint64_t seed);

CheckResult check_oracle_equivalence(const Options& opts);
CheckResult check_squashed_identity();
CheckResult check_squeezing_case();
CheckResult check_conversion_efficiency();
CheckResult check_estimators(std::uint64_t seed, std::size_t seeds = 10);
CheckResult check_dichotomy(std::uint64_t seed, std::size_t seeds = 3);
CheckResult check_scaling(std::uint64_t seed);
CheckResult check_calibration();
CheckResult check_heisenberg(std::uint64_t seed, std::size_t draws = 10000);

/// All of the above in order; progress lines go to `log` when non-null.
std::vector<CheckResult> run_all(const Options& opts, std::ostream* log = nullptr);

std::string to_json(const CheckResult& r);

}  // namespace sideband::selfcheck
