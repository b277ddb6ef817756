#pragma once

#include <cstddef>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "sideband/analytic.hpp"

namespace sideband::scan {

/// n evenly spaced points over [lo, hi]; n = 1 gives {lo}.
std::vector<double> linspace(double lo, double hi, std::size_t n);

/// 201 points over [-pi, pi].
std::vector<double> default_axis();

/// sinh^2 r = 1e11, gamma t = pi / 4e5, |eps1| = |eps2| = 1, all phases zero.
ModelParams bright_squeezing_params();

/// Row-major planes of size dtheta_axis.size() x phi_axis.size().
struct MapGrid {
  std::vector<double> phi_axis;
  std::vector<double> dtheta_axis;
  std::vector<double> plane_n;
  std::vector<double> plane_var_x;
  std::vector<double> plane_var_p;

  std::size_t rows() const { return dtheta_axis.size(); }
  std::size_t cols() const { return phi_axis.size(); }
  std::size_t index(std::size_t row, std::size_t col) const { return row * cols() + col; }
};

/// Evaluates the analytic model at every (dtheta, phi) with theta2 = 0 and
/// theta1 = dtheta; everything else comes from `base`. Axes must be non-empty
/// and strictly increasing. OpenMP over rows.
MapGrid phase_map(const ModelParams& base, const std::vector<double>& phi_axis,
                  const std::vector<double>& dtheta_axis);
MapGrid phase_map_serial(const ModelParams& base, const std::vector<double>& phi_axis,
                         const std::vector<double>& dtheta_axis);

/// Observables along phi; also used for the row extracted by line_cut().
struct PhiSeries {
  double dtheta = 0.0;
  std::vector<double> phi;
  std::vector<double> n;
  std::vector<double> var_x;
  std::vector<double> var_p;
};

/// Nearest grid row to `dtheta`, which must lie within the axis range.
PhiSeries line_cut(const MapGrid& grid, double dtheta);

/// PhiSeries plus the principal-axis variances at every phi.
struct PrincipalSeries : PhiSeries {
  std::vector<double> var_min;
  std::vector<double> var_max;
};

/// Full up-conversion of the perturbing squeezed vacuum: eps2 = 0,
/// gamma t = pi / 2, |eps1| = 1, sinh r = sqrt(20), evaluated over phi.
PrincipalSeries squeezing_case(const std::vector<double>& phi_axis);

enum class StateLabel { MinimumUncertainty, Squeezed, Squashed, ExcessBoth };

std::string_view to_string(StateLabel label);

/// Squeezed if either variance is below 1 - tol; minimum-uncertainty if both
/// are within tol of 1; squashed if one is within tol and the other above;
/// excess-both otherwise. Throws std::invalid_argument for non-positive input.
StateLabel classify_state(double var_x, double var_p, double tol = 1e-6);

/// Grid points with var_x * var_p < 1 - tol.
std::size_t heisenberg_violations(const MapGrid& grid, double tol = 1e-9);

enum class Plane { MeanN, VarX, VarP };

/// One CSV line per dtheta row, one column per phi.
void write_plane_csv(std::ostream& os, const MapGrid& grid, Plane plane);
/// "axis,index,value" rows for both axes.
void write_axes_csv(std::ostream& os, const MapGrid& grid);
/// "phi,n,var_x,var_p,label" rows.
void write_series_csv(std::ostream& os, const PhiSeries& series, double tol = 1e-6);

}  // namespace sideband::scan
