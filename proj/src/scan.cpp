#include "sideband/scan.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "sideband/output.hpp"

namespace sideband::scan {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) throw std::invalid_argument("linspace needs at least one point");
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument("linspace bounds must be finite");
  std::vector<double> v(n, lo);
  if (n == 1) return v;
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + static_cast<double>(i) * step;
  v.back() = hi;
  return v;
}

std::vector<double> default_axis() { return linspace(-std::numbers::pi, std::numbers::pi, 201); }

ModelParams bright_squeezing_params() {
  return ModelParams(SqueezeParams::from_sinh2(1e11, 0.0), HarmonicField(1.0, 0.0), HarmonicField(1.0, 0.0),
                     std::numbers::pi / 4e5);
}

namespace {

void check_axis(const std::vector<double>& axis, const char* name) {
  if (axis.empty()) throw std::invalid_argument(fmt::format("{} axis is empty", name));
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i])) throw std::invalid_argument(fmt::format("{} axis has a non-finite value", name));
    if (i > 0 && !(axis[i] > axis[i - 1])) {
      throw std::invalid_argument(fmt::format("{} axis is not strictly increasing at index {}", name, i));
    }
  }
}

MapGrid empty_grid(const std::vector<double>& phi_axis, const std::vector<double>& dtheta_axis) {
  check_axis(phi_axis, "phi");
  check_axis(dtheta_axis, "dtheta");
  MapGrid g;
  g.phi_axis = phi_axis;
  g.dtheta_axis = dtheta_axis;
  const std::size_t size = phi_axis.size() * dtheta_axis.size();
  g.plane_n.resize(size);
  g.plane_var_x.resize(size);
  g.plane_var_p.resize(size);
  return g;
}

void fill_row(const ModelParams& base, MapGrid& g, std::size_t row) {
  ModelParams p = base;
  p.eps1 = HarmonicField(base.eps1.amp(), g.dtheta_axis[row]);
  p.eps2 = HarmonicField(base.eps2.amp(), 0.0);
  for (std::size_t col = 0; col < g.cols(); ++col) {
    p.squeeze = SqueezeParams(base.squeeze.r(), g.phi_axis[col]);
    const SidebandObservables o = sideband_observables(p);
    const std::size_t k = g.index(row, col);
    g.plane_n[k] = o.mean_n;
    g.plane_var_x[k] = o.var_x;
    g.plane_var_p[k] = o.var_p;
  }
}

}  // namespace

MapGrid phase_map(const ModelParams& base, const std::vector<double>& phi_axis,
                  const std::vector<double>& dtheta_axis) {
  MapGrid g = empty_grid(phi_axis, dtheta_axis);
  const auto rows = static_cast<std::ptrdiff_t>(g.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t row = 0; row < rows; ++row) fill_row(base, g, static_cast<std::size_t>(row));
  return g;
}

MapGrid phase_map_serial(const ModelParams& base, const std::vector<double>& phi_axis,
                         const std::vector<double>& dtheta_axis) {
  MapGrid g = empty_grid(phi_axis, dtheta_axis);
  for (std::size_t row = 0; row < g.rows(); ++row) fill_row(base, g, row);
  return g;
}

PhiSeries line_cut(const MapGrid& grid, double dtheta) {
  const auto& axis = grid.dtheta_axis;
  if (axis.empty()) throw std::invalid_argument("line cut of an empty grid");
  const double slack = axis.size() > 1 ? 0.5 * (axis[1] - axis[0]) : 1e-12;
  if (!(dtheta >= axis.front() - slack && dtheta <= axis.back() + slack)) {
    throw std::invalid_argument(
        fmt::format("dtheta {} outside the grid range [{}, {}]", dtheta, axis.front(), axis.back()));
  }
  std::size_t row = 0;
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (std::abs(axis[i] - dtheta) < std::abs(axis[row] - dtheta)) row = i;
  }
  PhiSeries s;
  s.dtheta = axis[row];
  s.phi = grid.phi_axis;
  const auto begin = static_cast<std::ptrdiff_t>(grid.index(row, 0));
  const auto end = begin + static_cast<std::ptrdiff_t>(grid.cols());
  s.n.assign(grid.plane_n.begin() + begin, grid.plane_n.begin() + end);
  s.var_x.assign(grid.plane_var_x.begin() + begin, grid.plane_var_x.begin() + end);
  s.var_p.assign(grid.plane_var_p.begin() + begin, grid.plane_var_p.begin() + end);
  return s;
}

PrincipalSeries squeezing_case(const std::vector<double>& phi_axis) {
  check_axis(phi_axis, "phi");
  const double r = std::asinh(std::sqrt(20.0));
  PrincipalSeries s;
  s.phi = phi_axis;
  for (const double phi : phi_axis) {
    const ModelParams p(SqueezeParams(r, phi), HarmonicField(1.0, 0.0), HarmonicField(0.0, 0.0),
                        std::numbers::pi / 2.0);
    const SidebandObservables o = sideband_observables(p);
    s.n.push_back(o.mean_n);
    s.var_x.push_back(o.var_x);
    s.var_p.push_back(o.var_p);
    const PrincipalVariances pv = principal_variances(p);
    s.var_min.push_back(pv.var_min);
    s.var_max.push_back(pv.var_max);
  }
  return s;
}

std::string_view to_string(StateLabel label) {
  switch (label) {
    case StateLabel::MinimumUncertainty: return "minimum-uncertainty";
    case StateLabel::Squeezed: return "squeezed";
    case StateLabel::Squashed: return "squashed";
    case StateLabel::ExcessBoth: return "excess-both";
  }
  return "unknown";
}

StateLabel classify_state(double var_x, double var_p, double tol) {
  if (!(var_x > 0.0) || !(var_p > 0.0) || !std::isfinite(var_x) || !std::isfinite(var_p)) {
    throw std::invalid_argument(fmt::format("variances must be positive, got ({}, {})", var_x, var_p));
  }
  if (!(tol >= 0.0)) throw std::invalid_argument(fmt::format("tolerance must be >= 0, got {}", tol));
  if (std::min(var_x, var_p) < 1.0 - tol) return StateLabel::Squeezed;
  const bool x_min = std::abs(var_x - 1.0) <= tol;
  const bool p_min = std::abs(var_p - 1.0) <= tol;
  if (x_min && p_min) return StateLabel::MinimumUncertainty;
  if ((x_min && var_p > 1.0 + tol) || (p_min && var_x > 1.0 + tol)) return StateLabel::Squashed;
  return StateLabel::ExcessBoth;
}

std::size_t heisenberg_violations(const MapGrid& grid, double tol) {
  std::size_t bad = 0;
  for (std::size_t k = 0; k < grid.plane_var_x.size(); ++k) {
    if (!(grid.plane_var_x[k] * grid.plane_var_p[k] >= 1.0 - tol)) ++bad;
  }
  return bad;
}

void write_plane_csv(std::ostream& os, const MapGrid& grid, Plane plane) {
  const std::vector<double>& data =
      plane == Plane::MeanN ? grid.plane_n : (plane == Plane::VarX ? grid.plane_var_x : grid.plane_var_p);
  for (std::size_t row = 0; row < grid.rows(); ++row) {
    for (std::size_t col = 0; col < grid.cols(); ++col) {
      if (col) os << ',';
      os << out::number(data[grid.index(row, col)]);
    }
    os << '\n';
  }
}

void write_axes_csv(std::ostream& os, const MapGrid& grid) {
  os << "axis,index,value\n";
  for (std::size_t i = 0; i < grid.phi_axis.size(); ++i) os << "phi," << i << ',' << out::number(grid.phi_axis[i]) << '\n';
  for (std::size_t i = 0; i < grid.dtheta_axis.size(); ++i) {
    os << "dtheta," << i << ',' << out::number(grid.dtheta_axis[i]) << '\n';
  }
}

void write_series_csv(std::ostream& os, const PhiSeries& s, double tol) {
  os << "phi,n,var_x,var_p,label\n";
  for (std::size_t i = 0; i < s.phi.size(); ++i) {
    os << out::number(s.phi[i]) << ',' << out::number(s.n[i]) << ',' << out::number(s.var_x[i]) << ','
       << out::number(s.var_p[i]) << ',' << to_string(classify_state(s.var_x[i], s.var_p[i], tol)) << '\n';
  }
}

}  // namespace sideband::scan
