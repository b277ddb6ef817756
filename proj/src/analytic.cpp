#include "sideband/analytic.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace sideband {

namespace {

constexpr double kSeriesThreshold = 1e-12;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(fmt::format("{} must be finite, got {}", what, v));
  }
}

// Shared by every observable: the rotated channel amplitudes u = e^{-i phi/2} f
// and w = e^{i phi/2} g. In these variables
//   f cosh r - g e^{i phi} sinh r = e^{i phi/2} (e^r (u - w) + e^{-r} (u + w)) / 2
// which stays accurate when cosh r and sinh r are both ~1e5 and nearly cancel.
struct RotatedChannels {
  complex u;
  complex w;
  double m_sq;
  double r;
};

RotatedChannels rotate(const ModelParams& params) {
  const CouplingSet c = derive_couplings(params);
  const double half_phi = 0.5 * params.squeeze.phi();
  return {c.f * std::polar(1.0, -half_phi), c.g * std::polar(1.0, half_phi), c.m_sq,
          params.squeeze.r()};
}

}  // namespace

double canonical_phase(double radians) {
  require_finite(radians, "phase");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double p = std::remainder(radians, two_pi);  // [-pi, pi]
  if (p <= -std::numbers::pi) p += two_pi;
  return p;
}

SqueezeParams::SqueezeParams(double r, double phi) : r_(r), phi_(canonical_phase(phi)) {
  require_finite(r, "squeezing r");
  if (r < 0.0) throw std::invalid_argument(fmt::format("squeezing r must be >= 0, got {}", r));
}

SqueezeParams SqueezeParams::from_sinh2(double sinh2_r, double phi) {
  require_finite(sinh2_r, "sinh^2 r");
  if (sinh2_r < 0.0) {
    throw std::invalid_argument(fmt::format("sinh^2 r must be >= 0, got {}", sinh2_r));
  }
  return SqueezeParams(std::asinh(std::sqrt(sinh2_r)), phi);
}

double SqueezeParams::sinh2() const {
  const double s = std::sinh(r_);
  return s * s;
}

HarmonicField::HarmonicField(double amp, double theta) : amp_(amp), theta_(canonical_phase(theta)) {
  require_finite(amp, "harmonic amplitude");
  if (amp < 0.0) {
    throw std::invalid_argument(fmt::format("harmonic amplitude must be >= 0, got {}", amp));
  }
}

ModelParams::ModelParams(SqueezeParams sq, HarmonicField e1, HarmonicField e2, double gt)
    : squeeze(sq), eps1(e1), eps2(e2), gamma_t(gt) {
  require_finite(gt, "gamma_t");
  if (gt <= 0.0) throw std::invalid_argument(fmt::format("gamma_t must be > 0, got {}", gt));
}

CouplingSet derive_couplings(const ModelParams& params) {
  CouplingSet c;
  c.g = params.gamma_t * params.eps1.value();
  c.f = params.gamma_t * params.eps2.value();
  c.n_sq = std::norm(c.f) - std::norm(c.g);

  const double x = c.n_sq;
  if (std::abs(x) < kSeriesThreshold) {
    // cosh N and sinh N / N are even in N: series in N^2 covers both branches.
    c.cosh_n = 1.0 + x / 2.0 + x * x / 24.0 + x * x * x / 720.0;
    c.sinhc_n = 1.0 + x / 6.0 + x * x / 120.0 + x * x * x / 5040.0;
  } else if (x > 0.0) {
    const double n = std::sqrt(x);
    c.cosh_n = std::cosh(n);
    c.sinhc_n = std::sinh(n) / n;
  } else {
    const double n = std::sqrt(-x);
    c.cosh_n = std::cos(n);
    c.sinhc_n = std::sin(n) / n;
  }
  c.m_sq = c.sinhc_n * c.sinhc_n;
  return c;
}

double sideband_mean_photons(const ModelParams& params) {
  const RotatedChannels ch = rotate(params);
  const complex amp = 0.5 * (std::exp(ch.r) * (ch.u - ch.w) + std::exp(-ch.r) * (ch.u + ch.w));
  return ch.m_sq * std::norm(amp);
}

SidebandMoments sideband_moments(const ModelParams& params) {
  const RotatedChannels ch = rotate(params);
  const complex diff = ch.u - ch.w;
  const complex sum = ch.u + ch.w;
  // fg cosh 2r - (u^2 + w^2) sinh 2r / 2, regrouped by e^{+-2r}
  const complex bracket = 0.25 * (std::exp(-2.0 * ch.r) * sum * sum - std::exp(2.0 * ch.r) * diff * diff);
  SidebandMoments m;
  m.a_sq = ch.m_sq * bracket;
  m.adag_sq = std::conj(m.a_sq);
  m.mean_n = sideband_mean_photons(params);
  return m;
}

QuadratureVariances quadrature_variances(const ModelParams& params) {
  // X(t) = cosh N X_sb + z a0 e^{-i phi/2} + h.c. with z_x = sinhc N (w + conj u)
  // and z_p = -i sinhc N (w - conj u). Over squeezed vacuum the a0 term has
  // variance e^{-2r} Re(z)^2 + e^{2r} Im(z)^2. Adding cosh^2 N gives
  // 1 + 2<n> +- 2 Re<a^2> without subtracting e^{2r}-sized terms.
  const CouplingSet c = derive_couplings(params);
  const RotatedChannels ch = rotate(params);
  const complex zx = c.sinhc_n * (ch.w + std::conj(ch.u));
  const complex zp = complex(0.0, -1.0) * c.sinhc_n * (ch.w - std::conj(ch.u));
  const double lo = std::exp(-2.0 * ch.r), hi = std::exp(2.0 * ch.r);
  const double vac = c.cosh_n * c.cosh_n;
  const auto var = [&](complex z) { return vac + lo * z.real() * z.real() + hi * z.imag() * z.imag(); };
  return {var(zx), var(zp)};
}

SidebandObservables sideband_observables(const ModelParams& params) {
  const SidebandMoments m = sideband_moments(params);
  const QuadratureVariances v = quadrature_variances(params);
  return {m.mean_n, v.var_x, v.var_p, m.a_sq};
}

PrincipalVariances principal_variances(const ModelParams& params) {
  const SidebandMoments m = sideband_moments(params);
  const double twice = 2.0 * std::abs(m.a_sq);
  return {1.0 + 2.0 * m.mean_n - twice, 1.0 + 2.0 * m.mean_n + twice};
}

double conversion_efficiency(const ModelParams& params) {
  const double s2 = params.squeeze.sinh2();
  if (!(s2 > 0.0)) {
    throw std::domain_error("conversion efficiency is undefined for r = 0 (no perturbing photons)");
  }
  return sideband_mean_photons(params) / s2;
}

}  // namespace sideband
