#pragma once

#include <complex>

namespace sideband {

using complex = std::complex<double>;

/// Maps an angle onto (-pi, pi].
double canonical_phase(double radians);

/// Squeezing parameter xi = r e^{i phi} of the perturbing squeezed vacuum.
class SqueezeParams {
 public:
  SqueezeParams() = default;
  SqueezeParams(double r, double phi);

  /// Builds the squeeze from its mean photon number sinh^2 r.
  static SqueezeParams from_sinh2(double sinh2_r, double phi);

  double r() const { return r_; }
  double phi() const { return phi_; }
  double sinh2() const;

 private:
  double r_ = 0.0;
  double phi_ = 0.0;
};

/// Classical coherent amplitude |eps| e^{i theta} of one harmonic.
class HarmonicField {
 public:
  HarmonicField() = default;
  HarmonicField(double amp, double theta);

  double amp() const { return amp_; }
  double theta() const { return theta_; }
  complex value() const { return std::polar(amp_, theta_); }

 private:
  double amp_ = 0.0;
  double theta_ = 0.0;
};

/// Full input of the single-sideband wave-mixing model. eps1 feeds the
/// sum-frequency channel, eps2 the difference-frequency channel.
struct ModelParams {
  SqueezeParams squeeze;
  HarmonicField eps1;
  HarmonicField eps2;
  double gamma_t = 1.0;

  ModelParams() = default;
  ModelParams(SqueezeParams sq, HarmonicField e1, HarmonicField e2, double gt);
};

/// Bogoliubov coefficients of the sideband mode. cosh_n and sinhc_n are
/// continued to cos/sinc when n_sq < 0 (beam-splitter dominated coupling).
struct CouplingSet {
  complex g;
  complex f;
  double n_sq = 0.0;
  double cosh_n = 1.0;
  double sinhc_n = 1.0;
  double m_sq = 1.0;
};

CouplingSet derive_couplings(const ModelParams& params);

double sideband_mean_photons(const ModelParams& params);

struct SidebandMoments {
  complex a_sq;     // <a_sb^2>
  complex adag_sq;  // <a_sb^dagger^2>
  double mean_n = 0.0;
};

SidebandMoments sideband_moments(const ModelParams& params);

struct QuadratureVariances {
  double var_x = 1.0;
  double var_p = 1.0;
};

/// Quadrature variances in the vacuum = 1 normalization (X = a + a^dagger).
QuadratureVariances quadrature_variances(const ModelParams& params);

struct SidebandObservables {
  double mean_n = 0.0;
  double var_x = 1.0;
  double var_p = 1.0;
  complex a_sq;
};

SidebandObservables sideband_observables(const ModelParams& params);

/// Extremes of the quadrature variance over all rotation angles,
/// 1 + 2<n> -/+ 2|<a^2>|. Their product is 1 for a pure Gaussian state.
struct PrincipalVariances {
  double var_min = 1.0;
  double var_max = 1.0;
};

PrincipalVariances principal_variances(const ModelParams& params);

/// Sideband photons per perturbing photon. Throws std::domain_error at r = 0.
double conversion_efficiency(const ModelParams& params);

}  // namespace sideband
