#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "sideband/analytic.hpp"

namespace sideband::fock {

/// Raised when truncation or the exponential action is not accurate enough.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { Perturbation, Sideband };

/// Parity class of n0 + n_sb. K maps each class to itself, so a state that
/// starts in one class never leaves it.
enum class Sector { All, Even, Odd };

/// Amplitudes of |n0, n_sb> for n0 < cutoff0, n_sb < cutoff_sb, stored with
/// n0 as the slow index.
class FockState {
 public:
  FockState(std::size_t cutoff0, std::size_t cutoff_sb);
  FockState(std::size_t cutoff0, std::size_t cutoff_sb, std::vector<complex> amps);

  /// |mode0> (x) |0>_sb.
  static FockState product_with_sideband_vacuum(std::span<const complex> mode0, std::size_t cutoff_sb);
  static FockState basis(std::size_t cutoff0, std::size_t cutoff_sb, std::size_t n0, std::size_t n_sb);

  std::size_t cutoff0() const { return cutoff0_; }
  std::size_t cutoff_sb() const { return cutoff_sb_; }
  std::size_t dim() const { return amps_.size(); }
  std::size_t index(std::size_t n0, std::size_t n_sb) const { return n0 * cutoff_sb_ + n_sb; }

  complex operator()(std::size_t n0, std::size_t n_sb) const { return amps_[index(n0, n_sb)]; }
  complex& operator()(std::size_t n0, std::size_t n_sb) { return amps_[index(n0, n_sb)]; }

  std::span<const complex> amps() const { return amps_; }
  std::span<complex> amps() { return amps_; }

  double norm() const;
  void normalize();

  /// Marginal photon-number distribution of one mode.
  std::vector<double> marginal(Mode mode) const;

  /// Population in the two highest retained levels of `mode` (never counting
  /// the vacuum level).
  double edge_population(Mode mode) const;

  /// Even or Odd if every amplitude of the other n0 + n_sb parity is exactly
  /// zero, All otherwise.
  Sector sector() const;

 private:
  std::size_t cutoff0_;
  std::size_t cutoff_sb_;
  std::vector<complex> amps_;
};

struct SqueezedVacuumAmplitudes {
  std::vector<complex> amps;  // renormalized
  double leakage = 0.0;       // 1 - sum |amps|^2 before renormalization
};

/// Truncated single-mode squeezed vacuum without the leakage check.
SqueezedVacuumAmplitudes squeezed_vacuum_amplitudes(const SqueezeParams& squeeze, std::size_t cutoff);

/// As above; throws OracleError when the truncation leaks more than 1e-6.
SqueezedVacuumAmplitudes squeezed_vacuum_vector(const SqueezeParams& squeeze, std::size_t cutoff);

/// Exponent K = g a0 a_sb^dag + f a0^dag a_sb^dag - h.c. of the interaction
/// propagator, applied matrix-free.
class TwoModeGenerator {
 public:
  /// Throws OracleError if the assembled operator is not anti-Hermitian.
  static TwoModeGenerator build(const ModelParams& params, std::size_t cutoff0, std::size_t cutoff_sb);
  static TwoModeGenerator from_couplings(complex g, complex f, std::size_t cutoff0, std::size_t cutoff_sb);

  std::size_t cutoff0() const { return cutoff0_; }
  std::size_t cutoff_sb() const { return cutoff_sb_; }
  std::size_t dim() const { return cutoff0_ * cutoff_sb_; }
  complex g() const { return g_; }
  complex f() const { return f_; }
  bool anti_hermitian() const { return anti_hermitian_; }

  /// Matrix element <row|K|col>.
  complex element(std::size_t row, std::size_t col) const;

  /// out = scale * K * in; OpenMP over n0 rows. With a parity sector only
  /// the sites of that class are written; the rest of `out` is untouched.
  void apply(std::span<const complex> in, std::span<complex> out, complex scale = 1.0,
             Sector sector = Sector::All) const;
  /// Serial reference for apply().
  void apply_serial(std::span<const complex> in, std::span<complex> out, complex scale = 1.0,
                    Sector sector = Sector::All) const;

  /// Fused Chebyshev recurrence: prev <- scale * K * cur - prev, then
  /// sum += coeff * prev, restricted to `sector` like apply().
  void chebyshev_step(std::span<const complex> cur, std::span<complex> prev, complex scale, complex coeff,
                      std::span<complex> sum, Sector sector = Sector::All) const;
  /// Real-weight recurrence prev <- scale * K * cur + prev, sum += coeff *
  /// prev. Needs real g and f; throws std::logic_error otherwise.
  void real_chebyshev_step(std::span<const complex> cur, std::span<complex> prev, double scale, double coeff,
                           std::span<complex> sum, Sector sector = Sector::All) const;

  /// Gershgorin bound on the spectral radius of K.
  double gershgorin_radius() const;

  Eigen::SparseMatrix<complex> sparse() const;
  Eigen::MatrixXcd dense() const;

  /// max |K_ij + conj(K_ji)| over the stored entries.
  double max_anti_hermitian_defect() const;

 private:
  TwoModeGenerator(complex g, complex f, std::size_t cutoff0, std::size_t cutoff_sb);

  complex g_;
  complex f_;
  std::size_t cutoff0_;
  std::size_t cutoff_sb_;
  std::vector<double> sqrt_;  // sqrt(n) up to max cutoff
  bool anti_hermitian_ = false;
};

struct PropagateOptions {
  /// Dense Pade exponential below this dimension, Chebyshev action above.
  std::size_t dense_limit = 128;
  double norm_tolerance = 1e-9;
  double series_tolerance = 1e-15;
};

/// exp(K) |state>. Throws OracleError when the norm drifts beyond tolerance.
FockState propagate(const FockState& state, const TwoModeGenerator& gen, const PropagateOptions& opts = {});

/// exp(K) |state> by the dense matrix exponential regardless of size.
FockState propagate_dense(const FockState& state, const TwoModeGenerator& gen);
/// exp(K) |state> by a Chebyshev expansion of the action regardless of size.
FockState propagate_chebyshev(const FockState& state, const TwoModeGenerator& gen, double tolerance = 1e-15);

struct ModeMoments {
  double mean_n = 0.0;
  double mean_n2 = 0.0;
  complex a;      // <a>
  complex a_sq;   // <a^2>
  double var_x = 1.0;
  double var_p = 1.0;

  /// (<n^2> - <n>) / <n>^2; throws std::domain_error when <n> = 0.
  double g2() const;
};

ModeMoments mode_moments(const FockState& state, Mode mode);

enum class Observable { MeanN, MeanN2, ASquared, VarX, VarP, G2 };

/// Single observable of one mode; real observables carry a zero imaginary part.
complex expectation(const FockState& state, Mode mode, Observable which);

struct ConvergeOptions {
  std::size_t max_total_cutoff = 4096;  // cap on cutoff0 + cutoff_sb
  double growth = 1.25;
  PropagateOptions propagate;
};

struct ConvergedState {
  std::size_t cutoff0 = 2;
  std::size_t cutoff_sb = 2;
  double leakage0 = 0.0;
  double leakage_sb = 0.0;
  FockState state{2, 2};
};

/// Grows (cutoff0, cutoff_sb) geometrically until the edge population of the
/// propagated state is below target in both modes. cutoff0 starts at the
/// size the input squeezed vacuum needs, cutoff_sb at 2.
ConvergedState converge_cutoff(const ModelParams& params, double target_leakage,
                               const ConvergeOptions& opts = {});

/// Sideband observables of the converged oracle state.
struct OracleObservables {
  SidebandObservables sideband;
  std::size_t cutoff0 = 0;
  std::size_t cutoff_sb = 0;
  double leakage = 0.0;
};

OracleObservables oracle_observables(const ModelParams& params, double target_leakage,
                                     const ConvergeOptions& opts = {});

/// Debug dump: one "n0,n_sb,re,im" line per nonzero amplitude.
void write_state_csv(std::ostream& os, const FockState& state, double threshold = 0.0);

}  // namespace sideband::fock
