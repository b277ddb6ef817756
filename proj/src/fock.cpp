#include "sideband/fock.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>

#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

namespace sideband::fock {

namespace {

constexpr double kSqueezedLeakageLimit = 1e-6;
constexpr double kAntiHermitianTolerance = 1e-12;

double squared_norm(std::span<const complex> v) {
  double s = 0.0;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
#pragma omp parallel for reduction(+ : s) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) s += std::norm(v[i]);
  return s;
}

void check_cutoffs(std::size_t cutoff0, std::size_t cutoff_sb) {
  if (cutoff0 < 2 || cutoff_sb < 2) {
    throw std::invalid_argument(
        fmt::format("Fock cutoffs must be >= 2, got ({}, {})", cutoff0, cutoff_sb));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// FockState

FockState::FockState(std::size_t cutoff0, std::size_t cutoff_sb)
    : cutoff0_(cutoff0), cutoff_sb_(cutoff_sb) {
  check_cutoffs(cutoff0, cutoff_sb);
  amps_.assign(cutoff0 * cutoff_sb, complex{0.0, 0.0});
}

FockState::FockState(std::size_t cutoff0, std::size_t cutoff_sb, std::vector<complex> amps)
    : cutoff0_(cutoff0), cutoff_sb_(cutoff_sb), amps_(std::move(amps)) {
  check_cutoffs(cutoff0, cutoff_sb);
  if (amps_.size() != cutoff0 * cutoff_sb) {
    throw std::invalid_argument(fmt::format("amplitude array has length {}, expected {}x{}",
                                            amps_.size(), cutoff0, cutoff_sb));
  }
}

FockState FockState::product_with_sideband_vacuum(std::span<const complex> mode0, std::size_t cutoff_sb) {
  FockState s(mode0.size(), cutoff_sb);
  for (std::size_t n0 = 0; n0 < mode0.size(); ++n0) s(n0, 0) = mode0[n0];
  return s;
}

FockState FockState::basis(std::size_t cutoff0, std::size_t cutoff_sb, std::size_t n0, std::size_t n_sb) {
  FockState s(cutoff0, cutoff_sb);
  if (n0 >= cutoff0 || n_sb >= cutoff_sb) {
    throw std::out_of_range(fmt::format("|{},{}> outside cutoffs ({}, {})", n0, n_sb, cutoff0, cutoff_sb));
  }
  s(n0, n_sb) = 1.0;
  return s;
}

double FockState::norm() const { return std::sqrt(squared_norm(amps_)); }

void FockState::normalize() {
  const double n = norm();
  if (!(n > 0.0)) throw OracleError("cannot normalize a zero state");
  for (auto& a : amps_) a /= n;
}

std::vector<double> FockState::marginal(Mode mode) const {
  std::vector<double> p(mode == Mode::Perturbation ? cutoff0_ : cutoff_sb_, 0.0);
  for (std::size_t n0 = 0; n0 < cutoff0_; ++n0) {
    for (std::size_t ns = 0; ns < cutoff_sb_; ++ns) {
      p[mode == Mode::Perturbation ? n0 : ns] += std::norm((*this)(n0, ns));
    }
  }
  return p;
}

double FockState::edge_population(Mode mode) const {
  const std::vector<double> p = marginal(mode);
  const std::size_t first = std::max<std::size_t>(1, p.size() - 2);
  double s = 0.0;
  for (std::size_t n = first; n < p.size(); ++n) s += p[n];
  return s;
}

Sector FockState::sector() const {
  bool even = false, odd = false;
  for (std::size_t n0 = 0; n0 < cutoff0_; ++n0) {
    for (std::size_t ns = 0; ns < cutoff_sb_; ++ns) {
      if ((*this)(n0, ns) != complex{0.0, 0.0}) ((n0 + ns) % 2 ? odd : even) = true;
    }
  }
  if (even && odd) return Sector::All;
  return odd ? Sector::Odd : Sector::Even;
}

// ---------------------------------------------------------------------------
// Squeezed vacuum

SqueezedVacuumAmplitudes squeezed_vacuum_amplitudes(const SqueezeParams& squeeze, std::size_t cutoff) {
  if (cutoff < 2) throw std::invalid_argument(fmt::format("cutoff must be >= 2, got {}", cutoff));
  SqueezedVacuumAmplitudes out;
  out.amps.assign(cutoff, complex{0.0, 0.0});
  const double r = squeeze.r();
  // c_{2m} = (-e^{i phi} tanh r)^m sqrt((2m)!) / (2^m m!) / sqrt(cosh r)
  const complex ratio = -std::polar(std::tanh(r), squeeze.phi());
  complex c = 1.0 / std::sqrt(std::cosh(r));
  long double total = 0.0L;
  for (std::size_t n = 0; n < cutoff; n += 2) {
    out.amps[n] = c;
    total += std::norm(c);
    const double m = static_cast<double>(n / 2 + 1);
    c *= ratio * std::sqrt((2.0 * m - 1.0) / (2.0 * m));
  }
  out.leakage = std::max(0.0, static_cast<double>(1.0L - total));
  const double scale = 1.0 / std::sqrt(static_cast<double>(total));
  for (auto& a : out.amps) a *= scale;
  return out;
}

SqueezedVacuumAmplitudes squeezed_vacuum_vector(const SqueezeParams& squeeze, std::size_t cutoff) {
  SqueezedVacuumAmplitudes out = squeezed_vacuum_amplitudes(squeeze, cutoff);
  if (out.leakage > kSqueezedLeakageLimit) {
    throw OracleError(fmt::format("squeezed vacuum r={} leaks {:.3e} beyond cutoff {}", squeeze.r(),
                                  out.leakage, cutoff));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generator

TwoModeGenerator::TwoModeGenerator(complex g, complex f, std::size_t cutoff0, std::size_t cutoff_sb)
    : g_(g), f_(f), cutoff0_(cutoff0), cutoff_sb_(cutoff_sb) {
  check_cutoffs(cutoff0, cutoff_sb);
  const std::size_t m = std::max(cutoff0, cutoff_sb) + 1;
  sqrt_.resize(m);
  for (std::size_t n = 0; n < m; ++n) sqrt_[n] = std::sqrt(static_cast<double>(n));
}

TwoModeGenerator TwoModeGenerator::build(const ModelParams& params, std::size_t cutoff0, std::size_t cutoff_sb) {
  const CouplingSet c = derive_couplings(params);
  return from_couplings(c.g, c.f, cutoff0, cutoff_sb);
}

TwoModeGenerator TwoModeGenerator::from_couplings(complex g, complex f, std::size_t cutoff0,
                                                  std::size_t cutoff_sb) {
  TwoModeGenerator gen(g, f, cutoff0, cutoff_sb);
  const double defect = gen.max_anti_hermitian_defect();
  if (!(defect <= kAntiHermitianTolerance)) {
    throw OracleError(fmt::format("generator is not anti-Hermitian (defect {:.3e})", defect));
  }
  gen.anti_hermitian_ = true;
  return gen;
}

complex TwoModeGenerator::element(std::size_t row, std::size_t col) const {
  const std::size_t n0 = row / cutoff_sb_, ns = row % cutoff_sb_;
  const std::size_t m0 = col / cutoff_sb_, ms = col % cutoff_sb_;
  if (m0 == n0 + 1 && ms + 1 == ns) return g_ * sqrt_[n0 + 1] * sqrt_[ns];            // a0 a_sb^dag
  if (m0 + 1 == n0 && ms + 1 == ns) return f_ * sqrt_[n0] * sqrt_[ns];                // a0^dag a_sb^dag
  if (m0 + 1 == n0 && ms == ns + 1) return -std::conj(g_) * sqrt_[n0] * sqrt_[ns + 1];  // a0^dag a_sb
  if (m0 == n0 + 1 && ms == ns + 1) return -std::conj(f_) * sqrt_[n0 + 1] * sqrt_[ns + 1];  // a0 a_sb
  return {0.0, 0.0};
}

// Gather form: row (n0, ns) reads its four neighbours (n0 +- 1, ns +- 1), so
// rows are written independently.
namespace {

std::size_t first_site(std::size_t n0, Sector sector) {
  if (sector == Sector::All) return 0;
  return (n0 + (sector == Sector::Odd ? 1 : 0)) % 2;
}

// Calls emit(ns, (K x)(n0, ns)) for every ns of the row in `sector`. `zero`
// stands in for the rows outside the basis.
inline double conj_coef(double x) { return x; }
inline complex conj_coef(complex x) { return std::conj(x); }

// Coef is complex in general and double for real couplings.
template <class Coef, class Emit>
inline void generator_row(std::size_t n0, std::size_t c0, std::size_t cs, const double* sq, Coef g, Coef f,
                          const complex* x, const complex* zero, Sector sector, Emit&& emit) {
  const bool has_up = n0 + 1 < c0, has_dn = n0 > 0;
  const complex* up = has_up ? x + (n0 + 1) * cs : zero;
  const complex* dn = has_dn ? x + (n0 - 1) * cs : zero;
  const Coef gu = has_up ? Coef(g * sq[n0 + 1]) : Coef{};
  const Coef fu = has_up ? Coef(-conj_coef(f) * sq[n0 + 1]) : Coef{};
  const Coef fd = has_dn ? Coef(f * sq[n0]) : Coef{};
  const Coef gd = has_dn ? Coef(-conj_coef(g) * sq[n0]) : Coef{};
  const std::size_t step = sector == Sector::All ? 1 : 2;
  std::size_t ns = first_site(n0, sector);
  if (ns == 0) {
    emit(0, cs > 1 ? (fu * up[1] + gd * dn[1]) : complex{});
    ns += step;
  }
  for (; ns + 1 < cs; ns += step) {
    emit(ns, sq[ns] * (gu * up[ns - 1] + fd * dn[ns - 1]) + sq[ns + 1] * (fu * up[ns + 1] + gd * dn[ns + 1]));
  }
  if (ns + 1 == cs) emit(ns, sq[ns] * (gu * up[ns - 1] + fd * dn[ns - 1]));
}

void check_sizes(std::size_t dim, std::span<const complex> in, std::span<complex> out) {
  if (in.size() != dim || out.size() != dim) {
    throw std::invalid_argument(
        fmt::format("generator of dimension {} applied to vectors of size {} -> {}", dim, in.size(), out.size()));
  }
}

}  // namespace

void TwoModeGenerator::apply(std::span<const complex> in, std::span<complex> out, complex scale,
                             Sector sector) const {
  check_sizes(dim(), in, out);
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(cutoff0_);
  const std::size_t cs = cutoff_sb_;
  const std::vector<complex> zero(cs);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t n0 = static_cast<std::size_t>(r);
    complex* o = out.data() + n0 * cs;
    generator_row(n0, cutoff0_, cs, sqrt_.data(), g_, f_, in.data(), zero.data(), sector,
                  [&](std::size_t ns, complex v) { o[ns] = scale * v; });
  }
}

void TwoModeGenerator::apply_serial(std::span<const complex> in, std::span<complex> out, complex scale,
                                    Sector sector) const {
  check_sizes(dim(), in, out);
  const std::size_t cs = cutoff_sb_;
  const std::vector<complex> zero(cs);
  for (std::size_t n0 = 0; n0 < cutoff0_; ++n0) {
    complex* o = out.data() + n0 * cs;
    generator_row(n0, cutoff0_, cs, sqrt_.data(), g_, f_, in.data(), zero.data(), sector,
                  [&](std::size_t ns, complex v) { o[ns] = scale * v; });
  }
}

void TwoModeGenerator::chebyshev_step(std::span<const complex> cur, std::span<complex> prev, complex scale,
                                      complex coeff, std::span<complex> sum, Sector sector) const {
  check_sizes(dim(), cur, prev);
  check_sizes(dim(), cur, sum);
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(cutoff0_);
  const std::size_t cs = cutoff_sb_;
  const std::vector<complex> zero(cs);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t n0 = static_cast<std::size_t>(r);
    complex* p = prev.data() + n0 * cs;
    complex* s = sum.data() + n0 * cs;
    generator_row(n0, cutoff0_, cs, sqrt_.data(), g_, f_, cur.data(), zero.data(), sector,
                  [&](std::size_t ns, complex v) {
                    p[ns] = scale * v - p[ns];
                    s[ns] += coeff * p[ns];
                  });
  }
}

void TwoModeGenerator::real_chebyshev_step(std::span<const complex> cur, std::span<complex> prev, double scale,
                                           double coeff, std::span<complex> sum, Sector sector) const {
  check_sizes(dim(), cur, prev);
  check_sizes(dim(), cur, sum);
  if (g_.imag() != 0.0 || f_.imag() != 0.0) throw std::logic_error("real_chebyshev_step needs real couplings");
  const double g = g_.real(), f = f_.real();
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(cutoff0_);
  const std::size_t cs = cutoff_sb_;
  const std::vector<complex> zero(cs);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t n0 = static_cast<std::size_t>(r);
    complex* p = prev.data() + n0 * cs;
    complex* s = sum.data() + n0 * cs;
    generator_row(n0, cutoff0_, cs, sqrt_.data(), g, f, cur.data(), zero.data(), sector,
                  [&](std::size_t ns, complex v) {
                    p[ns] = scale * v + p[ns];
                    s[ns] += coeff * p[ns];
                  });
  }
}

Eigen::SparseMatrix<complex> TwoModeGenerator::sparse() const {
  std::vector<Eigen::Triplet<complex>> triplets;
  triplets.reserve(4 * dim());
  for (std::size_t n0 = 0; n0 < cutoff0_; ++n0) {
    for (std::size_t ns = 0; ns < cutoff_sb_; ++ns) {
      const std::size_t row = n0 * cutoff_sb_ + ns;
      auto add = [&](std::size_t m0, std::size_t ms) {
        if (m0 >= cutoff0_ || ms >= cutoff_sb_) return;
        const complex v = element(row, m0 * cutoff_sb_ + ms);
        if (v != complex{0.0, 0.0}) {
          triplets.emplace_back(static_cast<int>(row), static_cast<int>(m0 * cutoff_sb_ + ms), v);
        }
      };
      add(n0 + 1, ns - 1);  // ns - 1 wraps to SIZE_MAX at ns = 0 and is rejected
      add(n0 - 1, ns - 1);
      add(n0 - 1, ns + 1);
      add(n0 + 1, ns + 1);
    }
  }
  Eigen::SparseMatrix<complex> k(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
  k.setFromTriplets(triplets.begin(), triplets.end());
  return k;
}

Eigen::MatrixXcd TwoModeGenerator::dense() const { return Eigen::MatrixXcd(sparse()); }

double TwoModeGenerator::max_anti_hermitian_defect() const {
  double worst = 0.0;
  for (std::size_t n0 = 0; n0 < cutoff0_; ++n0) {
    for (std::size_t ns = 0; ns < cutoff_sb_; ++ns) {
      const std::size_t row = n0 * cutoff_sb_ + ns;
      const std::size_t neighbours[4][2] = {{n0 + 1, ns - 1}, {n0 - 1, ns - 1}, {n0 - 1, ns + 1}, {n0 + 1, ns + 1}};
      for (const auto& nb : neighbours) {
        if (nb[0] >= cutoff0_ || nb[1] >= cutoff_sb_) continue;
        const std::size_t col = nb[0] * cutoff_sb_ + nb[1];
        worst = std::max(worst, std::abs(element(row, col) + std::conj(element(col, row))));
      }
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Propagation

namespace {

void check_norm(double before, double after, double tolerance) {
  if (!(std::abs(after - before) <= tolerance * std::max(1.0, before))) {
    throw OracleError(fmt::format("propagation changed the norm from {:.15f} to {:.15f}", before, after));
  }
}

void check_dims(const FockState& state, const TwoModeGenerator& gen) {
  if (state.cutoff0() != gen.cutoff0() || state.cutoff_sb() != gen.cutoff_sb()) {
    throw std::invalid_argument(fmt::format("state cutoffs ({}, {}) do not match generator ({}, {})",
                                            state.cutoff0(), state.cutoff_sb(), gen.cutoff0(), gen.cutoff_sb()));
  }
}

}  // namespace

FockState propagate_dense(const FockState& state, const TwoModeGenerator& gen) {
  check_dims(state, gen);
  const Eigen::MatrixXcd u = gen.dense().exp();
  const auto in = state.amps();
  Eigen::Map<const Eigen::VectorXcd> v(in.data(), static_cast<Eigen::Index>(in.size()));
  const Eigen::VectorXcd w = u * v;
  return FockState(state.cutoff0(), state.cutoff_sb(), std::vector<complex>(w.data(), w.data() + w.size()));
}

namespace {

// J_0(x) .. J_n(x) by Miller's downward recurrence, normalized with
// J_0 + 2 sum_k J_2k = 1. Stable for every order and argument.
std::vector<double> bessel_sequence(double x, std::size_t n) {
  std::vector<double> j(n + 1, 0.0);
  if (x == 0.0) {
    j[0] = 1.0;
    return j;
  }
  const std::size_t start = n + 40 + static_cast<std::size_t>(std::sqrt(40.0 * static_cast<double>(n + 1)));
  double next = 0.0, cur = 1e-300;
  double norm = 0.0;
  for (std::size_t k = start; k-- > 0;) {
    const double prev = 2.0 * static_cast<double>(k + 1) / x * cur - next;
    next = cur;
    cur = prev;  // cur = J_k (unnormalized)
    if (k <= n) j[k] = cur;
    if (k % 2 == 0) norm += (k == 0 ? 1.0 : 2.0) * cur;
    if (std::abs(cur) > 1e250) {
      cur *= 1e-250;
      next *= 1e-250;
      norm *= 1e-250;
      for (std::size_t i = k; i <= n; ++i) j[i] *= 1e-250;
    }
  }
  for (auto& v : j) v /= norm;
  return j;
}

// Largest Ritz value of H = iK from a Lanczos run on a spread-out start vector.
double lanczos_radius(const TwoModeGenerator& gen, int iterations) {
  const std::size_t n = gen.dim();
  std::vector<complex> q(n), q_prev(n, complex{0.0, 0.0}), w(n);
  // deterministic start with weight on every level
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>((i * 2654435761u) % 1000003u) / 1000003.0;
    q[i] = complex{t - 0.5, 0.25 - 0.5 * t};
  }
  double qn = std::sqrt(squared_norm(q));
  for (auto& z : q) z /= qn;
  std::vector<double> alpha, beta;
  double b_prev = 0.0;
  for (int it = 0; it < iterations; ++it) {
    gen.apply(q, w, complex{0.0, 1.0});
    double a = 0.0;
    for (std::size_t i = 0; i < n; ++i) a += (std::conj(q[i]) * w[i]).real();
    for (std::size_t i = 0; i < n; ++i) w[i] -= a * q[i] + b_prev * q_prev[i];
    const double b = std::sqrt(squared_norm(w));
    alpha.push_back(a);
    if (b < 1e-14 * (std::abs(a) + 1.0)) break;
    beta.push_back(b);
    q_prev.swap(q);
    for (std::size_t i = 0; i < n; ++i) q[i] = w[i] / b;
    b_prev = b;
  }
  const Eigen::Index m = static_cast<Eigen::Index>(alpha.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    t(i, i) = alpha[static_cast<std::size_t>(i)];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t, Eigen::EigenvaluesOnly).eigenvalues();
  return std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
}

// exp(K) v = D exp(K') D^dag v with D = exp(i(alpha n0 + beta n_sb)) chosen so
// that K' = D^dag K D has real couplings |g|, |f|. For real antisymmetric K'
// the Chebyshev series has real weights:
//   exp(K') = J_0(rho) + 2 sum_k J_k(rho) P_k(K' / rho),
//   P_0 = 1, P_1 = x, P_{k+1} = 2 x P_k + P_{k-1}.
FockState chebyshev_action(const FockState& state, const TwoModeGenerator& gen, double radius, double tolerance) {
  const std::size_t n = state.dim();
  const std::size_t c0 = state.cutoff0(), cs = state.cutoff_sb();
  // J_k(radius) is negligible beyond radius + O(radius^{1/3}) + O(log 1/tol)
  const std::size_t guess = static_cast<std::size_t>(radius + 12.0 * std::cbrt(radius + 1.0) + 60.0);
  const std::vector<double> bessel = bessel_sequence(radius, guess);
  std::size_t degree = guess;
  while (degree > 1 && std::abs(bessel[degree]) < tolerance && std::abs(bessel[degree - 1]) < tolerance) --degree;

  const double alpha = 0.5 * (std::arg(gen.f()) - std::arg(gen.g()));
  const double beta = 0.5 * (std::arg(gen.f()) + std::arg(gen.g()));
  const TwoModeGenerator real = TwoModeGenerator::from_couplings(std::abs(gen.g()), std::abs(gen.f()), c0, cs);
  std::vector<complex> phase0(c0), phase_sb(cs);
  for (std::size_t k = 0; k < c0; ++k) phase0[k] = std::polar(1.0, alpha * static_cast<double>(k));
  for (std::size_t k = 0; k < cs; ++k) phase_sb[k] = std::polar(1.0, beta * static_cast<double>(k));

  const Sector sector = state.sector();
  std::vector<complex> prev(n), cur(n), sum(n);
  for (std::size_t n0 = 0; n0 < c0; ++n0) {
    for (std::size_t ns = 0; ns < cs; ++ns) prev[n0 * cs + ns] = std::conj(phase0[n0] * phase_sb[ns]) * state(n0, ns);
  }
  real.apply(prev, cur, 1.0 / radius, sector);
  for (std::size_t i = 0; i < n; ++i) sum[i] = bessel[0] * prev[i] + 2.0 * bessel[1] * cur[i];
  for (std::size_t k = 2; k <= degree; ++k) {
    real.real_chebyshev_step(cur, prev, 2.0 / radius, 2.0 * bessel[k], sum, sector);
    prev.swap(cur);
  }
  for (std::size_t n0 = 0; n0 < c0; ++n0) {
    for (std::size_t ns = 0; ns < cs; ++ns) sum[n0 * cs + ns] *= phase0[n0] * phase_sb[ns];
  }
  return FockState(c0, cs, std::move(sum));
}

}  // namespace

double TwoModeGenerator::gershgorin_radius() const {
  double worst = 0.0;
  const double ag = std::abs(g_), af = std::abs(f_);
  for (std::size_t n0 = 0; n0 < cutoff0_; ++n0) {
    for (std::size_t ns = 0; ns < cutoff_sb_; ++ns) {
      double s = 0.0;
      if (n0 + 1 < cutoff0_ && ns > 0) s += ag * sqrt_[n0 + 1] * sqrt_[ns];
      if (n0 > 0 && ns > 0) s += af * sqrt_[n0] * sqrt_[ns];
      if (n0 > 0 && ns + 1 < cutoff_sb_) s += ag * sqrt_[n0] * sqrt_[ns + 1];
      if (n0 + 1 < cutoff0_ && ns + 1 < cutoff_sb_) s += af * sqrt_[n0 + 1] * sqrt_[ns + 1];
      worst = std::max(worst, s);
    }
  }
  return worst;
}

FockState propagate_chebyshev(const FockState& state, const TwoModeGenerator& gen, double tolerance) {
  check_dims(state, gen);
  const double bound = gen.gershgorin_radius();
  if (bound == 0.0) return state;
  const double before = state.norm();
  // Ritz values sit inside the spectrum; the margin covers the unconverged edge.
  const double estimate = std::min(bound, 1.05 * lanczos_radius(gen, 60) + 1e-3);
  FockState out = chebyshev_action(state, gen, estimate, tolerance);
  if (std::abs(out.norm() - before) > 1e-11 * std::max(1.0, before)) {
    out = chebyshev_action(state, gen, bound, tolerance);
  }
  return out;
}

FockState propagate(const FockState& state, const TwoModeGenerator& gen, const PropagateOptions& opts) {
  check_dims(state, gen);
  const double before = state.norm();
  FockState out = gen.dim() < opts.dense_limit ? propagate_dense(state, gen)
                                               : propagate_chebyshev(state, gen, opts.series_tolerance);
  check_norm(before, out.norm(), opts.norm_tolerance);
  return out;
}

// ---------------------------------------------------------------------------
// Observables

double ModeMoments::g2() const {
  if (!(mean_n > 0.0)) throw std::domain_error("g2(0) is undefined for a mode with <n> = 0");
  return (mean_n2 - mean_n) / (mean_n * mean_n);
}

ModeMoments mode_moments(const FockState& state, Mode mode) {
  const std::size_t c0 = state.cutoff0(), cs = state.cutoff_sb();
  const bool pert = mode == Mode::Perturbation;
  double n1 = 0.0, n2 = 0.0;
  complex a{0.0, 0.0}, a2{0.0, 0.0};
  for (std::size_t n0 = 0; n0 < c0; ++n0) {
    for (std::size_t ns = 0; ns < cs; ++ns) {
      const complex c = state(n0, ns);
      const double n = static_cast<double>(pert ? n0 : ns);
      const double p = std::norm(c);
      n1 += n * p;
      n2 += n * n * p;
      if (n >= 1.0) {
        const complex lower = pert ? state(n0 - 1, ns) : state(n0, ns - 1);
        a += std::sqrt(n) * std::conj(lower) * c;
      }
      if (n >= 2.0) {
        const complex lower2 = pert ? state(n0 - 2, ns) : state(n0, ns - 2);
        a2 += std::sqrt(n * (n - 1.0)) * std::conj(lower2) * c;
      }
    }
  }
  ModeMoments m;
  m.mean_n = n1;
  m.mean_n2 = n2;
  m.a = a;
  m.a_sq = a2;
  const double mean_x = 2.0 * a.real();
  const double mean_p = 2.0 * a.imag();
  m.var_x = 1.0 + 2.0 * n1 + 2.0 * a2.real() - mean_x * mean_x;
  m.var_p = 1.0 + 2.0 * n1 - 2.0 * a2.real() - mean_p * mean_p;
  return m;
}

complex expectation(const FockState& state, Mode mode, Observable which) {
  const ModeMoments m = mode_moments(state, mode);
  switch (which) {
    case Observable::MeanN: return m.mean_n;
    case Observable::MeanN2: return m.mean_n2;
    case Observable::ASquared: return m.a_sq;
    case Observable::VarX: return m.var_x;
    case Observable::VarP: return m.var_p;
    case Observable::G2: return m.g2();
  }
  throw std::invalid_argument("unknown observable");
}

// ---------------------------------------------------------------------------
// Cutoff search

namespace {

// Next cutoff for a mode whose top-two population is above target. The
// marginal tail is close to geometric, so the decay between 1/2 and 3/4 of
// the basis predicts where it falls below target. Clamped to
// [geometric step, 3c]; the caller still verifies the result.
std::size_t next_cutoff(const std::vector<double>& p, double target, std::size_t geometric) {
  const std::size_t c = p.size();
  const std::size_t k1 = c / 2, k2 = (3 * c) / 4;
  if (c < 8 || k2 < k1 + 2) return geometric;
  const double e1 = p[k1] + p[k1 + 1], e2 = p[k2] + p[k2 + 1];
  if (!(e1 > 0.0 && e2 > 0.0)) return geometric;
  if (e2 >= e1) return std::max(geometric, 2 * c);  // not decaying yet: the state is wider than the basis
  const double rate = std::log(e1 / e2) / static_cast<double>(k2 - k1);
  const double need = static_cast<double>(k2) + std::log(4.0 * e2 / target) / rate;
  const auto predicted = static_cast<std::size_t>(std::ceil(1.05 * need));
  return std::clamp(predicted, geometric, 3 * c);
}

}  // namespace

ConvergedState converge_cutoff(const ModelParams& params, double target_leakage, const ConvergeOptions& opts) {
  if (!(target_leakage > 0.0 && target_leakage < 1e-3)) {
    throw std::invalid_argument(fmt::format("target leakage must lie in (0, 1e-3), got {}", target_leakage));
  }
  auto grow = [&](std::size_t c) {
    return std::max(c + 1, static_cast<std::size_t>(std::ceil(static_cast<double>(c) * opts.growth)));
  };
  // Mode 0 starts where the input state alone is converged; this is a 1D
  // computation and saves propagating undersized bases.
  std::size_t c0 = 2, cs = 2;
  while (squeezed_vacuum_amplitudes(params.squeeze, c0).leakage >= target_leakage && c0 < opts.max_total_cutoff) {
    c0 = grow(c0);
  }
  while (true) {
    if (c0 + cs > opts.max_total_cutoff) {
      throw OracleError(fmt::format("cutoffs ({}, {}) exceed the cap of {} total levels before reaching leakage {:.1e}",
                                    c0, cs, opts.max_total_cutoff, target_leakage));
    }
    const SqueezedVacuumAmplitudes sv = squeezed_vacuum_amplitudes(params.squeeze, c0);
    const FockState input = FockState::product_with_sideband_vacuum(sv.amps, cs);
    const TwoModeGenerator gen = TwoModeGenerator::build(params, c0, cs);
    FockState out = propagate(input, gen, opts.propagate);
    const double l0 = std::max(sv.leakage, out.edge_population(Mode::Perturbation));
    const double ls = out.edge_population(Mode::Sideband);
    if (l0 < target_leakage && ls < target_leakage) {
      return ConvergedState{c0, cs, l0, ls, std::move(out)};
    }
    // A truncated sideband reflects weight back into mode 0, so mode 0 is
    // only grown once the sideband edge is clean.
    if (ls >= target_leakage) {
      cs = next_cutoff(out.marginal(Mode::Sideband), target_leakage, grow(cs));
    } else {
      c0 = next_cutoff(out.marginal(Mode::Perturbation), target_leakage, grow(c0));
    }
  }
}

OracleObservables oracle_observables(const ModelParams& params, double target_leakage, const ConvergeOptions& opts) {
  const ConvergedState conv = converge_cutoff(params, target_leakage, opts);
  const ModeMoments m = mode_moments(conv.state, Mode::Sideband);
  OracleObservables out;
  out.sideband = {m.mean_n, m.var_x, m.var_p, m.a_sq};
  out.cutoff0 = conv.cutoff0;
  out.cutoff_sb = conv.cutoff_sb;
  out.leakage = std::max(conv.leakage0, conv.leakage_sb);
  return out;
}

void write_state_csv(std::ostream& os, const FockState& state, double threshold) {
  os << "n0,n_sb,re,im\n";
  for (std::size_t n0 = 0; n0 < state.cutoff0(); ++n0) {
    for (std::size_t ns = 0; ns < state.cutoff_sb(); ++ns) {
      const complex c = state(n0, ns);
      if (std::abs(c) > threshold) {
        os << fmt::format("{},{},{:.17g},{:.17g}\n", n0, ns, c.real(), c.imag());
      }
    }
  }
}

}  // namespace sideband::fock
