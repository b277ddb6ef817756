#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "sideband/analytic.hpp"
#include "sideband/fock.hpp"

using namespace sideband;
using namespace sideband::fock;

namespace {

double l2_diff(const FockState& a, const FockState& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::norm(a.amps()[i] - b.amps()[i]);
  return std::sqrt(s);
}

FockState random_state(std::size_t c0, std::size_t cs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  FockState s(c0, cs);
  for (auto& a : s.amps()) a = complex(n(rng), n(rng));
  s.normalize();
  return s;
}

}  // namespace

TEST(FockState, BasisIndexingAndMarginals) {
  const auto s = FockState::basis(4, 3, 2, 1);
  EXPECT_EQ(s.dim(), 12u);
  EXPECT_EQ(s.index(2, 1), 7u);
  EXPECT_EQ(s(2, 1), complex(1.0, 0.0));
  EXPECT_DOUBLE_EQ(s.norm(), 1.0);
  const auto m0 = s.marginal(Mode::Perturbation);
  const auto ms = s.marginal(Mode::Sideband);
  EXPECT_EQ(m0, (std::vector<double>{0, 0, 1, 0}));
  EXPECT_EQ(ms, (std::vector<double>{0, 1, 0}));
  EXPECT_DOUBLE_EQ(s.edge_population(Mode::Perturbation), 1.0);
  EXPECT_DOUBLE_EQ(s.edge_population(Mode::Sideband), 1.0);
  EXPECT_DOUBLE_EQ(FockState::basis(2, 2, 0, 0).edge_population(Mode::Sideband), 0.0);
}

TEST(SqueezedVacuum, AmplitudesFollowTheClosedForm) {
  const SqueezeParams sq(0.5, 0.7);
  const auto v = squeezed_vacuum_vector(sq, 80);
  const double t = std::tanh(0.5);
  EXPECT_NEAR(std::norm(v.amps[2]) / std::norm(v.amps[0]), t * t / 2, 1e-14);
  EXPECT_NEAR(std::norm(v.amps[2]) / std::norm(v.amps[0]), 0.106776, 1e-6);
  for (std::size_t n = 1; n < 80; n += 2) EXPECT_EQ(v.amps[n], complex(0.0, 0.0));
  EXPECT_NEAR(std::norm(v.amps[0]), 1.0 / std::cosh(0.5), 1e-14);
  // c_2 = -e^{i phi} tanh r / sqrt(2) c_0
  const complex ratio = v.amps[2] / v.amps[0];
  EXPECT_NEAR(std::abs(ratio - (-std::polar(t, 0.7) / std::sqrt(2.0))), 0.0, 1e-14);
  EXPECT_LT(v.leakage, 1e-12);
}

TEST(SqueezedVacuum, TruncationLeakageIsReported) {
  const auto loose = squeezed_vacuum_amplitudes(SqueezeParams(1.5, 0.0), 6);
  EXPECT_GT(loose.leakage, 1e-3);
  double norm = 0.0;
  for (const auto& a : loose.amps) norm += std::norm(a);
  EXPECT_NEAR(norm, 1.0, 1e-14);
  EXPECT_THROW(squeezed_vacuum_vector(SqueezeParams(1.5, 0.0), 6), OracleError);
}

TEST(Generator, AntiHermitianAndMatchesSparseProduct) {
  const auto gen = TwoModeGenerator::from_couplings({0.3, 0.2}, {0.1, -0.4}, 9, 7);
  EXPECT_TRUE(gen.anti_hermitian());
  EXPECT_LT(gen.max_anti_hermitian_defect(), 1e-15);
  const Eigen::MatrixXcd k = gen.dense();
  EXPECT_LT((k + k.adjoint()).norm(), 1e-14);
  // <n0-1, ns+1 | g a0 a_sb^dag | n0, ns> = g sqrt(n0) sqrt(ns+1)
  const FockState probe(9, 7);
  EXPECT_NEAR(std::abs(gen.element(probe.index(2, 4), probe.index(3, 3)) - complex(0.3, 0.2) * std::sqrt(3.0) * 2.0),
              0.0, 1e-14);

  const auto in = random_state(9, 7, 3);
  std::vector<complex> a(in.dim()), b(in.dim());
  gen.apply(in.amps(), a, complex(0.0, 2.0));
  gen.apply_serial(in.amps(), b, complex(0.0, 2.0));
  Eigen::Map<const Eigen::VectorXcd> v(in.amps().data(), static_cast<Eigen::Index>(in.dim()));
  const Eigen::VectorXcd ref = complex(0.0, 2.0) * (gen.sparse() * v);
  for (std::size_t i = 0; i < in.dim(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    EXPECT_NEAR(std::abs(a[i] - ref[static_cast<Eigen::Index>(i)]), 0.0, 1e-13);
  }
  EXPECT_GE(gen.gershgorin_radius(), k.eigenvalues().cwiseAbs().maxCoeff() - 1e-12);
}

TEST(Generator, BuiltFromModelParameters) {
  const ModelParams p(SqueezeParams(0.3, 0.0), HarmonicField(0.5, 0.2), HarmonicField(0.25, -1.0), 0.8);
  const auto gen = TwoModeGenerator::build(p, 5, 5);
  EXPECT_NEAR(std::abs(gen.g() - 0.8 * std::polar(0.5, 0.2)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(gen.f() - 0.8 * std::polar(0.25, -1.0)), 0.0, 1e-15);
}

TEST(Propagate, FullSwapMovesThePhotonToTheSideband) {
  const auto gen = TwoModeGenerator::from_couplings(std::numbers::pi / 2, 0.0, 3, 3);
  for (const auto& out : {propagate_dense(FockState::basis(3, 3, 1, 0), gen),
                          propagate_chebyshev(FockState::basis(3, 3, 1, 0), gen)}) {
    EXPECT_NEAR(std::abs(out(0, 1)), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(out(1, 0)), 0.0, 1e-12);
  }
}

TEST(Propagate, TwoModeSqueezingFromVacuum) {
  const auto gen = TwoModeGenerator::from_couplings(0.0, 0.2, 30, 30);
  const auto out = propagate(FockState::basis(30, 30, 0, 0), gen);
  const auto m = mode_moments(out, Mode::Sideband);
  EXPECT_NEAR(m.mean_n, std::sinh(0.2) * std::sinh(0.2), 1e-12);
  // reduced state is thermal
  EXPECT_NEAR(m.g2(), 2.0, 1e-9);
  EXPECT_NEAR(mode_moments(out, Mode::Perturbation).mean_n, m.mean_n, 1e-12);
}

TEST(Propagate, DenseAndChebyshevAgree) {
  const auto gen = TwoModeGenerator::from_couplings({0.6, 0.1}, {0.2, 0.3}, 16, 14);
  const auto in = random_state(16, 14, 5);
  const auto a = propagate_dense(in, gen);
  const auto b = propagate_chebyshev(in, gen);
  EXPECT_LT(l2_diff(a, b), 1e-12);
  // cross-check against Eigen's exponential applied to the dense matrix
  Eigen::Map<const Eigen::VectorXcd> v(in.amps().data(), static_cast<Eigen::Index>(in.dim()));
  const Eigen::VectorXcd ref = gen.dense().exp() * v;
  double d = 0.0;
  for (std::size_t i = 0; i < in.dim(); ++i) d += std::norm(a.amps()[i] - ref[static_cast<Eigen::Index>(i)]);
  EXPECT_LT(std::sqrt(d), 1e-12);
}

TEST(Propagate, PreservesNormAndParity) {
  const auto sq = squeezed_vacuum_vector(SqueezeParams(0.6, 0.4), 40);
  const auto in = FockState::product_with_sideband_vacuum(sq.amps, 20);
  const auto gen = TwoModeGenerator::from_couplings({0.4, 0.0}, {0.0, 0.5}, 40, 20);
  const auto out = propagate(in, gen);
  EXPECT_NEAR(out.norm(), 1.0, 1e-12);
  double odd = 0.0;
  for (std::size_t n0 = 0; n0 < 40; ++n0) {
    for (std::size_t ns = 0; ns < 20; ++ns) {
      if ((n0 + ns) % 2) odd += std::norm(out(n0, ns));
    }
  }
  EXPECT_LT(odd, 1e-24);
}

TEST(Moments, SingleModeSqueezedVacuum) {
  const SqueezeParams sq(0.5, 0.3);
  const auto v = squeezed_vacuum_vector(sq, 80);
  const auto state = FockState::product_with_sideband_vacuum(v.amps, 2);
  const auto m = mode_moments(state, Mode::Perturbation);
  const double s2 = std::sinh(0.5) * std::sinh(0.5);
  EXPECT_NEAR(m.mean_n, s2, 1e-12);
  EXPECT_NEAR(m.g2(), 3.0 + 1.0 / s2, 1e-10);
  EXPECT_NEAR(std::abs(m.a_sq - (-std::polar(1.0, 0.3) * std::sinh(0.5) * std::cosh(0.5))), 0.0, 1e-12);
  EXPECT_NEAR(expectation(state, Mode::Perturbation, Observable::MeanN).real(), s2, 1e-12);
  EXPECT_NEAR(expectation(state, Mode::Perturbation, Observable::G2).real(), 3.0 + 1.0 / s2, 1e-10);
  EXPECT_THROW(mode_moments(state, Mode::Sideband).g2(), std::domain_error);
}

TEST(Converge, VacuumNeedsOnlyTheSmallestCutoff) {
  const ModelParams p(SqueezeParams(0.0, 0.0), HarmonicField(0.0, 0.0), HarmonicField(0.0, 0.0), 1.0);
  const auto c = converge_cutoff(p, 1e-8);
  EXPECT_EQ(c.cutoff0, 2u);
  EXPECT_EQ(c.cutoff_sb, 2u);
}

TEST(Converge, CutoffsGrowMonotonicallyWithTighterTargets) {
  const ModelParams p(SqueezeParams(0.8, 0.5), HarmonicField(0.7, 0.1), HarmonicField(0.5, 1.3), 0.6);
  std::size_t prev0 = 0, prev_sb = 0;
  for (const double target : {1e-4, 1e-6, 1e-8, 1e-10}) {
    const auto c = converge_cutoff(p, target);
    EXPECT_GE(c.cutoff0, prev0);
    EXPECT_GE(c.cutoff_sb, prev_sb);
    EXPECT_LT(c.leakage0, target);
    EXPECT_LT(c.leakage_sb, target);
    prev0 = c.cutoff0;
    prev_sb = c.cutoff_sb;
  }
}

TEST(Converge, RejectsBadTargetsAndTinyCaps) {
  const ModelParams p(SqueezeParams(1.5, 0.0), HarmonicField(1.0, 0.0), HarmonicField(1.0, 0.0), 1.0);
  EXPECT_THROW(converge_cutoff(p, 0.0), std::invalid_argument);
  EXPECT_THROW(converge_cutoff(p, 1e-2), std::invalid_argument);
  ConvergeOptions tiny;
  tiny.max_total_cutoff = 12;
  EXPECT_THROW(converge_cutoff(p, 1e-10, tiny), OracleError);
}

TEST(Oracle, AgreesWithAnalyticModel) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 6; ++i) {
    const ModelParams p(SqueezeParams(1.2 * u(rng), 6.3 * u(rng)), HarmonicField(u(rng), 6.3 * u(rng)),
                        HarmonicField(u(rng), 6.3 * u(rng)), 0.05 + 0.8 * u(rng));
    const auto a = sideband_observables(p);
    const auto o = oracle_observables(p, 1e-10);
    EXPECT_NEAR(o.sideband.mean_n, a.mean_n, 1e-7 * std::max(a.mean_n, 1e-12)) << i;
    EXPECT_NEAR(o.sideband.var_x, a.var_x, 1e-7 * a.var_x) << i;
    EXPECT_NEAR(o.sideband.var_p, a.var_p, 1e-7 * a.var_p) << i;
    EXPECT_NEAR(std::abs(o.sideband.a_sq - a.a_sq), 0.0, 1e-7 * std::max(std::abs(a.a_sq), 1e-12)) << i;
    EXPECT_LT(o.leakage, 1e-8);
  }
}

TEST(Oracle, BalancedCaseMatchesClosedForm) {
  const ModelParams p(SqueezeParams(0.5, 0.0), HarmonicField(1, 0), HarmonicField(1, 0), 0.1);
  const auto o = oracle_observables(p, 1e-14);
  EXPECT_NEAR(o.sideband.mean_n, 0.01 * std::exp(-1.0), 1e-12);
  EXPECT_NEAR(o.sideband.var_x, 1.0 + 0.04 * std::exp(-1.0), 1e-12);
  EXPECT_NEAR(o.sideband.var_p, 1.0, 1e-12);
}

TEST(StateCsv, WritesNonzeroAmplitudes) {
  std::ostringstream os;
  write_state_csv(os, FockState::basis(2, 2, 1, 0), 0.0);
  EXPECT_EQ(os.str(), "n0,n_sb,re,im\n1,0,1,0\n");
}
