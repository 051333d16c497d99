#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "geobridge/entropic_grid.hpp"

namespace geobridge {
namespace {

const PeriodicGrid kGrid(64, 0.05);

GridBridgeSolution gaussian_pair(const PeriodicGrid& g, double s0 = 0.05, double s1 = 0.05) {
  return sinkhorn_solve(g, wrapped_gaussian(g, 0.25, s0), wrapped_gaussian(g, 0.75, s1));
}

TEST(Grid, Validation) {
  EXPECT_THROW(PeriodicGrid(4, 0.05), ConfigError);
  EXPECT_THROW(PeriodicGrid(48, 0.05), ConfigError);
  EXPECT_THROW(PeriodicGrid(64, 0.005), ConfigError);
  EXPECT_THROW(GridDensity(Vector::Constant(8, 0.1)), DomainError);
  EXPECT_THROW(wrapped_gaussian(kGrid, 0.5, 0.0), ConfigError);
}

TEST(HeatSemigroup, IdentityAtZero) {
  EXPECT_EQ(heat_semigroup(kGrid, 0.0), Matrix::Identity(64, 64));
}

TEST(HeatSemigroup, SemigroupLaw) {
  const Matrix lhs = heat_semigroup(kGrid, 0.3) * heat_semigroup(kGrid, 0.7);
  EXPECT_LE((lhs - heat_semigroup(kGrid, 1.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(HeatSemigroup, SymmetricDoublyStochastic) {
  for (double t : {0.01, 0.1, 0.5, 1.0}) {
    const Matrix P = heat_semigroup(kGrid, t);
    EXPECT_LE((P.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12) << t;
    EXPECT_LE((P.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12) << t;
    EXPECT_LE((P - P.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_GT(P.minCoeff(), 0.0);
  }
}

TEST(HeatSemigroup, GaussianKernelApproachesLaplacian) {
  const PeriodicGrid fine(256, 0.05);
  const Matrix a = heat_semigroup(fine, 1.0);
  const Matrix b = heat_semigroup(fine, 1.0, Kernel::Gaussian);
  EXPECT_LE((b.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Sinkhorn, UniformIsFixedInOneIteration) {
  const auto u = uniform_density(kGrid);
  const GridBridgeSolution sol = sinkhorn_solve(kGrid, u, u);
  EXPECT_TRUE(sol.converged);
  EXPECT_EQ(sol.iterations, 1);
  EXPECT_LE((sol.eta0_star.array() - sol.eta0_star[0]).abs().maxCoeff(), 1e-12 * sol.eta0_star[0]);
  EXPECT_LE((sol.eta1.array() - sol.eta1[0]).abs().maxCoeff(), 1e-12 * sol.eta1[0]);
  for (double t : {0.0, 0.3, 1.0}) {
    EXPECT_LE((interpolate(sol, t).mass - u.mass).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Sinkhorn, GaussianPairConverges) {
  const GridBridgeSolution sol = gaussian_pair(kGrid);
  EXPECT_TRUE(sol.converged);
  EXPECT_LE(sol.marginal_err, 1e-10);
  EXPECT_LE(sol.iterations, 500);
  for (std::size_t k = 1; k < sol.history.size(); ++k) {
    EXPECT_LE(sol.history[k], sol.history[k - 1] + 1e-14);
  }
}

TEST(Sinkhorn, MonotoneOnHarderPair) {
  const PeriodicGrid g(64, 0.01);
  SinkhornOptions opt;
  opt.tol = 1e-13;
  const GridBridgeSolution sol =
      sinkhorn_solve(g, wrapped_gaussian(g, 0.2, 0.03), wrapped_gaussian(g, 0.7, 0.08), opt);
  EXPECT_GT(sol.history.size(), 3u);
  for (std::size_t k = 1; k < sol.history.size(); ++k) {
    EXPECT_LE(sol.history[k], sol.history[k - 1] + 1e-14) << k;
  }
}

TEST(Sinkhorn, TimeReversalSymmetry) {
  const auto mu = wrapped_gaussian(kGrid, 0.2, 0.05);
  const auto nu = wrapped_gaussian(kGrid, 0.6, 0.1);
  const GridBridgeSolution a = sinkhorn_solve(kGrid, mu, nu);
  const GridBridgeSolution b = sinkhorn_solve(kGrid, nu, mu);
  for (double t : {0.0, 0.2, 0.5, 0.9, 1.0}) {
    EXPECT_LE((a.rho(t) - b.rho(1.0 - t)).cwiseAbs().maxCoeff(), 1e-10) << t;
  }
}

TEST(Sinkhorn, RejectsNonPositiveMarginal) {
  Vector m = Vector::Constant(64, 1.0 / 63.0);
  m[5] = 0.0;
  EXPECT_THROW(sinkhorn_solve(kGrid, GridDensity(m), uniform_density(kGrid)), DomainError);
}

TEST(Interpolate, BoundaryValuesAndMass) {
  const GridBridgeSolution sol = gaussian_pair(kGrid);
  EXPECT_LE((interpolate(sol, 0.0).mass - sol.mu.mass).lpNorm<1>(), 1e-10);
  EXPECT_LE((interpolate(sol, 1.0).mass - sol.nu.mass).lpNorm<1>(), 1e-10);
  for (int k = 0; k <= 20; ++k) {
    EXPECT_NEAR(interpolate(sol, k / 20.0).mass.sum(), 1.0, 1e-12);
  }
  EXPECT_THROW(interpolate(sol, 1.5), DomainError);
}

TEST(Interpolate, HopfColeConsistency) {
  const GridBridgeSolution sol = gaussian_pair(kGrid, 0.05, 0.1);
  for (double t : {0.0, 0.25, 0.5, 1.0}) {
    const HopfColeConsistency c = hopf_cole_consistency(sol, t);
    EXPECT_LE(c.product, 1e-12);
    EXPECT_LE(c.psi, 1e-12);
    EXPECT_NEAR(sol.phi(t).sum(), 0.0, 1e-12);
  }
}

TEST(Actions, UniformCaseIsStatic) {
  const auto u = uniform_density(kGrid);
  const BridgeActions a = bridge_actions(sinkhorn_solve(kGrid, u, u), 50);
  EXPECT_LE(std::abs(a.A_SB), 1e-20);
  EXPECT_LE(std::abs(a.A_Y), 1e-20);
  EXPECT_LE(a.residuals.sb, 1e-10);
  EXPECT_LE(a.residuals.yasue, 1e-10);
  EXPECT_LE(a.residuals.sb_star, 1e-10);
}

TEST(Actions, SymmetricGaussianIdentities) {
  const BridgeActions a = bridge_actions(gaussian_pair(kGrid), 200);
  const double scale = std::max(1.0, a.A_SB);
  EXPECT_GT(a.A_SB, 0.0);
  EXPECT_LE(std::abs(a.sb_identity_gap()), 5e-3 * scale);
  EXPECT_LE(std::abs(a.A_SB - a.A_SB_star), 5e-3 * scale);
}

// With unequal entropies only the boundary-term relations hold.
TEST(Actions, AsymmetricGaussianIdentities) {
  const BridgeActions a = bridge_actions(gaussian_pair(kGrid, 0.05, 0.1), 200);
  const double scale = std::max(1.0, a.A_SB);
  EXPECT_GT(std::abs(a.S_nu - a.S_mu), 1e-2);
  EXPECT_LE(std::abs(a.sb_identity_gap()), 5e-3 * scale);
  EXPECT_LE(std::abs(a.sb_star_identity_gap()), 5e-3 * scale);
  EXPECT_LE(std::abs(a.A_SB - a.A_SB_star - 2.0 * (a.S_nu - a.S_mu)), 1e-2 * scale);
}

TEST(Actions, YasueInvariantUnderGammaSign) {
  const BridgeFrames f = bridge_frames(gaussian_pair(kGrid), 100);
  EXPECT_EQ(yasue_action(f, 0.05), yasue_action(f, -0.05));
}

TEST(Actions, ContinuityResidualSecondOrder) {
  const double r1 = bridge_actions(gaussian_pair(PeriodicGrid(64, 0.05)), 200).residuals.yasue;
  const double r2 = bridge_actions(gaussian_pair(PeriodicGrid(128, 0.05)), 400).residuals.yasue;
  EXPECT_GE(r1 / r2, 3.0);
  EXPECT_LE(r1 / r2, 5.0);
}

TEST(Entropy, UniformIsZero) {
  EXPECT_NEAR(entropy(uniform_density(kGrid), 0.05), 0.0, 1e-15);
}

TEST(Csv, RoundTrip) {
  const auto g = wrapped_gaussian(kGrid, 0.4, 0.1);
  const std::string path = testing::TempDir() + "marginal.csv";
  {
    std::ofstream out(path);
    out << "cell,mass\n";
    char buf[64];
    for (int k = 0; k < 64; ++k) {
      std::snprintf(buf, sizeof buf, "%d,%.17g\n", k, g.mass[k]);
      out << buf;
    }
  }
  EXPECT_LE((load_density_csv(path, kGrid).mass - g.mass).cwiseAbs().maxCoeff(), 1e-16);
  {
    std::ofstream out(path);
    out << "0,1.0\n";
  }
  EXPECT_THROW(load_density_csv(path, kGrid), ConfigError);
  EXPECT_THROW(load_density_csv(path + ".missing", kGrid), ConfigError);
}

TEST(Porous, UniformIsStatic) {
  const PeriodicGrid g(16, 0.05);
  const auto u = uniform_density(g);
  const PorousResult r = porous_direct(g, u, u, 1.5, 8);
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_LE(r.action, 1e-20);
  for (const auto& rho : r.rho) EXPECT_LE((rho - u.mass).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Porous, RejectsBadParameters) {
  const PeriodicGrid g(16, 0.05);
  const auto u = uniform_density(g);
  EXPECT_THROW(porous_direct(g, u, u, 1.0, 8), ConfigError);
  EXPECT_THROW(porous_direct(g, u, u, 1.5, 64), ConfigError);
  EXPECT_THROW(porous_direct(PeriodicGrid(128, 0.05), uniform_density(PeriodicGrid(128, 0.05)),
                             uniform_density(PeriodicGrid(128, 0.05)), 1.5, 8),
               ConfigError);
}

TEST(Porous, GradientMatchesFiniteDifferences) {
  const PeriodicGrid g(16, 0.05);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.8, 1.2);
  std::normal_distribution<double> nd;
  for (double m_exp : {1.001, 2.0}) {
    PorousObjective obj(g, wrapped_gaussian(g, 0.25, 0.1), wrapped_gaussian(g, 0.75, 0.1),
                        m_exp, 8);
    obj.set_penalty(1e3);
    for (int trial = 0; trial < 10; ++trial) {
      Vector x = obj.initial_guess();
      const int nr = (obj.steps() - 1) * obj.n();
      for (int i = 0; i < x.size(); ++i) x[i] = i < nr ? x[i] * u(rng) : x[i] + 0.1 * nd(rng);
      Vector grad, scratch;
      obj(x, grad);
      Vector fd(x.size());
      for (int i = 0; i < x.size(); ++i) {
        Vector xp = x, xm = x;
        const double h = fd_step(x[i]);
        xp[i] += h;
        xm[i] -= h;
        fd[i] = (obj(xp, scratch) - obj(xm, scratch)) / (2.0 * h);
      }
      EXPECT_LE((grad - fd).norm() / fd.norm(), 1e-5) << "m = " << m_exp;
    }
  }
}

TEST(Porous, NearEntropicLimitMatchesYasueAction) {
  const PeriodicGrid g(32, 0.05);
  const auto mu = wrapped_gaussian(g, 0.25, 0.1);
  const auto nu = wrapped_gaussian(g, 0.75, 0.1);
  const PorousResult r = porous_direct(g, mu, nu, 1.001, 32);
  const BridgeActions a = bridge_actions(sinkhorn_solve(g, mu, nu), 400);
  EXPECT_LE(std::abs(r.action - a.A_Y), 0.02 * a.A_Y) << r.action << " vs " << a.A_Y;
  EXPECT_LE(r.constraint_l2, 1e-3);
}

}  // namespace
}  // namespace geobridge
