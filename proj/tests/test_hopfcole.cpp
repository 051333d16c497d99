#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "geobridge/charts.hpp"
#include "geobridge/hopfcole.hpp"

namespace geobridge {
namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

BridgeSpec spec_of(ChartManifold m, Vector y, Vector z, int N = 1000) {
  BridgeSpec s{std::move(m), std::move(y), std::move(z)};
  s.N = N;
  return s;
}

BridgeSpec quadratic_spec() { return spec_of(charts::euclidean_quadratic(1, 1.0), v1(1.0), v1(2.0)); }
// On this bridge both eta and eta* stay inside the cone chart.
BridgeSpec cone_spec() { return spec_of(charts::cone_entropy(1.0, 1.0), v1(0.25), v1(0.5)); }
BridgeSpec sphere_spec() {
  return spec_of(charts::sphere_polar(), Vector{{1.0, -0.5}}, Vector{{2.0, 0.5}});
}

TEST(Assumptions, EuclideanQuadraticPasses) {
  const AssumptionReport r = check_assumptions(charts::euclidean_quadratic(2, 1.0), 20, 1);
  EXPECT_TRUE(r.hypotheses_hold()) << r.failures();
  EXPECT_EQ(r.metric_deviation, 0.0);
  EXPECT_EQ(r.potential_deviation, 0.0);
  EXPECT_EQ(r.sample_points.size(), 20u);
}

TEST(Assumptions, ConePasses) {
  const AssumptionReport r = check_assumptions(charts::cone_entropy(1.0, 1.0), 20, 2);
  EXPECT_TRUE(r.hypotheses_hold()) << r.failures();
  EXPECT_LE(r.metric_deviation, 1e-8);
  EXPECT_LE(r.potential_deviation, 1e-8);
}

TEST(Assumptions, ConePassesWithFiniteDifferences) {
  const auto m = without_analytic_derivatives(charts::cone_entropy(1.0, 1.0));
  const AssumptionReport r = check_assumptions(m, 20, 2);
  EXPECT_EQ(r.tolerance, 1e-4);
  EXPECT_TRUE(r.metric_ok);
  EXPECT_TRUE(r.potential_ok) << r.potential_deviation;
}

TEST(Assumptions, SphereMetricFails) {
  const AssumptionReport r = check_assumptions(charts::sphere_polar(), 20, 3);
  EXPECT_FALSE(r.metric_ok);
  EXPECT_GT(r.metric_deviation, 1e-2);
  const AssumptionReport fd = check_assumptions(without_analytic_derivatives(charts::sphere_polar()), 20, 3);
  EXPECT_FALSE(fd.metric_ok);
}

TEST(Assumptions, LinearPotentialHessianDegenerate) {
  const AssumptionReport r = check_assumptions(charts::linear_potential(Vector{{1.0, -0.5}}), 20, 4);
  EXPECT_TRUE(r.metric_ok);
  EXPECT_TRUE(r.potential_ok);
  EXPECT_FALSE(r.hessian_injective);
  EXPECT_FALSE(r.dV_invertible);
  EXPECT_EQ(r.min_singular_value, 0.0);
}

TEST(Assumptions, NeedsTenSamples) {
  const auto m = charts::euclidean_quadratic(1, 1.0);
  EXPECT_THROW(check_assumptions(m, sample_points(m, 9, 0)), ConfigError);
}

TEST(Assumptions, SamplingIsSeeded) {
  const auto m = charts::sphere_polar();
  const auto a = sample_points(m, 10, 42);
  const auto b = sample_points(m, 10, 42);
  const auto c = sample_points(m, 10, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Forward, QuadraticClosedForm) {
  const BridgeSolution sol = solve_shooting(quadratic_spec());
  const HopfColePair p = hopf_cole_forward(quadratic_spec().manifold, sol.trajectory);
  const double e = std::exp(1.0);
  const double a = (2.0 - 1.0 / e) / (e - 1.0 / e);
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    EXPECT_NEAR(p.eta[k][0], a * std::exp(p.times[k]), 1e-9);
    EXPECT_NEAR(p.eta_star[k][0], (1.0 - a) * std::exp(-p.times[k]), 1e-9);
  }
  EXPECT_LE(p.flow_residual(), 1e-6);
}

TEST(Forward, ConeAlgebraicInverse) {
  const BridgeSpec spec = cone_spec();
  const BridgeSolution sol = solve_shooting(spec);
  ASSERT_TRUE(sol.converged);
  const HopfColePair p = hopf_cole_forward(spec.manifold, sol.trajectory);
  for (std::size_t k = 0; k < p.times.size(); k += 50) {
    const double phi = sol.trajectory[k].phi[0];
    EXPECT_NEAR(p.eta[k][0], 2.0 / (phi - 2.0), 1e-10 * std::abs(p.eta[k][0]));
  }
  EXPECT_LE(p.flow_residual(), 1e-5);
}

TEST(Forward, FreeProblemRefused) {
  const auto spec = spec_of(charts::flat_free(1), v1(0.0), v1(1.0), 20);
  const BridgeSolution sol = solve_shooting(spec);
  EXPECT_THROW(hopf_cole_forward(spec.manifold, sol.trajectory), HypothesisError);
  EXPECT_THROW(hopf_cole_forward(spec.manifold, sol.trajectory, false), HypothesisError);
}

TEST(Forward, SphereRefusedUnlessForced) {
  const BridgeSpec spec = sphere_spec();
  const BridgeSolution sol = solve_shooting(spec);
  ASSERT_TRUE(sol.converged);
  EXPECT_THROW(hopf_cole_forward(spec.manifold, sol.trajectory), HypothesisError);
  const HopfColePair p = hopf_cole_forward(spec.manifold, sol.trajectory, false);
  EXPECT_GE(p.flow_residual(), 1e-2);
}

// On the cone bridge 1 -> 3 the covector makes eta* leave the chart.
TEST(Forward, ConeOutsideAdmissibleRegion) {
  const auto spec = spec_of(charts::cone_entropy(1.0, 1.0), v1(1.0), v1(3.0));
  const BridgeSolution sol = solve_shooting(spec);
  ASSERT_TRUE(sol.converged);
  EXPECT_THROW(hopf_cole_forward(spec.manifold, sol.trajectory), ConvergenceError);
}

TEST(Reconstruct, HandValues) {
  const PhaseState q = reconstruct(charts::euclidean_quadratic(1, 1.0), v1(0.6944), v1(0.3056));
  EXPECT_NEAR(q.q[0], 1.0, 1e-12);
  EXPECT_NEAR(q.phi[0], 1.3888, 1e-12);
  const PhaseState c = reconstruct(charts::cone_entropy(1.0, 1.0), v1(2.0), v1(2.0));
  EXPECT_NEAR(c.q[0], 0.5, 1e-12);
  EXPECT_NEAR(c.phi[0], 3.0, 1e-12);
}

TEST(Reconstruct, RoundTripOnRandomStates) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto quad = charts::euclidean_quadratic(2, 1.5);
  const auto cone = charts::cone_entropy(1.0, 1.0);
  for (int s = 0; s < 100; ++s) {
    // Quadratic: any state.
    const Vector q{{u(rng), u(rng)}};
    const Vector phi{{u(rng), u(rng)}};
    std::vector<PhaseState> st = {{0.0, q, phi}, {0.5, q, phi}, {1.0, q, phi}};
    const HopfColePair p = hopf_cole_forward(quad, Trajectory(st));
    const PhaseState back = reconstruct(quad, p.eta[0], p.eta_star[0]);
    EXPECT_LE((back.q - q).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((back.phi - phi).cwiseAbs().maxCoeff(), 1e-10);
    // Cone: phi/2 > c and dV(q) - phi/2 > c keep eta, eta* positive.
    const double qc = 0.2 + 0.3 * (u(rng) + 1.0);
    const double dv = 1.0 + 1.0 / qc;
    const double hp = 1.0 + (dv - 2.0) * 0.5 * (u(rng) + 1.1) / 1.1 + 1e-3;
    const Vector cq = v1(qc), cphi = v1(2.0 * hp);
    std::vector<PhaseState> cs = {{0.0, cq, cphi}, {0.5, cq, cphi}, {1.0, cq, cphi}};
    const HopfColePair cp = hopf_cole_forward(cone, Trajectory(cs));
    const PhaseState cb = reconstruct(cone, cp.eta[0], cp.eta_star[0]);
    EXPECT_LE(std::abs(cb.q[0] - qc), 1e-10);
    EXPECT_LE(std::abs(cb.phi[0] - 2.0 * hp), 1e-10);
  }
}

TEST(QIndependence, PassingAndFailingCharts) {
  const auto quad = charts::euclidean_quadratic(2, 1.0);
  EXPECT_LE(el_q_independence(quad, Vector{{1.0, 1.0}}, sample_points(quad, 50, 1)), 1e-12);
  const auto cone = charts::cone_entropy(1.0, 1.0);
  EXPECT_LE(el_q_independence(cone, v1(3.0), sample_points(cone, 50, 1)), 1e-12);
  const auto sph = charts::sphere_polar();
  EXPECT_GE(el_q_independence(sph, Vector{{1.0, 1.0}}, sample_points(sph, 50, 1)), 1e-2);
}

TEST(FixedPoint, QuadraticMatchesShooting) {
  const BridgeSpec spec = quadratic_spec();
  const FixedPointResult fp = schrodinger_fixed_point(spec);
  ASSERT_TRUE(fp.converged) << fp.message;
  EXPECT_EQ(fp.sweep_used, Sweep::Forward);
  EXPECT_LE(sup_distance(fp.solution.trajectory, solve_shooting(spec).trajectory), 1e-6);
}

TEST(FixedPoint, SymmetricRestState) {
  const auto spec = spec_of(charts::euclidean_quadratic(1, 1.0), v1(0.0), v1(0.0), 100);
  const FixedPointResult fp = schrodinger_fixed_point(spec);
  ASSERT_TRUE(fp.converged);
  EXPECT_LE(std::abs(fp.pair.eta[0][0]), 1e-14);
  EXPECT_LE(std::abs(fp.pair.eta_star[0][0]), 1e-14);
  for (const auto& s : fp.solution.trajectory.states()) EXPECT_LE(std::abs(s.q[0]), 1e-14);
}

TEST(FixedPoint, ConeMatchesShooting) {
  const BridgeSpec spec = cone_spec();
  const FixedPointResult fp = schrodinger_fixed_point(spec);
  ASSERT_TRUE(fp.converged) << fp.message;
  EXPECT_LE(sup_distance(fp.solution.trajectory, solve_shooting(spec).trajectory), 1e-5);
  EXPECT_LE(fp.pair.flow_residual(), 1e-5);
}

// The literal sweep order does not contract on the cone bridge; forcing it
// must not report convergence to the bridge.
TEST(FixedPoint, ConeForwardSweepDoesNotContract) {
  FixedPointOptions opt;
  opt.sweep = Sweep::Forward;
  opt.max_iter = 30;
  const BridgeSpec spec = cone_spec();
  bool matched = false;
  try {
    const FixedPointResult fp = schrodinger_fixed_point(spec, opt);
    matched = fp.converged &&
              sup_distance(fp.solution.trajectory, solve_shooting(spec).trajectory) <= 1e-5;
  } catch (const std::exception&) {
  }
  EXPECT_FALSE(matched);
}

TEST(FixedPoint, RejectsBadDamping) {
  FixedPointOptions opt;
  opt.omega = 0.0;
  EXPECT_THROW(schrodinger_fixed_point(quadratic_spec(), opt), ConfigError);
}

}  // namespace
}  // namespace geobridge
