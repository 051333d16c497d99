#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "geobridge/charts.hpp"
#include "geobridge/geometry.hpp"

namespace geobridge {
namespace {

Vector random_point(const ChartManifold& m, std::mt19937_64& rng) {
  Vector q(m.dim);
  for (int i = 0; i < m.dim; ++i) {
    std::uniform_real_distribution<double> u(m.sample_box.lower[i], m.sample_box.upper[i]);
    q[i] = u(rng);
  }
  return q;
}

std::vector<ChartManifold> builtin_charts() {
  Matrix A(2, 2);
  A << 2.0, 0.5, 0.5, 1.0;
  return {charts::euclidean(A, Vector{{0.3, -0.2}}), charts::cone_entropy(1.0, 1.0),
          charts::linear_potential(Vector{{1.0, -0.5}}), charts::sphere_polar()};
}

TEST(MetricPair, EuclideanIsIdentity) {
  const auto m = charts::flat_free(2);
  const MetricPair g = metric_pair(m, Vector{{1.0, 2.0}});
  EXPECT_TRUE(g.lower.isApprox(Matrix::Identity(2, 2)));
  EXPECT_TRUE(g.upper.isApprox(Matrix::Identity(2, 2)));
}

TEST(MetricPair, ConeScalarInverse) {
  const auto m = charts::cone_entropy(1.0, 1.0);
  const MetricPair g = metric_pair(m, Vector::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(g.lower(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(g.upper(0, 0), 2.0);
}

TEST(MetricPair, ConeBoundaryIsDegenerate) {
  const auto m = charts::cone_entropy(1.0, 1.0);
  EXPECT_THROW(metric_pair(m, Vector::Constant(1, 0.0)), DegenerateMetricError);
  try {
    metric_pair(m, Vector::Constant(1, 0.0));
  } catch (const DegenerateMetricError& e) {
    EXPECT_NE(std::string(e.what()).find("(0)"), std::string::npos) << e.what();
  }
}

TEST(MetricPair, SpdAndExactInverseAtSamples) {
  std::mt19937_64 rng(7);
  for (const auto& m : builtin_charts()) {
    for (int s = 0; s < 50; ++s) {
      const Vector q = random_point(m, rng);
      const MetricPair g = metric_pair(m, q);
      EXPECT_LE((g.lower * g.upper - Matrix::Identity(m.dim, m.dim)).cwiseAbs().maxCoeff(),
                1e-12)
          << m.name;
      EXPECT_GT(g.upper.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff(), 0.0);
    }
  }
}

TEST(GradPotential, HandValues) {
  EXPECT_DOUBLE_EQ(grad_potential(charts::euclidean_quadratic(1, 1.0), Vector::Constant(1, 3.0))
                       .components[0],
                   3.0);
  // g^{11} V' = 2 (1 + 1/2) = 3
  EXPECT_DOUBLE_EQ(
      grad_potential(charts::cone_entropy(1.0, 1.0), Vector::Constant(1, 2.0)).components[0],
      3.0);
  EXPECT_EQ(grad_potential(charts::flat_free(3), Vector{{1.0, -2.0, 0.5}}).components,
            Vector::Zero(3));
}

TEST(Christoffels, FlatChartVanishes) {
  const auto gamma = christoffels(charts::flat_free(2), Vector{{0.3, 0.4}});
  for (const auto& g : gamma) EXPECT_EQ(g, Matrix::Zero(2, 2));
}

TEST(Christoffels, ConeChart) {
  // g_{11} = 1/q  =>  Gamma^1_{11} = 1/2 g^{11} d_1 g_{11} = -1/(2q)
  const auto m = charts::cone_entropy(1.0, 1.0);
  EXPECT_NEAR(christoffels(m, Vector::Constant(1, 2.0))[0](0, 0), -0.25, 1e-14);
  // Same value through the finite-difference fallback.
  EXPECT_NEAR(christoffels(without_analytic_derivatives(m), Vector::Constant(1, 2.0))[0](0, 0),
              -0.25, 1e-9);
}

// Gamma^k_{ij} g^{jl} + Gamma^l_{ij} g^{jk} = -d_i g^{kl}, with the right-hand
// side from independent central differences of the inverse metric.
TEST(Christoffels, MetricCompatibilityIdentity) {
  std::mt19937_64 rng(11);
  for (const auto& m : builtin_charts()) {
    for (int s = 0; s < 100; ++s) {
      const Vector q = random_point(m, rng);
      const auto gamma = christoffels(m, q);
      const Matrix ginv = m.metric_inv(q);
      for (int i = 0; i < m.dim; ++i) {
        const Matrix dgi = central_partial(m.metric_inv, q, i);
        for (int k = 0; k < m.dim; ++k) {
          for (int l = 0; l < m.dim; ++l) {
            double lhs = 0.0;
            for (int j = 0; j < m.dim; ++j) {
              lhs += gamma[k](i, j) * ginv(j, l) + gamma[l](i, j) * ginv(j, k);
            }
            EXPECT_NEAR(lhs, -dgi(k, l), 1e-6) << m.name << " i=" << i;
          }
        }
      }
      for (int k = 0; k < m.dim; ++k) {
        EXPECT_LE((gamma[k] - gamma[k].transpose()).cwiseAbs().maxCoeff(), 1e-12);
      }
    }
  }
}

TEST(Musical, HandValues) {
  const auto e = charts::flat_free(2);
  EXPECT_EQ(flat(e, {Vector{{0.0, 0.0}}, Vector{{1.0, 2.0}}}).components, (Vector{{1.0, 2.0}}));
  const auto c = charts::cone_entropy(1.0, 1.0);
  EXPECT_DOUBLE_EQ(
      flat(c, {Vector::Constant(1, 2.0), Vector::Constant(1, 3.0)}).components[0], 1.5);
}

TEST(Musical, RoundTrips) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (const auto& m : builtin_charts()) {
    for (int s = 0; s < 50; ++s) {
      const Vector q = random_point(m, rng);
      Vector b(m.dim);
      for (auto& x : b) x = nd(rng);
      const Vector back = sharp(m, flat(m, {q, b})).components;
      const Vector back2 = flat(m, sharp(m, {q, b})).components;
      EXPECT_LE((back - b).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, b.norm()));
      EXPECT_LE((back2 - b).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, b.norm()));
    }
  }
}

double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1e-12, b.norm());
}

TEST(AnalyticDerivatives, MatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (const auto& m : builtin_charts()) {
    const auto fd = without_analytic_derivatives(m);
    for (int s = 0; s < 30; ++s) {
      const Vector q = random_point(m, rng);
      const Vector dv = differential(m, q);
      const Vector dv_fd = differential(fd, q);
      if (dv.norm() > 0) {
        EXPECT_LE(rel_err(dv, dv_fd), 1e-5) << m.name;
      }
      const Matrix h = potential_hessian(m, q);
      if (h.norm() > 0) {
        EXPECT_LE(rel_err(h, potential_hessian(fd, q)), 1e-5) << m.name;
      }
      const Tensor3 dg = metric_inv_derivative(m, q);
      const Tensor3 dg_fd = metric_inv_derivative(fd, q);
      for (int i = 0; i < m.dim; ++i) {
        if (dg[i].norm() > 0) {
          EXPECT_LE(rel_err(dg[i], dg_fd[i]), 1e-5) << m.name;
        }
      }
      const Matrix J = grad_potential_jacobian(m, q);
      if (J.norm() > 0) {
        EXPECT_LE(rel_err(J, grad_potential_jacobian(fd, q)), 1e-5) << m.name;
      }
    }
  }
}

TEST(Charts, RejectBadParameters) {
  EXPECT_THROW(charts::cone_entropy(1.0, 0.0), ConfigError);
  Matrix A(2, 2);
  A << 1.0, 2.0, 0.0, 1.0;
  EXPECT_THROW(charts::euclidean(A, Vector::Zero(2)), ConfigError);
  EXPECT_THROW(metric_pair(charts::flat_free(2), Vector::Zero(3)), DomainError);
}

TEST(Charts, SphereOutsideDomain) {
  EXPECT_THROW(metric_pair(charts::sphere_polar(), Vector{{-0.5, 0.0}}), DomainError);
}

}  // namespace
}  // namespace geobridge
