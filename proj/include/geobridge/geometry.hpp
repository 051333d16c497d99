#ifndef GEOBRIDGE_GEOMETRY_HPP_
#define GEOBRIDGE_GEOMETRY_HPP_

// A manifold with potential described on one global coordinate chart.
//
// The chart supplies the inverse metric g^{jk}(q) and the potential V(q);
// derivatives (dV, Hessian of V, d_i g^{jk}) may be given analytically and
// otherwise fall back to central differences with step 1e-5 * max(1, |q_i|).

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "geobridge/errors.hpp"
#include "geobridge/numerics.hpp"

namespace geobridge {

// d_i g^{jk}: entry i holds the matrix (j, k).
using Tensor3 = std::vector<Matrix>;

struct SampleBox {
  Vector lower;
  Vector upper;
};

struct ChartManifold {
  std::string name;
  int dim = 0;
  std::function<Matrix(const Vector&)> metric_inv;
  std::function<double(const Vector&)> potential;
  // Optional analytic derivatives; empty means finite differences.
  std::function<Vector(const Vector&)> dV;
  std::function<Matrix(const Vector&)> hessV;
  std::function<Tensor3(const Vector&)> d_metric_inv;
  // Empty means every point of R^n is admissible.
  std::function<bool(const Vector&)> domain_guard;
  // Region used for random sampling in property checks.
  SampleBox sample_box;

  bool admissible(const Vector& q) const {
    if (q.size() != dim || !q.allFinite()) return false;
    return !domain_guard || domain_guard(q);
  }
  bool has_analytic_derivatives() const {
    return static_cast<bool>(dV) && static_cast<bool>(hessV) &&
           static_cast<bool>(d_metric_inv);
  }
};

struct Tangent {
  Vector base;
  Vector components;
};

struct Cotangent {
  Vector base;
  Vector components;
};

struct MetricPair {
  Matrix lower;  // g_{ij}
  Matrix upper;  // g^{jk}
};

inline void require_dim(const ChartManifold& m, const Vector& q) {
  if (q.size() != m.dim) {
    throw DomainError("chart '" + m.name + "' expects " +
                      std::to_string(m.dim) + " coordinates, got " +
                      std::to_string(q.size()));
  }
}

inline MetricPair metric_pair(const ChartManifold& m, const Vector& q) {
  require_dim(m, q);
  if (!q.allFinite()) {
    throw DomainError("non-finite coordinates " + format_point(q));
  }
  Matrix upper = m.metric_inv(q);
  const double scale = std::max(1.0, upper.cwiseAbs().maxCoeff());
  if (!upper.allFinite() ||
      (upper - upper.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw DegenerateMetricError("degenerate metric at q = " + format_point(q) +
                                ": inverse metric not finite and symmetric");
  }
  upper = 0.5 * (upper + upper.transpose());
  Eigen::LLT<Matrix> llt(upper);
  if (llt.info() != Eigen::Success) {
    throw DegenerateMetricError("degenerate metric at q = " + format_point(q) +
                                ": inverse metric not positive definite");
  }
  if (m.domain_guard && !m.domain_guard(q)) {
    throw DomainError("q = " + format_point(q) + " outside the domain of chart '" +
                      m.name + "'");
  }
  Matrix lower = llt.solve(Matrix::Identity(m.dim, m.dim));
  lower = 0.5 * (lower + lower.transpose());
  return {std::move(lower), std::move(upper)};
}

// Covector d_i V.
inline Vector differential(const ChartManifold& m, const Vector& q) {
  require_dim(m, q);
  if (m.dV) return m.dV(q);
  return central_gradient(m.potential, q);
}

// Matrix d^2_{ij} V.
inline Matrix potential_hessian(const ChartManifold& m, const Vector& q) {
  require_dim(m, q);
  if (m.hessV) return m.hessV(q);
  Matrix h = central_jacobian([&](const Vector& x) { return differential(m, x); },
                              q);
  return 0.5 * (h + h.transpose());
}

inline Tensor3 metric_inv_derivative(const ChartManifold& m, const Vector& q) {
  require_dim(m, q);
  if (m.d_metric_inv) return m.d_metric_inv(q);
  Tensor3 d(m.dim);
  for (int i = 0; i < m.dim; ++i) d[i] = central_partial(m.metric_inv, q, i);
  return d;
}

// (grad V)^j = g^{jk} d_k V.
inline Tangent grad_potential(const ChartManifold& m, const Vector& q) {
  const MetricPair g = metric_pair(m, q);
  return {q, g.upper * differential(m, q)};
}

// J(j, i) = d_i (g^{jk} d_k V). Uses the product rule with analytic pieces
// when they exist.
inline Matrix grad_potential_jacobian(const ChartManifold& m, const Vector& q) {
  if (m.d_metric_inv || m.hessV) {
    const Tensor3 dg = metric_inv_derivative(m, q);
    const Vector dv = differential(m, q);
    const Matrix h = potential_hessian(m, q);
    const Matrix g = metric_pair(m, q).upper;
    Matrix jac = g * h;  // g^{jk} d_{ki} V, column i
    for (int i = 0; i < m.dim; ++i) jac.col(i) += dg[i] * dv;
    return jac;
  }
  return central_jacobian(
      [&](const Vector& x) -> Vector { return m.metric_inv(x) * differential(m, x); },
      q);
}

// Christoffel symbols of the second kind: entry k holds the matrix (i, j)
// of Gamma^k_{ij}, built from g^{jk} and its first derivatives.
inline Tensor3 christoffels(const ChartManifold& m, const Vector& q) {
  const MetricPair g = metric_pair(m, q);
  const Tensor3 dginv = metric_inv_derivative(m, q);
  const int n = m.dim;
  // d_l g_{ij} = -(g d_l g^{..} g)_{ij}
  Tensor3 dg(n);
  for (int l = 0; l < n; ++l) dg[l] = -g.lower * dginv[l] * g.lower;
  Tensor3 gamma(n, Matrix::Zero(n, n));
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) {
          s += g.upper(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
        }
        gamma[k](i, j) = 0.5 * s;
      }
    }
  }
  return gamma;
}

inline Cotangent flat(const ChartManifold& m, const Tangent& b) {
  const MetricPair g = metric_pair(m, b.base);
  return {b.base, g.lower * b.components};
}

inline Tangent sharp(const ChartManifold& m, const Cotangent& phi) {
  const MetricPair g = metric_pair(m, phi.base);
  return {phi.base, g.upper * phi.components};
}

// Same chart with V, dV and the Hessian multiplied by `scale`. Used for
// potential-strength homotopy and the V -> -V sign flip.
inline ChartManifold scaled_potential(const ChartManifold& m, double scale) {
  ChartManifold out = m;
  out.name = m.name + "*" + std::to_string(scale);
  auto v = m.potential;
  out.potential = [v, scale](const Vector& q) { return scale * v(q); };
  if (m.dV) {
    auto dv = m.dV;
    out.dV = [dv, scale](const Vector& q) -> Vector { return scale * dv(q); };
  }
  if (m.hessV) {
    auto h = m.hessV;
    out.hessV = [h, scale](const Vector& q) -> Matrix { return scale * h(q); };
  }
  return out;
}

// Same chart with the analytic derivative callbacks removed.
inline ChartManifold without_analytic_derivatives(const ChartManifold& m) {
  ChartManifold out = m;
  out.dV = nullptr;
  out.hessV = nullptr;
  out.d_metric_inv = nullptr;
  return out;
}

}  // namespace geobridge

#endif  // GEOBRIDGE_GEOMETRY_HPP_
