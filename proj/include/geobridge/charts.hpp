#ifndef GEOBRIDGE_CHARTS_HPP_
#define GEOBRIDGE_CHARTS_HPP_

// Built-in charts, addressable by name from scenario configs.
//
//   euclidean         g^{jk} = I,        V = 1/2 q^T A q + f^T q
//   linear-potential  g^{jk} = I,        V = f^T q (Hessian vanishes)
//   cone-entropy      g^{11} = q (q>0),  V = c q + d ln q
//   sphere-polar      (theta, lon),      g^{-1} = diag(1, 1/sin^2 theta),
//                     V = 1/2 (a (theta - pi/2)^2 + lon^2)
//
// All carry analytic derivatives.

#include <cmath>
#include <numbers>
#include <string>

#include "geobridge/geometry.hpp"

namespace geobridge::charts {

inline ChartManifold euclidean(const Matrix& A, const Vector& f) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || f.size() != n || n < 1) {
    throw ConfigError("euclidean chart: A must be n x n and f length n");
  }
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-14) {
    throw ConfigError("euclidean chart: quadratic matrix A must be symmetric");
  }
  ChartManifold m;
  m.name = "euclidean";
  m.dim = n;
  m.metric_inv = [n](const Vector&) -> Matrix { return Matrix::Identity(n, n); };
  m.potential = [A, f](const Vector& q) { return 0.5 * q.dot(A * q) + f.dot(q); };
  m.dV = [A, f](const Vector& q) -> Vector { return A * q + f; };
  m.hessV = [A](const Vector&) -> Matrix { return A; };
  m.d_metric_inv = [n](const Vector&) {
    return Tensor3(n, Matrix::Zero(n, n));
  };
  m.sample_box = {Vector::Constant(n, -2.0), Vector::Constant(n, 2.0)};
  return m;
}

// V = a/2 |q|^2 on R^n.
inline ChartManifold euclidean_quadratic(int n, double a) {
  return euclidean(a * Matrix::Identity(n, n), Vector::Zero(n));
}

// V identically zero: the geodesic problem.
inline ChartManifold flat_free(int n) {
  ChartManifold m = euclidean(Matrix::Zero(n, n), Vector::Zero(n));
  m.name = "euclidean-free";
  return m;
}

inline ChartManifold linear_potential(const Vector& f) {
  const auto n = f.size();
  ChartManifold m = euclidean(Matrix::Zero(n, n), f);
  m.name = "linear-potential";
  return m;
}

inline ChartManifold cone_entropy(double c, double d) {
  if (!(d != 0.0) || !std::isfinite(c) || !std::isfinite(d)) {
    throw ConfigError("cone-entropy chart: need finite c and nonzero d");
  }
  ChartManifold m;
  m.name = "cone-entropy";
  m.dim = 1;
  m.metric_inv = [](const Vector& q) -> Matrix {
    return Matrix::Constant(1, 1, q[0]);
  };
  m.potential = [c, d](const Vector& q) { return c * q[0] + d * std::log(q[0]); };
  m.dV = [c, d](const Vector& q) -> Vector {
    return Vector::Constant(1, c + d / q[0]);
  };
  m.hessV = [d](const Vector& q) -> Matrix {
    return Matrix::Constant(1, 1, -d / (q[0] * q[0]));
  };
  m.d_metric_inv = [](const Vector&) { return Tensor3{Matrix::Ones(1, 1)}; };
  m.domain_guard = [](const Vector& q) { return q[0] > 0.0; };
  m.sample_box = {Vector::Constant(1, 0.1), Vector::Constant(1, 3.0)};
  return m;
}

inline ChartManifold sphere_polar(double a = 1.0) {
  constexpr double half_pi = std::numbers::pi / 2.0;
  ChartManifold m;
  m.name = "sphere-polar";
  m.dim = 2;
  m.metric_inv = [](const Vector& q) -> Matrix {
    const double s = std::sin(q[0]);
    Matrix g = Matrix::Zero(2, 2);
    g(0, 0) = 1.0;
    g(1, 1) = 1.0 / (s * s);
    return g;
  };
  m.potential = [a](const Vector& q) {
    const double u = q[0] - half_pi;
    return 0.5 * (a * u * u + q[1] * q[1]);
  };
  m.dV = [a](const Vector& q) -> Vector {
    return Vector{{a * (q[0] - half_pi), q[1]}};
  };
  m.hessV = [a](const Vector&) -> Matrix {
    Matrix h = Matrix::Identity(2, 2);
    h(0, 0) = a;
    return h;
  };
  m.d_metric_inv = [](const Vector& q) {
    const double s = std::sin(q[0]);
    Tensor3 d(2, Matrix::Zero(2, 2));
    d[0](1, 1) = -2.0 * std::cos(q[0]) / (s * s * s);
    return d;
  };
  m.domain_guard = [](const Vector& q) {
    return q[0] > 0.0 && q[0] < std::numbers::pi;
  };
  m.sample_box = {Vector{{0.4, -1.0}}, Vector{{std::numbers::pi - 0.4, 1.0}}};
  return m;
}

}  // namespace geobridge::charts

#endif  // GEOBRIDGE_CHARTS_HPP_
