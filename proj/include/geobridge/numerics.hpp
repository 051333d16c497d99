#ifndef GEOBRIDGE_NUMERICS_HPP_
#define GEOBRIDGE_NUMERICS_HPP_

// Small numerical toolbox shared by the solvers: central finite differences,
// a classical fourth-order Runge-Kutta step and a limited-memory BFGS
// minimizer with optional preconditioning.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace geobridge {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Central-difference step, relative to the magnitude of the coordinate.
inline double fd_step(double x, double rel = 1e-5) {
  return rel * std::max(1.0, std::abs(x));
}

// d f / d x_i for a scalar function.
template <class F>
Vector central_gradient(F&& f, const Vector& x, double rel = 1e-5) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd_step(x[i], rel);
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// J(r, i) = d F_r / d x_i for a vector-valued function.
template <class F>
Matrix central_jacobian(F&& f, const Vector& x, double rel = 1e-5) {
  Vector xp = x;
  Matrix jac;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd_step(x[i], rel);
    xp[i] = x[i] + h;
    const Vector fp = f(xp);
    xp[i] = x[i] - h;
    const Vector fm = f(xp);
    xp[i] = x[i];
    if (i == 0) jac.resize(fp.size(), x.size());
    jac.col(i) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

// Derivative of a matrix-valued function along coordinate i.
template <class F>
Matrix central_partial(F&& f, const Vector& x, Eigen::Index i,
                       double rel = 1e-5) {
  const double h = fd_step(x[i], rel);
  Vector xp = x;
  xp[i] = x[i] + h;
  Matrix fp = f(xp);
  xp[i] = x[i] - h;
  Matrix fm = f(xp);
  return (fp - fm) / (2.0 * h);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

// One classical RK4 step of x' = f(t, x).
template <class F>
Vector rk4_step(F&& f, double t, const Vector& x, double h) {
  const Vector k1 = f(t, x);
  const Vector k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
  const Vector k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
  const Vector k4 = f(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Composite trapezoid rule on a uniform grid with spacing h.
inline double trapezoid(const std::vector<double>& values, double h) {
  if (values.size() < 2) return 0.0;
  double s = 0.5 * (values.front() + values.back());
  for (std::size_t k = 1; k + 1 < values.size(); ++k) s += values[k];
  return s * h;
}

struct LbfgsOptions {
  int max_iter = 5000;
  int memory = 12;
  // Stop when sqrt(g^T H0 g) falls below this (H0 = preconditioner inverse,
  // identity when none).
  double grad_tol = 1e-10;
  int max_backtracks = 60;
  double armijo = 1e-4;
  // Also stop when f decreased by at most f_rel_tol * max(1, |f|) over the
  // last `window` iterations. Zero disables the test.
  double f_rel_tol = 0.0;
  int window = 10;
};

struct LbfgsResult {
  Vector x;
  double f = std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

// Objective: returns f(x) and writes the gradient. A non-finite value marks
// an inadmissible point; the line search backs off from it.
using Objective = std::function<double(const Vector&, Vector&)>;
// Applies an SPD approximation of the inverse Hessian to a vector.
using Preconditioner = std::function<Vector(const Vector&)>;

inline LbfgsResult lbfgs_minimize(const Objective& objective, Vector x0,
                                  const LbfgsOptions& opt = {},
                                  const Preconditioner& precond = {}) {
  LbfgsResult res;
  const auto apply_h0 = [&](const Vector& v) -> Vector {
    return precond ? precond(v) : v;
  };

  Vector x = std::move(x0);
  Vector g(x.size());
  double f = objective(x, g);
  res.evaluations = 1;
  if (!std::isfinite(f)) {
    res.x = x;
    res.message = "initial point inadmissible";
    return res;
  }

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  int stalls = 0;
  std::deque<double> f_hist{f};

  for (int it = 0; it < opt.max_iter; ++it) {
    const Vector h0g = apply_h0(g);
    const double gnorm = std::sqrt(std::max(0.0, g.dot(h0g)));
    res.grad_norm = gnorm;
    if (gnorm <= opt.grad_tol) {
      res.converged = true;
      res.message = "gradient tolerance reached";
      break;
    }

    // Two-loop recursion.
    Vector q = g;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m);
    for (std::size_t i = m; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    Vector r = apply_h0(q);
    if (m > 0 && !precond) {
      const double gamma =
          s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      r *= gamma;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(r);
      r += s_hist[i] * (alpha[i] - beta);
    }
    Vector dir = -r;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      // Memory produced an ascent direction; restart from the preconditioned
      // steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -h0g;
      slope = g.dot(dir);
    }

    double step = 1.0;
    Vector x_new(x.size()), g_new(x.size());
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      x_new = x + step * dir;
      f_new = objective(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= f + opt.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    res.iterations = it + 1;
    if (!accepted) {
      // At the float64 floor the Armijo test can fail with a tiny but
      // non-negligible gradient; report it rather than loop.
      res.message = "line-search failure";
      break;
    }

    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-16 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double df = std::abs(f - f_new);
    x = x_new;
    g = g_new;
    f = f_new;
    if (df <= 1e-16 * std::max(1.0, std::abs(f))) {
      if (++stalls >= 3) {
        res.converged = true;
        res.message = "objective stalled at machine precision";
        break;
      }
    } else {
      stalls = 0;
    }
    f_hist.push_back(f);
    if (static_cast<int>(f_hist.size()) > opt.window + 1) f_hist.pop_front();
    if (opt.f_rel_tol > 0.0 && static_cast<int>(f_hist.size()) == opt.window + 1 &&
        f_hist.front() - f <= opt.f_rel_tol * std::max(1.0, std::abs(f))) {
      res.converged = true;
      res.message = "relative decrease below tolerance";
      break;
    }
  }
  if (res.message.empty()) res.message = "iteration limit reached";
  res.x = x;
  res.f = f;
  return res;
}

}  // namespace geobridge

#endif  // GEOBRIDGE_NUMERICS_HPP_
