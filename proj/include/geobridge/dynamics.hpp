#ifndef GEOBRIDGE_DYNAMICS_HPP_
#define GEOBRIDGE_DYNAMICS_HPP_

// Euler-Lagrange flow of the control problem in (q, phi) variables, where
// phi = flat(b) is the control lowered to a covector:
//
//   dq^j/dt   = g^{jl}(q) (phi_l - d_l V(q))
//   dphi_i/dt = -1/2 d_i g^{jk} phi_j phi_k + d_i(g^{jk} d_j V) phi_k
//
// This is the Hamiltonian flow of H(q, phi) = 1/2 g^{jk} phi_j phi_k
// - g^{jk} d_j V phi_k. Also: gradient flows of V and the two actions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "geobridge/errors.hpp"
#include "geobridge/geometry.hpp"
#include "geobridge/numerics.hpp"

namespace geobridge {

struct PhaseState {
  double t = 0.0;
  Vector q;
  Vector phi;
};

// Uniform time grid over [0, 1] with N + 1 states.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<PhaseState> states) : states_(std::move(states)) {
    validate();
  }

  const std::vector<PhaseState>& states() const { return states_; }
  std::size_t size() const { return states_.size(); }
  int steps() const { return static_cast<int>(states_.size()) - 1; }
  double step() const { return 1.0 / steps(); }
  const PhaseState& operator[](std::size_t k) const { return states_[k]; }
  const PhaseState& front() const { return states_.front(); }
  const PhaseState& back() const { return states_.back(); }

  // b = sharp(phi)
  Vector control(const ChartManifold& m, std::size_t k) const {
    return sharp(m, {states_[k].q, states_[k].phi}).components;
  }
  // v = b - grad V
  Vector velocity(const ChartManifold& m, std::size_t k) const {
    return control(m, k) - grad_potential(m, states_[k].q).components;
  }

 private:
  void validate() const {
    if (states_.size() < 3) throw DomainError("trajectory needs at least 2 steps");
    if (states_.front().t != 0.0 || std::abs(states_.back().t - 1.0) > 1e-12) {
      throw DomainError("trajectory must start at t = 0 and end at t = 1");
    }
    for (std::size_t k = 1; k < states_.size(); ++k) {
      if (!(states_[k].t > states_[k - 1].t)) {
        throw DomainError("trajectory times must be strictly increasing");
      }
    }
  }

  std::vector<PhaseState> states_;
};

struct ElRates {
  Vector dq;
  Vector dphi;
};

inline ElRates el_vector_field(const ChartManifold& m, const PhaseState& s) {
  const MetricPair g = metric_pair(m, s.q);
  const Vector dv = differential(m, s.q);
  const Tensor3 dg = metric_inv_derivative(m, s.q);
  const Matrix jac = grad_potential_jacobian(m, s.q);  // (j, i) = d_i (grad V)^j
  ElRates r;
  r.dq = g.upper * (s.phi - dv);
  r.dphi.resize(m.dim);
  for (int i = 0; i < m.dim; ++i) {
    r.dphi[i] = -0.5 * s.phi.dot(dg[i] * s.phi) + jac.col(i).dot(s.phi);
  }
  return r;
}

inline double hamiltonian(const ChartManifold& m, const PhaseState& s) {
  const MetricPair g = metric_pair(m, s.q);
  const Vector dv = differential(m, s.q);
  return 0.5 * s.phi.dot(g.upper * s.phi) - dv.dot(g.upper * s.phi);
}

namespace detail {

inline Vector stack(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

// RK4 over [t0, t0 + N h]; `rhs` may throw DomainError, which is rethrown as
// BlowUpError carrying the time of the failing step.
template <class Rhs>
std::vector<Vector> integrate_uniform(Rhs&& rhs, const Vector& x0, int N,
                                      double h, double t0,
                                      const std::function<bool(const Vector&)>& ok) {
  std::vector<Vector> out;
  out.reserve(N + 1);
  out.push_back(x0);
  Vector x = x0;
  for (int k = 0; k < N; ++k) {
    const double t = t0 + k * h;
    try {
      x = rk4_step(rhs, t, x, h);
    } catch (const DomainError& e) {
      throw BlowUpError(std::string("integration left the chart near t = ") +
                            std::to_string(t) + ": " + e.what(),
                        t);
    }
    if (!x.allFinite() || (ok && !ok(x))) {
      throw BlowUpError("integration blew up at t = " + std::to_string(t + h),
                        t + h);
    }
    out.push_back(x);
  }
  return out;
}

}  // namespace detail

inline Trajectory integrate_el(const ChartManifold& m, const Vector& q0,
                               const Vector& phi0, int N) {
  if (N < 2) throw DomainError("integrate_el: need N >= 2 steps");
  require_dim(m, q0);
  require_dim(m, phi0);
  const int n = m.dim;
  const double h = 1.0 / N;
  auto rhs = [&](double, const Vector& x) -> Vector {
    const ElRates r = el_vector_field(m, {0.0, x.head(n), x.tail(n)});
    return detail::stack(r.dq, r.dphi);
  };
  auto ok = [&](const Vector& x) { return m.admissible(x.head(n)); };
  if (!m.admissible(q0)) {
    throw DomainError("initial point " + format_point(q0) + " not admissible");
  }
  const auto xs = detail::integrate_uniform(rhs, detail::stack(q0, phi0), N, h, 0.0, ok);
  std::vector<PhaseState> states;
  states.reserve(N + 1);
  for (int k = 0; k <= N; ++k) {
    const double t = (k == N) ? 1.0 : k * h;
    states.push_back({t, xs[k].head(n), xs[k].tail(n)});
  }
  return Trajectory(std::move(states));
}

// Path driven by a prescribed covector control phi(t):
// dq/dt = sharp(phi(t)) - grad V(q). Not optimal in general; used to probe
// identities that hold along every admissible path.
inline Trajectory integrate_control(const ChartManifold& m, const Vector& q0,
                                    const std::function<Vector(double)>& control,
                                    int N) {
  if (N < 2) throw DomainError("integrate_control: need N >= 2 steps");
  const double h = 1.0 / N;
  auto rhs = [&](double t, const Vector& q) -> Vector {
    const MetricPair g = metric_pair(m, q);
    return g.upper * (control(t) - differential(m, q));
  };
  auto ok = [&](const Vector& q) { return m.admissible(q); };
  const auto qs = detail::integrate_uniform(rhs, q0, N, h, 0.0, ok);
  std::vector<PhaseState> states;
  for (int k = 0; k <= N; ++k) {
    const double t = (k == N) ? 1.0 : k * h;
    states.push_back({t, qs[k], control(t)});
  }
  return Trajectory(std::move(states));
}

struct FlowPath {
  std::vector<double> times;
  std::vector<Vector> points;
};

// dx/dt = sign * grad V(x) on [0, duration] with N RK4 steps.
inline FlowPath gradient_flow(const ChartManifold& m, const Vector& x0, int sign,
                              int N, double duration = 1.0) {
  if (sign != 1 && sign != -1) throw DomainError("gradient_flow: sign must be +1 or -1");
  if (N < 1) throw DomainError("gradient_flow: need N >= 1 steps");
  if (!m.admissible(x0)) {
    throw DomainError("gradient_flow: start " + format_point(x0) + " not admissible");
  }
  const double h = duration / N;
  auto rhs = [&](double, const Vector& x) -> Vector {
    return static_cast<double>(sign) * grad_potential(m, x).components;
  };
  auto ok = [&](const Vector& x) { return m.admissible(x); };
  FlowPath out;
  out.points = detail::integrate_uniform(rhs, x0, N, h, 0.0, ok);
  for (int k = 0; k <= N; ++k) out.times.push_back(k * h);
  return out;
}

struct ActionPair {
  double oc = 0.0;  // integral of 1/2 |b|^2
  double m = 0.0;   // integral of 1/2 |v|^2 + 1/2 |grad V|^2
};

inline ActionPair actions_along(const ChartManifold& m, const Trajectory& tr) {
  std::vector<double> f_oc, f_m;
  f_oc.reserve(tr.size());
  f_m.reserve(tr.size());
  for (const auto& s : tr.states()) {
    const MetricPair g = metric_pair(m, s.q);
    const Vector dv = differential(m, s.q);
    const Vector b = g.upper * s.phi;
    const Vector grad = g.upper * dv;
    const Vector v = b - grad;
    f_oc.push_back(0.5 * b.dot(g.lower * b));
    f_m.push_back(0.5 * v.dot(g.lower * v) + 0.5 * dv.dot(grad));
  }
  return {trapezoid(f_oc, tr.step()), trapezoid(f_m, tr.step())};
}

// Piecewise-linear interpolation of the covector along `tr`.
inline std::function<Vector(double)> covector_interpolant(const Trajectory& tr) {
  return [&tr](double t) -> Vector {
    const int N = tr.steps();
    const double u = std::clamp(t, 0.0, 1.0) * N;
    const int k = std::min(N - 1, static_cast<int>(u));
    const double w = u - k;
    return (1.0 - w) * tr[k].phi + w * tr[k + 1].phi;
  };
}

// max_t |H(s_t) - H(s_0)|
inline double hamiltonian_drift(const ChartManifold& m, const Trajectory& tr) {
  const double h0 = hamiltonian(m, tr.front());
  double drift = 0.0;
  for (const auto& s : tr.states()) {
    drift = std::max(drift, std::abs(hamiltonian(m, s) - h0));
  }
  return drift;
}

}  // namespace geobridge

#endif  // GEOBRIDGE_DYNAMICS_HPP_
