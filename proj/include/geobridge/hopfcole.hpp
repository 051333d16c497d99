#ifndef GEOBRIDGE_HOPFCOLE_HPP_
#define GEOBRIDGE_HOPFCOLE_HPP_

// Geometric Hopf-Cole transformation. When d_i g^{jk} and d_i(g^{jk} d_k V)
// are constant on the chart and dV is invertible with injective Hessian, a
// bridge (q, phi) splits into
//
//   2 dV(eta) = phi,    -2 dV(eta*) = phi - 2 dV(q)
//
// with eta' = grad V(eta) and eta*' = -grad V(eta*). The inverse map is
// dV(q) = dV(eta) + dV(eta*), phi = 2 dV(eta).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geobridge/bvp.hpp"
#include "geobridge/dynamics.hpp"
#include "geobridge/errors.hpp"
#include "geobridge/geometry.hpp"
#include "geobridge/numerics.hpp"

namespace geobridge {

// Uniform draws from the chart's sample box, rejecting inadmissible points.
inline std::vector<Vector> sample_points(const ChartManifold& m, int count,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vector> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 100 * count) {
      throw DomainError("sample box of chart '" + m.name + "' has no admissible points");
    }
    Vector q(m.dim);
    for (int i = 0; i < m.dim; ++i) {
      std::uniform_real_distribution<double> u(m.sample_box.lower[i], m.sample_box.upper[i]);
      q[i] = u(rng);
    }
    if (m.admissible(q)) out.push_back(std::move(q));
  }
  return out;
}

struct InversionResult {
  Vector x;
  double residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool singular = false;
};

// Damped Newton for dV(x) = target starting at `start`; steps are halved
// until the iterate stays admissible and the residual decreases.
inline InversionResult invert_differential(const ChartManifold& m, const Vector& target,
                                           const Vector& start, double tol = 1e-12,
                                           int max_iter = 100) {
  InversionResult r;
  r.x = start;
  if (!m.admissible(start)) return r;
  const double scale = std::max(1.0, target.cwiseAbs().maxCoeff());
  Vector F = differential(m, r.x) - target;
  r.residual = F.cwiseAbs().maxCoeff();
  for (int it = 0; it < max_iter && r.residual > tol * scale; ++it) {
    const Matrix H = potential_hessian(m, r.x);
    Eigen::ColPivHouseholderQR<Matrix> qr(H);
    qr.setThreshold(1e-12);
    if (qr.rank() < m.dim) {
      r.singular = true;
      return r;
    }
    const Vector step = qr.solve(F);
    double lambda = 1.0;
    bool accepted = false;
    for (int half = 0; half < 60; ++half, lambda *= 0.5) {
      const Vector trial = r.x - lambda * step;
      if (!m.admissible(trial)) continue;
      Vector Ft;
      try {
        Ft = differential(m, trial) - target;
      } catch (const DomainError&) {
        continue;
      }
      const double res = Ft.cwiseAbs().maxCoeff();
      if (std::isfinite(res) && res < r.residual) {
        r.x = trial;
        F = Ft;
        r.residual = res;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  r.converged = r.residual <= tol * scale;
  return r;
}

// Tries each start in turn; throws HypothesisError if dV is singular there,
// ConvergenceError if no start reaches the target.
inline Vector invert_differential_or_throw(const ChartManifold& m, const Vector& target,
                                           const std::vector<Vector>& starts,
                                           const std::string& where) {
  bool singular = false;
  for (const auto& s : starts) {
    const InversionResult r = invert_differential(m, target, s);
    if (r.converged) return r.x;
    singular = singular || r.singular;
  }
  if (singular) {
    throw HypothesisError("dV is not invertible (singular Hessian) " + where);
  }
  throw ConvergenceError("Newton inversion of dV failed " + where + " for target " +
                         format_point(target));
}

struct AssumptionReport {
  bool metric_ok = false;
  double metric_deviation = 0.0;     // max pairwise spread of d_i g^{jk}
  bool potential_ok = false;
  double potential_deviation = 0.0;  // max pairwise spread of d_i (grad V)^j
  bool dV_invertible = false;
  bool hessian_injective = false;
  double min_singular_value = 0.0;
  double tolerance = 0.0;
  std::vector<Vector> sample_points;

  bool hypotheses_hold() const {
    return metric_ok && potential_ok && dV_invertible && hessian_injective;
  }
  std::string failures() const {
    std::string s;
    auto add = [&s](bool ok, const char* what) {
      if (!ok) s += (s.empty() ? "" : ", ") + std::string(what);
    };
    add(metric_ok, "inverse metric derivatives not constant");
    add(potential_ok, "derivatives of grad V not constant");
    add(dV_invertible, "dV not invertible");
    add(hessian_injective, "Hessian of V not injective");
    return s;
  }
};

// Default tolerance: 1e-8 with analytic derivatives, 1e-4 otherwise.
inline double default_assumption_tolerance(const ChartManifold& m) {
  return m.has_analytic_derivatives() ? 1e-8 : 1e-4;
}

namespace detail {

inline double max_spread(const std::vector<Matrix>& values) {
  Matrix lo = values.front(), hi = values.front();
  for (const auto& v : values) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).cwiseAbs().maxCoeff();
}

}  // namespace detail

inline AssumptionReport check_assumptions(const ChartManifold& m,
                                          const std::vector<Vector>& sample,
                                          double tol = -1.0) {
  if (sample.size() < 10) {
    throw ConfigError("check_assumptions: need at least 10 sample points, got " +
                      std::to_string(sample.size()));
  }
  for (const auto& q : sample) {
    if (!m.admissible(q)) {
      throw DomainError("check_assumptions: sample point " + format_point(q) +
                        " not admissible");
    }
  }
  AssumptionReport rep;
  rep.tolerance = tol > 0.0 ? tol : default_assumption_tolerance(m);
  rep.sample_points = sample;

  std::vector<Matrix> dg_flat, jac;
  for (const auto& q : sample) {
    const Tensor3 dg = metric_inv_derivative(m, q);
    Matrix stacked(m.dim * m.dim, m.dim);
    for (int i = 0; i < m.dim; ++i) {
      stacked.col(i) = Eigen::Map<const Vector>(dg[i].data(), m.dim * m.dim);
    }
    dg_flat.push_back(stacked);
    jac.push_back(grad_potential_jacobian(m, q));
  }
  rep.metric_deviation = detail::max_spread(dg_flat);
  rep.potential_deviation = detail::max_spread(jac);
  rep.metric_ok = rep.metric_deviation <= rep.tolerance;
  rep.potential_ok = rep.potential_deviation <= rep.tolerance;

  rep.min_singular_value = std::numeric_limits<double>::infinity();
  double max_singular_value = 0.0;
  for (const auto& q : sample) {
    const Vector sv = Eigen::JacobiSVD<Matrix>(potential_hessian(m, q)).singularValues();
    rep.min_singular_value = std::min(rep.min_singular_value, sv.minCoeff());
    max_singular_value = std::max(max_singular_value, sv.maxCoeff());
  }
  rep.hessian_injective =
      rep.min_singular_value > 1e-8 * std::max(1.0, max_singular_value);

  // Recover each sample point from its differential, starting Newton at the
  // next sample point.
  rep.dV_invertible = true;
  for (std::size_t s = 0; s < sample.size(); ++s) {
    const Vector& q = sample[s];
    const Vector& start = sample[(s + 1) % sample.size()];
    const InversionResult r = invert_differential(m, differential(m, q), start);
    if (!r.converged || (r.x - q).cwiseAbs().maxCoeff() > 1e-6 * std::max(1.0, q.norm())) {
      rep.dV_invertible = false;
      break;
    }
  }
  return rep;
}

inline AssumptionReport check_assumptions(const ChartManifold& m, int samples,
                                          std::uint64_t seed, double tol = -1.0) {
  return check_assumptions(m, sample_points(m, samples, seed), tol);
}

struct HopfColePair {
  std::vector<double> times;
  std::vector<Vector> eta;
  std::vector<Vector> eta_star;
  double flow_residual_eta = 0.0;       // max_t |eta' - grad V(eta)|
  double flow_residual_eta_star = 0.0;  // max_t |eta*' + grad V(eta*)|

  double flow_residual() const { return std::max(flow_residual_eta, flow_residual_eta_star); }
};

namespace detail {

// Max over nodes of |x' - sign grad V(x)| with x' from second-order
// differences on the uniform grid.
inline double flow_residual(const ChartManifold& m, const std::vector<Vector>& x,
                            double h, int sign) {
  const std::size_t N = x.size() - 1;
  double r = 0.0;
  for (std::size_t k = 0; k <= N; ++k) {
    Vector d;
    if (k == 0) {
      d = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h);
    } else if (k == N) {
      d = (3.0 * x[N] - 4.0 * x[N - 1] + x[N - 2]) / (2.0 * h);
    } else {
      d = (x[k + 1] - x[k - 1]) / (2.0 * h);
    }
    const Vector g = grad_potential(m, x[k]).components;
    r = std::max(r, (d - sign * g).cwiseAbs().maxCoeff());
  }
  return r;
}

inline void fill_residuals(const ChartManifold& m, HopfColePair& p) {
  const double h = p.times[1] - p.times[0];
  p.flow_residual_eta = flow_residual(m, p.eta, h, +1);
  p.flow_residual_eta_star = flow_residual(m, p.eta_star, h, -1);
}

inline std::string at_time(double t) { return "at t = " + std::to_string(t); }

}  // namespace detail

inline void require_hypotheses(const ChartManifold& m) {
  const AssumptionReport rep = check_assumptions(m, 32, 0);
  if (!rep.hypotheses_hold()) {
    throw HypothesisError("Hopf-Cole hypotheses fail on chart '" + m.name +
                          "': " + rep.failures());
  }
}

// Node-wise transform of a trajectory. With `enforce_hypotheses` false the
// transform is attempted anyway, which is how negative cases are probed.
inline HopfColePair hopf_cole_forward(const ChartManifold& m, const Trajectory& tr,
                                      bool enforce_hypotheses = true) {
  if (enforce_hypotheses) require_hypotheses(m);
  HopfColePair p;
  Vector prev_eta, prev_star;
  for (const auto& s : tr.states()) {
    const Vector half_phi = 0.5 * s.phi;
    const Vector star_target = differential(m, s.q) - half_phi;
    std::vector<Vector> eta_starts, star_starts;
    if (prev_eta.size()) eta_starts.push_back(prev_eta);
    eta_starts.push_back(s.q);
    if (prev_star.size()) star_starts.push_back(prev_star);
    star_starts.push_back(s.q - half_phi);
    star_starts.push_back(s.q);
    const std::string where = detail::at_time(s.t);
    p.times.push_back(s.t);
    p.eta.push_back(invert_differential_or_throw(m, half_phi, eta_starts, where));
    p.eta_star.push_back(invert_differential_or_throw(m, star_target, star_starts, where));
    prev_eta = p.eta.back();
    prev_star = p.eta_star.back();
  }
  detail::fill_residuals(m, p);
  return p;
}

// Inverse map: dV(q) = dV(eta) + dV(eta*), phi = 2 dV(eta).
inline PhaseState reconstruct(const ChartManifold& m, const Vector& eta,
                              const Vector& eta_star, double t = 0.0,
                              const Vector& hint = Vector()) {
  const Vector d_eta = differential(m, eta);
  const Vector target = d_eta + differential(m, eta_star);
  std::vector<Vector> starts;
  if (hint.size()) starts.push_back(hint);
  if (m.admissible(eta + eta_star)) starts.push_back(eta + eta_star);
  starts.push_back(eta);
  starts.push_back(eta_star);
  starts.push_back(0.5 * (m.sample_box.lower + m.sample_box.upper));
  return {t, invert_differential_or_throw(m, target, starts, "in reconstruct"), 2.0 * d_eta};
}

// phi' from the Euler-Lagrange field at fixed phi, spread over sample q.
// Zero when the phi dynamics do not depend on q.
inline double el_q_independence(const ChartManifold& m, const Vector& phi,
                                 const std::vector<Vector>& sample) {
  std::vector<Matrix> rates;
  for (const auto& q : sample) rates.push_back(el_vector_field(m, {0.0, q, phi}).dphi);
  return detail::max_spread(rates);
}

enum class Sweep { Auto, Forward, Mirrored };

inline const char* sweep_name(Sweep s) {
  switch (s) {
    case Sweep::Forward: return "forward";
    case Sweep::Mirrored: return "mirrored";
    default: return "auto";
  }
}

struct FixedPointOptions {
  double omega = 1.0;  // damping in (0, 1]
  double tol = 1e-10;
  int max_iter = 200;
  Sweep sweep = Sweep::Auto;
  bool enforce_hypotheses = true;
};

struct FixedPointResult {
  HopfColePair pair;
  BridgeSolution solution;
  std::vector<double> history;  // successive update sizes
  Sweep sweep_used = Sweep::Forward;
  bool converged = false;
  int iterations = 0;
  std::string message;
};

namespace detail {

// One sweep of the Schrodinger-type system. Forward: the unknown is eta*_0,
// flowed forward by -grad V, matched at t = 1, flowed back by +grad V and
// matched at t = 0. Mirrored: the unknown is eta_0 with the roles swapped.
inline Vector schrodinger_sweep(const ChartManifold& m, const BridgeSpec& spec,
                                const Vector& x0, Sweep sweep) {
  const int sign = sweep == Sweep::Forward ? -1 : +1;
  const Vector x1 = gradient_flow(m, x0, sign, spec.N).points.back();
  const Vector other1 = invert_differential_or_throw(
      m, differential(m, spec.z) - differential(m, x1), {spec.z, x1}, "at t = 1");
  // Backward flow of `other` with sign -sign, as a forward flow of
  // s -> other(1 - s) with sign +sign.
  const Vector other0 = gradient_flow(m, other1, sign, spec.N).points.back();
  return invert_differential_or_throw(m, differential(m, spec.y) - differential(m, other0),
                                      {x0, spec.y}, "at t = 0");
}

}  // namespace detail

inline FixedPointResult schrodinger_fixed_point(const BridgeSpec& spec,
                                                const FixedPointOptions& opt = {}) {
  validate(spec);
  const auto& m = spec.manifold;
  if (!(opt.omega > 0.0 && opt.omega <= 1.0)) {
    throw ConfigError("fixed point: damping omega must lie in (0, 1]");
  }
  if (opt.enforce_hypotheses) require_hypotheses(m);

  // Initial covector from the chord, split as at t = 0.
  const Vector phi0 = chord_guess(m, spec.y, spec.z);
  const Vector dvy = differential(m, spec.y);
  const Vector eta0_init =
      invert_differential_or_throw(m, 0.5 * phi0, {spec.y}, "in the initial guess");
  const Vector star0_init =
      invert_differential_or_throw(m, dvy - 0.5 * phi0, {spec.y}, "in the initial guess");

  FixedPointResult out;
  auto run = [&](Sweep sweep, bool watch_growth) {
    Vector x = sweep == Sweep::Forward ? star0_init : eta0_init;
    out.sweep_used = sweep;
    out.history.clear();
    for (int it = 1; it <= opt.max_iter; ++it) {
      const Vector next = detail::schrodinger_sweep(m, spec, x, sweep);
      Vector updated = (1.0 - opt.omega) * x + opt.omega * next;
      if (!m.admissible(updated)) updated = next;
      const double step = (updated - x).cwiseAbs().maxCoeff();
      out.history.push_back(step);
      out.iterations = it;
      x = updated;
      if (step <= opt.tol) {
        out.converged = true;
        return x;
      }
      const std::size_t k = out.history.size();
      if (watch_growth && k >= 3 && out.history[k - 1] > out.history[k - 2]) {
        throw ConvergenceError("forward sweep is not contracting");
      }
    }
    return x;
  };

  Vector x;
  if (opt.sweep == Sweep::Auto) {
    try {
      x = run(Sweep::Forward, true);
      if (!out.converged) throw ConvergenceError("forward sweep hit the iteration limit");
    } catch (const std::exception& e) {
      out.message = std::string("switched to mirrored sweep: ") + e.what();
      out.converged = false;
      x = run(Sweep::Mirrored, false);
    }
  } else {
    x = run(opt.sweep, false);
  }
  if (!out.converged) {
    out.message += (out.message.empty() ? "" : "; ") +
                   std::string("fixed point not reached in ") +
                   std::to_string(opt.max_iter) + " iterations";
  }

  // Consistent boundary pair at t = 0, then both flows forward in time.
  Vector eta0, star0;
  const auto starts = std::vector<Vector>{x, spec.y};
  if (out.sweep_used == Sweep::Forward) {
    star0 = x;
    eta0 = invert_differential_or_throw(m, dvy - differential(m, x), starts, "at t = 0");
  } else {
    eta0 = x;
    star0 = invert_differential_or_throw(m, dvy - differential(m, x), starts, "at t = 0");
  }
  const FlowPath eta = gradient_flow(m, eta0, +1, spec.N);
  const FlowPath star = gradient_flow(m, star0, -1, spec.N);
  out.pair.times = eta.times;
  out.pair.times.back() = 1.0;
  out.pair.eta = eta.points;
  out.pair.eta_star = star.points;
  detail::fill_residuals(m, out.pair);

  std::vector<PhaseState> states;
  Vector hint = spec.y;
  for (int k = 0; k <= spec.N; ++k) {
    states.push_back(reconstruct(m, eta.points[k], star.points[k], out.pair.times[k], hint));
    hint = states.back().q;
  }
  out.solution = finalize_solution(m, Trajectory(std::move(states)), spec.z);
  out.solution.converged = out.converged && out.solution.residual <= 1e-8;
  out.solution.iterations = out.iterations;
  out.solution.method = std::string("schrodinger-") + sweep_name(out.sweep_used);
  out.solution.message = out.message;
  return out;
}

}  // namespace geobridge

#endif  // GEOBRIDGE_HOPFCOLE_HPP_
