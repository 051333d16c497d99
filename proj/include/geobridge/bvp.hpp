#ifndef GEOBRIDGE_BVP_HPP_
#define GEOBRIDGE_BVP_HPP_

// Two-point boundary-value problems q(0) = y, q(1) = z for the control
// problem (Newton shooting on the initial covector) and the mechanics
// problem (direct minimization of the discretized action), plus the
// equivalence checks between the two formulations.

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "geobridge/dynamics.hpp"
#include "geobridge/errors.hpp"
#include "geobridge/geometry.hpp"
#include "geobridge/numerics.hpp"
#include "geobridge/report.hpp"

namespace geobridge {

struct BridgeSpec {
  ChartManifold manifold;
  Vector y;
  Vector z;
  int N = 1000;
  double shooting_tol = 1e-10;
  int max_newton = 50;
  // Gradient tolerance (preconditioned norm) for the direct method.
  double action_tol = 1e-6;
};

struct BridgeSolution {
  Trajectory trajectory;
  Vector phi0;
  double A_oc = 0.0;
  double A_m = 0.0;
  double H0 = 0.0;
  bool converged = false;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::string method;
  std::string message;
};

inline void validate(const BridgeSpec& spec) {
  const auto& m = spec.manifold;
  if (spec.N < 2) throw ConfigError("bridge: N must be >= 2");
  if (spec.y.size() != m.dim || spec.z.size() != m.dim) {
    throw ConfigError("bridge: endpoints must have " + std::to_string(m.dim) +
                      " coordinates");
  }
  if (!m.admissible(spec.y)) {
    throw DomainError("bridge: y = " + format_point(spec.y) + " not admissible");
  }
  if (!m.admissible(spec.z)) {
    throw DomainError("bridge: z = " + format_point(spec.z) + " not admissible");
  }
}

inline BridgeSolution finalize_solution(const ChartManifold& m, Trajectory tr,
                                        const Vector& z) {
  BridgeSolution sol;
  const ActionPair a = actions_along(m, tr);
  sol.A_oc = a.oc;
  sol.A_m = a.m;
  sol.H0 = hamiltonian(m, tr.front());
  sol.phi0 = tr.front().phi;
  sol.residual = (tr.back().q - z).norm();
  sol.trajectory = std::move(tr);
  return sol;
}

// Initial covector: flat of the constant-speed chord velocity plus dV(y).
// Exact when V vanishes identically.
inline Vector chord_guess(const ChartManifold& m, const Vector& y, const Vector& z) {
  return flat(m, {y, z - y}).components + differential(m, y);
}

namespace detail {

struct NewtonOutcome {
  Vector phi0;
  double residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  std::string message;
};

inline Vector shoot_endpoint(const ChartManifold& m, const Vector& y,
                             const Vector& phi0, int N) {
  return integrate_el(m, y, phi0, N).back().q;
}

inline NewtonOutcome newton_shoot(const ChartManifold& m, const Vector& y,
                                  const Vector& z, Vector phi, int N, double tol,
                                  int max_newton) {
  NewtonOutcome out;
  Vector F;
  try {
    F = shoot_endpoint(m, y, phi, N) - z;
  } catch (const BlowUpError& e) {
    out.phi0 = phi;
    out.message = std::string("initial guess blew up: ") + e.what();
    return out;
  }
  const int n = m.dim;
  for (int it = 0; it < max_newton; ++it) {
    out.iterations = it;
    if (F.norm() <= tol) {
      out.converged = true;
      break;
    }
    Matrix J(n, n);
    for (int i = 0; i < n; ++i) {
      const double h = fd_step(phi[i], 1e-6);
      Vector pp = phi, pm = phi;
      pp[i] += h;
      pm[i] -= h;
      try {
        J.col(i) = (shoot_endpoint(m, y, pp, N) - shoot_endpoint(m, y, pm, N)) / (2 * h);
      } catch (const BlowUpError&) {
        // one-sided difference on whichever side stays integrable
        try {
          J.col(i) = (shoot_endpoint(m, y, pp, N) - z - F) / h;
        } catch (const BlowUpError&) {
          J.col(i) = (F - (shoot_endpoint(m, y, pm, N) - z)) / h;
        }
      }
    }
    const Vector delta = J.colPivHouseholderQr().solve(-F);
    if (!delta.allFinite()) {
      out.message = "singular shooting Jacobian";
      break;
    }
    // Backtracking: halve on blow-up or when the residual does not decrease.
    double lambda = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= 30; ++halving, lambda *= 0.5) {
      const Vector trial = phi + lambda * delta;
      try {
        const Vector Ft = shoot_endpoint(m, y, trial, N) - z;
        if (Ft.norm() < F.norm()) {
          phi = trial;
          F = Ft;
          accepted = true;
          break;
        }
      } catch (const BlowUpError&) {
      }
    }
    if (!accepted) {
      out.message = "Newton step rejected after 30 halvings";
      break;
    }
    out.iterations = it + 1;
  }
  out.phi0 = phi;
  out.residual = F.norm();
  if (!out.converged && F.norm() <= tol) out.converged = true;
  if (!out.converged && out.message.empty()) out.message = "Newton iteration limit reached";
  return out;
}

}  // namespace detail

// Newton shooting on phi0 -> q(1; y, phi0) - z with a finite-difference
// Jacobian. Falls back to a homotopy in potential strength (V scaled by
// 0.2, 0.4, ..., 1.0) when plain Newton fails. Each stage predicts
// phi0 += dlambda dV(y), which keeps the initial velocity fixed; a failed
// stage is retried with half the increment.
inline BridgeSolution solve_shooting(const BridgeSpec& spec) {
  validate(spec);
  const auto& m = spec.manifold;
  detail::NewtonOutcome res =
      detail::newton_shoot(m, spec.y, spec.z, chord_guess(m, spec.y, spec.z),
                           spec.N, spec.shooting_tol, spec.max_newton);
  std::string method = "newton";
  int total_iterations = res.iterations;
  if (!res.converged) {
    method = "newton+homotopy";
    const Vector dvy = differential(m, spec.y);
    Vector phi = chord_guess(scaled_potential(m, 0.0), spec.y, spec.z);
    double lambda = 0.0;
    double dl = 0.2;
    detail::NewtonOutcome stage;
    while (lambda < 1.0 && dl >= 0.2 / 64) {
      const double next = std::min(1.0, lambda + dl);
      stage = detail::newton_shoot(scaled_potential(m, next), spec.y, spec.z,
                                   phi + (next - lambda) * dvy, spec.N,
                                   spec.shooting_tol, spec.max_newton);
      total_iterations += stage.iterations;
      if (stage.converged) {
        lambda = next;
        phi = stage.phi0;
      } else {
        dl *= 0.5;
      }
    }
    if (lambda == 1.0) res = stage;
  }

  BridgeSolution sol;
  try {
    sol = finalize_solution(m, integrate_el(m, spec.y, res.phi0, spec.N), spec.z);
  } catch (const BlowUpError& e) {
    throw ConvergenceError(std::string("shooting: best iterate not integrable: ") +
                           e.what());
  }
  sol.converged = sol.residual <= spec.shooting_tol;
  sol.iterations = total_iterations;
  sol.method = method;
  sol.message = sol.converged ? "converged" : res.message;
  return sol;
}

// ---------------------------------------------------------------------------
// Direct method: trapezoid discretization of the mechanics action over the
// interior nodes q_1..q_{N-1} with q_0 = y and q_N = z pinned.
//
//   A = sum_k 1/(4h) dq_k^T (G(q_k) + G(q_{k+1})) dq_k
//     + sum_k w_k h 1/2 U(q_k),      U = dV^T g^{-1} dV,  dq_k = q_{k+1} - q_k
// ---------------------------------------------------------------------------

class DirectAction {
 public:
  explicit DirectAction(const BridgeSpec& spec) : spec_(spec) { validate(spec_); }

  int unknowns() const { return spec_.manifold.dim * (spec_.N - 1); }

  // Interior nodes packed node-major.
  Vector pack(const std::vector<Vector>& nodes) const {
    const int n = spec_.manifold.dim;
    Vector x(unknowns());
    for (int k = 1; k < spec_.N; ++k) x.segment((k - 1) * n, n) = nodes[k];
    return x;
  }

  std::vector<Vector> unpack(const Vector& x) const {
    const int n = spec_.manifold.dim;
    std::vector<Vector> nodes(spec_.N + 1);
    nodes[0] = spec_.y;
    nodes[spec_.N] = spec_.z;
    for (int k = 1; k < spec_.N; ++k) nodes[k] = x.segment((k - 1) * n, n);
    return nodes;
  }

  std::vector<Vector> linear_nodes() const {
    std::vector<Vector> nodes(spec_.N + 1);
    for (int k = 0; k <= spec_.N; ++k) {
      const double t = static_cast<double>(k) / spec_.N;
      nodes[k] = (1.0 - t) * spec_.y + t * spec_.z;
    }
    return nodes;
  }

  // Value and gradient; +inf when a node leaves the chart.
  double operator()(const Vector& x, Vector& grad) const {
    const auto& m = spec_.manifold;
    const int n = m.dim;
    const int N = spec_.N;
    const double h = 1.0 / N;
    const auto nodes = unpack(x);
    for (const auto& q : nodes) {
      if (!m.admissible(q)) return std::numeric_limits<double>::infinity();
    }
    std::vector<NodeData> data(N + 1);
    try {
      for (int k = 0; k <= N; ++k) data[k] = node_data(nodes[k], k > 0 && k < N);
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }

    double value = 0.0;
    grad = Vector::Zero(unknowns());
    for (int k = 0; k < N; ++k) {
      const Vector dq = nodes[k + 1] - nodes[k];
      const Matrix Gs = data[k].G + data[k + 1].G;
      const Vector Gdq = Gs * dq;
      value += dq.dot(Gdq) / (4.0 * h);
      if (k > 0) {  // left end q_k is an unknown
        auto gk = grad.segment((k - 1) * n, n);
        gk -= Gdq / (2.0 * h);
        for (int i = 0; i < n; ++i) gk[i] += dq.dot(data[k].dG[i] * dq) / (4.0 * h);
      }
      if (k + 1 < N) {  // right end q_{k+1} is an unknown
        auto gk = grad.segment(k * n, n);
        gk += Gdq / (2.0 * h);
        for (int i = 0; i < n; ++i) gk[i] += dq.dot(data[k + 1].dG[i] * dq) / (4.0 * h);
      }
    }
    for (int k = 0; k <= N; ++k) {
      const double w = (k == 0 || k == N) ? 0.5 : 1.0;
      value += w * h * 0.5 * data[k].U;
      if (k > 0 && k < N) grad.segment((k - 1) * n, n) += h * 0.5 * data[k].dU;
    }
    return value;
  }

  // Block-tridiagonal kinetic Hessian at `x` (plus h I), used as the
  // preconditioner of the quasi-Newton iteration.
  Eigen::SparseMatrix<double> kinetic_hessian(const Vector& x) const {
    const auto& m = spec_.manifold;
    const int n = m.dim;
    const int N = spec_.N;
    const double h = 1.0 / N;
    const auto nodes = unpack(x);
    std::vector<Matrix> G(N + 1);
    for (int k = 0; k <= N; ++k) G[k] = metric_pair(m, nodes[k]).lower;
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 1; k < N; ++k) {
      const Matrix diag = (G[k - 1] + 2.0 * G[k] + G[k + 1]) / (2.0 * h) +
                          h * Matrix::Identity(n, n);
      const int r = (k - 1) * n;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          trip.emplace_back(r + i, r + j, diag(i, j));
          if (k + 1 < N) {
            const double off = -(G[k](i, j) + G[k + 1](i, j)) / (2.0 * h);
            trip.emplace_back(r + i, r + n + j, off);
            trip.emplace_back(r + n + j, r + i, off);
          }
        }
      }
    }
    Eigen::SparseMatrix<double> H(unknowns(), unknowns());
    H.setFromTriplets(trip.begin(), trip.end());
    return H;
  }

  const BridgeSpec& spec() const { return spec_; }

 private:
  struct NodeData {
    Matrix G;                // g_{ij}
    std::vector<Matrix> dG;  // d_i g_{..}
    double U = 0.0;          // |grad V|^2
    Vector dU;               // d_i U
  };

  NodeData node_data(const Vector& q, bool with_derivatives) const {
    const auto& m = spec_.manifold;
    const MetricPair g = metric_pair(m, q);
    const Vector dv = differential(m, q);
    NodeData d;
    d.G = g.lower;
    const Vector grad = g.upper * dv;
    d.U = dv.dot(grad);
    if (with_derivatives) {
      const Tensor3 dginv = metric_inv_derivative(m, q);
      const Matrix hess = potential_hessian(m, q);
      d.dG.resize(m.dim);
      d.dU = 2.0 * hess * grad;
      for (int i = 0; i < m.dim; ++i) {
        d.dG[i] = -g.lower * dginv[i] * g.lower;
        d.dU[i] += dv.dot(dginv[i] * dv);
      }
    }
    return d;
  }

  BridgeSpec spec_;
};

// Covector reconstruction phi = g (v + grad V) = g v + dV with v from
// second-order finite differences of the node positions.
inline Trajectory trajectory_from_nodes(const ChartManifold& m,
                                        const std::vector<Vector>& nodes) {
  const int N = static_cast<int>(nodes.size()) - 1;
  const double h = 1.0 / N;
  std::vector<PhaseState> states;
  states.reserve(N + 1);
  for (int k = 0; k <= N; ++k) {
    Vector v;
    if (k == 0) {
      v = (-3.0 * nodes[0] + 4.0 * nodes[1] - nodes[2]) / (2.0 * h);
    } else if (k == N) {
      v = (3.0 * nodes[N] - 4.0 * nodes[N - 1] + nodes[N - 2]) / (2.0 * h);
    } else {
      v = (nodes[k + 1] - nodes[k - 1]) / (2.0 * h);
    }
    const MetricPair g = metric_pair(m, nodes[k]);
    const double t = (k == N) ? 1.0 : k * h;
    states.push_back({t, nodes[k], g.lower * v + differential(m, nodes[k])});
  }
  return Trajectory(std::move(states));
}

struct DirectOptions {
  int max_iter = 20000;
  // Initial nodes; linear interpolation between y and z when empty.
  std::vector<Vector> initial_nodes;
};

inline BridgeSolution solve_direct(const BridgeSpec& spec, const DirectOptions& opt = {}) {
  const DirectAction action(spec);
  const auto& m = spec.manifold;
  Vector x0 = action.pack(opt.initial_nodes.empty() ? action.linear_nodes()
                                                    : opt.initial_nodes);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  ldlt.compute(action.kinetic_hessian(x0));
  if (ldlt.info() != Eigen::Success) {
    throw DegenerateMetricError("direct method: kinetic preconditioner not SPD");
  }
  const Preconditioner precond = [&ldlt](const Vector& v) -> Vector {
    return ldlt.solve(v);
  };
  LbfgsOptions lo;
  lo.max_iter = opt.max_iter;
  lo.grad_tol = spec.action_tol * 1e-6;
  const LbfgsResult r = lbfgs_minimize(
      [&action](const Vector& x, Vector& g) { return action(x, g); }, x0, lo, precond);
  if (!std::isfinite(r.f)) {
    throw DomainError("direct method: initial nodes leave the chart");
  }

  BridgeSolution sol = finalize_solution(m, trajectory_from_nodes(m, action.unpack(r.x)),
                                         spec.z);
  sol.converged = r.converged;
  sol.iterations = r.iterations;
  sol.method = "lbfgs";
  sol.message = r.message;
  return sol;
}

// Residual of the direct method's optimality system (the gradient of the
// discrete action) at the nodes of `tr`, in the max norm.
inline double discrete_el_residual(const BridgeSpec& spec, const Trajectory& tr) {
  const DirectAction action(spec);
  std::vector<Vector> nodes;
  for (const auto& s : tr.states()) nodes.push_back(s.q);
  Vector g;
  action(action.pack(nodes), g);
  return g.cwiseAbs().maxCoeff();
}

// Same residual divided by the step: the pointwise Euler-Lagrange defect of
// the discrete scheme, O(h^2) on smooth solutions.
inline double discrete_el_defect(const BridgeSpec& spec, const Trajectory& tr) {
  return discrete_el_residual(spec, tr) * spec.N;
}

inline double sup_distance(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) {
    throw DomainError("sup_distance: trajectories on different grids");
  }
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d = std::max(d, (a[k].q - b[k].q).cwiseAbs().maxCoeff());
  }
  return d;
}

struct EquivalenceTolerances {
  double path = 1e-4;
  double action_gap = 1e-5;
  double sign_flip = 1e-6;
};

struct EquivalenceReport {
  double path_sup = 0.0;
  double action_gap = 0.0;
  double sign_flip_sup = 0.0;
  bool sign_flip_converged = false;
  std::vector<Check> checks;

  bool all_pass() const { return all_as_expected(checks); }
};

// (i) shooting and direct paths agree, (ii) A_oc - A_m equals V(z) - V(y)
// along the shooting solution, (iii) the problem with V -> -V, started from
// the covector phi0 - 2 dV(y), produces the same path.
inline EquivalenceReport equivalence_report(const BridgeSpec& spec,
                                            const BridgeSolution& sol_oc,
                                            const BridgeSolution& sol_m,
                                            const EquivalenceTolerances& tol = {}) {
  const auto& m = spec.manifold;
  EquivalenceReport rep;
  rep.path_sup = sup_distance(sol_oc.trajectory, sol_m.trajectory);
  rep.action_gap =
      std::abs(sol_oc.A_oc - sol_oc.A_m - (m.potential(spec.z) - m.potential(spec.y)));

  BridgeSpec flipped = spec;
  flipped.manifold = scaled_potential(m, -1.0);
  const Vector guess = sol_oc.phi0 - 2.0 * differential(m, spec.y);
  const auto out = detail::newton_shoot(flipped.manifold, spec.y, spec.z, guess, spec.N,
                                        spec.shooting_tol, spec.max_newton);
  rep.sign_flip_converged = out.converged;
  try {
    const Trajectory tr = integrate_el(flipped.manifold, spec.y, out.phi0, spec.N);
    rep.sign_flip_sup = sup_distance(sol_oc.trajectory, tr);
  } catch (const BlowUpError&) {
    rep.sign_flip_sup = std::numeric_limits<double>::infinity();
  }

  rep.checks.push_back(check_le("shooting_vs_direct_sup", rep.path_sup, tol.path));
  rep.checks.push_back(check_le("action_identity_gap", rep.action_gap, tol.action_gap));
  rep.checks.push_back(check_le("sign_flip_path_sup", rep.sign_flip_sup, tol.sign_flip));
  return rep;
}

}  // namespace geobridge

#endif  // GEOBRIDGE_BVP_HPP_
