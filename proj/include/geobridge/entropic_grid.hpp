#ifndef GEOBRIDGE_ENTROPIC_GRID_HPP_
#define GEOBRIDGE_ENTROPIC_GRID_HPP_

// Schrodinger bridge on a 1-D periodic grid of n cells (spacing 1/n).
//
// The heat semigroup is P_t = exp(t gamma L) with L the periodic second
// difference over dx^2, so mass conservation and the semigroup law hold
// exactly. Sinkhorn solves mu = eta*_0 (P_1 eta_1), nu = eta_1 (P_1 eta*_0);
// the interpolation is rho_t = (P_{1-t} eta_1) (P_t eta*_0) entrywise.
//
// Masses are per cell; densities are mass / dx.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/MatrixFunctions>

#include "geobridge/errors.hpp"
#include "geobridge/numerics.hpp"

namespace geobridge {

struct PeriodicGrid {
  int n = 64;
  double gamma = 0.05;

  PeriodicGrid() = default;
  PeriodicGrid(int cells, double g) : n(cells), gamma(g) { validate(); }

  double dx() const { return 1.0 / n; }
  double center(int k) const { return (k + 0.5) * dx(); }

  void validate() const {
    if (n < 8 || (n & (n - 1)) != 0) {
      throw ConfigError("grid: cell count must be a power of two >= 8, got " +
                        std::to_string(n));
    }
    if (!(gamma >= 0.01) || !std::isfinite(gamma)) {
      throw ConfigError("grid: gamma must be >= 0.01, got " + std::to_string(gamma));
    }
  }
};

// Entries below this are treated as zero wherever logarithms are taken.
inline constexpr double kPositivityFloor = 1e-300;

struct GridDensity {
  Vector mass;

  GridDensity() = default;
  explicit GridDensity(Vector m) : mass(std::move(m)) { validate(); }

  void validate() const {
    if (mass.size() == 0 || !mass.allFinite() || mass.minCoeff() < 0.0) {
      throw DomainError("density: masses must be finite and nonnegative");
    }
    if (std::abs(mass.sum() - 1.0) > 1e-12) {
      throw DomainError("density: total mass " + std::to_string(mass.sum()) + " != 1");
    }
  }
  bool strictly_positive() const { return mass.minCoeff() > kPositivityFloor; }
};

inline GridDensity uniform_density(const PeriodicGrid& grid) {
  return GridDensity(Vector::Constant(grid.n, 1.0 / grid.n));
}

// Cell-center samples of a Gaussian wrapped onto the unit circle.
inline GridDensity wrapped_gaussian(const PeriodicGrid& grid, double center, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("wrapped-gaussian: sigma must be positive");
  Vector m(grid.n);
  const int wraps = 2 + static_cast<int>(std::ceil(8.0 * sigma));
  for (int k = 0; k < grid.n; ++k) {
    double s = 0.0;
    for (int w = -wraps; w <= wraps; ++w) {
      const double d = grid.center(k) - center + w;
      s += std::exp(-d * d / (2.0 * sigma * sigma));
    }
    m[k] = s;
  }
  if (m.minCoeff() <= kPositivityFloor) {
    throw DomainError("wrapped-gaussian: sigma too small, masses underflow");
  }
  return GridDensity(m / m.sum());
}

// Two columns per line: cell index, mass. A non-numeric first line is a
// header. Masses are renormalized if their sum is within 1e-6 of one.
inline GridDensity load_density_csv(const std::string& path, const PeriodicGrid& grid) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open marginal file '" + path + "'");
  Vector m = Vector::Constant(grid.n, -1.0);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    long idx;
    double value;
    if (!(ss >> idx >> value)) {
      if (lineno == 1) continue;
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'index, mass'");
    }
    if (idx < 0 || idx >= grid.n) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": cell index out of range");
    }
    if (m[idx] >= 0.0) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate cell index");
    }
    m[idx] = value;
  }
  if (m.minCoeff() < 0.0) {
    throw ConfigError(path + ": every cell needs a nonnegative mass");
  }
  if (std::abs(m.sum() - 1.0) > 1e-6) {
    throw ConfigError(path + ": masses sum to " + std::to_string(m.sum()));
  }
  return GridDensity(m / m.sum());
}

inline Matrix periodic_laplacian(const PeriodicGrid& grid) {
  const int n = grid.n;
  const double s = 1.0 / (grid.dx() * grid.dx());
  Matrix L = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    L(i, i) = -2.0 * s;
    L(i, (i + 1) % n) += s;
    L(i, (i + n - 1) % n) += s;
  }
  return L;
}

enum class Kernel { Laplacian, Gaussian };

inline const char* kernel_name(Kernel k) {
  return k == Kernel::Laplacian ? "laplacian" : "gaussian";
}

// P_t. The Gaussian option samples the heat kernel
// exp(-|x - y|^2 / (4 gamma t)) periodically and normalizes rows; it is an
// approximation without the exact semigroup law.
inline Matrix heat_semigroup(const PeriodicGrid& grid, double t,
                             Kernel kernel = Kernel::Laplacian) {
  if (!(t >= 0.0)) throw DomainError("heat_semigroup: t must be >= 0");
  const int n = grid.n;
  if (t == 0.0) return Matrix::Identity(n, n);
  if (kernel == Kernel::Laplacian) {
    const Matrix A = (t * grid.gamma) * periodic_laplacian(grid);
    Matrix P = A.exp();
    return 0.5 * (P + P.transpose());
  }
  Vector row(n);
  const double var4 = 4.0 * grid.gamma * t;
  for (int d = 0; d < n; ++d) {
    double s = 0.0;
    for (int w = -3; w <= 3; ++w) {
      const double x = d * grid.dx() + w;
      s += std::exp(-x * x / var4);
    }
    row[d] = s;
  }
  row /= row.sum();
  Matrix P(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int d = ((i - j) % n + n) % n;
      P(i, j) = row[d];
    }
  }
  return P;
}

namespace detail {

inline void require_positive(const Vector& v, const char* what) {
  if (!v.allFinite() || v.minCoeff() <= kPositivityFloor) {
    throw DomainError(std::string(what) + " lost strict positivity");
  }
}

}  // namespace detail

struct GridBridgeSolution {
  PeriodicGrid grid;
  Kernel kernel = Kernel::Laplacian;
  GridDensity mu, nu;
  Vector eta0_star;
  Vector eta1;
  int iterations = 0;
  double marginal_err = 0.0;
  bool converged = false;
  std::vector<double> history;  // marginal error after each iteration

  // eta_t = P_{1-t} eta_1, eta*_t = P_t eta*_0
  Vector eta(double t) const { return heat_semigroup(grid, 1.0 - t, kernel) * eta1; }
  Vector eta_star(double t) const { return heat_semigroup(grid, t, kernel) * eta0_star; }
  Vector rho(double t) const { return eta(t).cwiseProduct(eta_star(t)); }

  // phi = 2 gamma ln eta with sum(phi) = 0.
  Vector phi(double t) const {
    Vector p = 2.0 * grid.gamma * eta(t).array().log().matrix();
    return p.array() - p.mean();
  }
  // psi = phi - gamma ln rho, same gauge.
  Vector psi(double t) const {
    const Vector e = eta(t), es = eta_star(t);
    Vector p = grid.gamma * (e.array() / es.array()).log().matrix();
    return p.array() - p.mean();
  }
};

struct SinkhornOptions {
  double tol = 1e-10;
  int max_iter = 500;
  Kernel kernel = Kernel::Laplacian;
};

inline GridBridgeSolution sinkhorn_solve(const PeriodicGrid& grid, const GridDensity& mu,
                                         const GridDensity& nu,
                                         const SinkhornOptions& opt = {}) {
  grid.validate();
  mu.validate();
  nu.validate();
  if (mu.mass.size() != grid.n || nu.mass.size() != grid.n) {
    throw ConfigError("sinkhorn: marginals must have one mass per cell");
  }
  if (!mu.strictly_positive() || !nu.strictly_positive()) {
    throw DomainError("sinkhorn: marginals must be strictly positive");
  }
  GridBridgeSolution sol;
  sol.grid = grid;
  sol.kernel = opt.kernel;
  sol.mu = mu;
  sol.nu = nu;
  const Matrix P1 = heat_semigroup(grid, 1.0, opt.kernel);
  sol.eta1 = Vector::Ones(grid.n);
  for (int it = 1; it <= opt.max_iter; ++it) {
    sol.eta0_star = mu.mass.cwiseQuotient(P1 * sol.eta1);
    detail::require_positive(sol.eta0_star, "eta*_0");
    const Vector p0 = P1 * sol.eta0_star;
    sol.eta1 = nu.mass.cwiseQuotient(p0);
    detail::require_positive(sol.eta1, "eta_1");
    sol.marginal_err =
        (sol.eta0_star.cwiseProduct(P1 * sol.eta1) - mu.mass).lpNorm<1>() +
        (sol.eta1.cwiseProduct(p0) - nu.mass).lpNorm<1>();
    sol.history.push_back(sol.marginal_err);
    sol.iterations = it;
    if (sol.marginal_err <= opt.tol) {
      sol.converged = true;
      break;
    }
  }
  return sol;
}

inline GridDensity interpolate(const GridBridgeSolution& sol, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("interpolate: t must lie in [0, 1]");
  Vector r = sol.rho(t);
  // Exact mass is a property of the semigroup; renormalizing would hide it.
  GridDensity d;
  d.mass = std::move(r);
  return d;
}

// Max entrywise deviations of rho = eta eta* and psi = gamma ln(eta / eta*),
// with psi built as phi - gamma ln rho from the ungauged phi = 2 gamma ln eta.
struct HopfColeConsistency {
  double product = 0.0;
  double psi = 0.0;
};

inline HopfColeConsistency hopf_cole_consistency(const GridBridgeSolution& sol, double t) {
  const Vector e = sol.eta(t), es = sol.eta_star(t);
  const Vector rho = sol.rho(t);
  const double g = sol.grid.gamma;
  const Vector phi = 2.0 * g * e.array().log().matrix();
  const Vector psi = phi - g * rho.array().log().matrix();
  const Vector psi_direct = g * (e.array() / es.array()).log().matrix();
  return {(rho - e.cwiseProduct(es)).cwiseAbs().maxCoeff(),
          (psi - psi_direct).cwiseAbs().maxCoeff()};
}

namespace detail {

// Centered periodic difference (f_{i+1} - f_{i-1}) / (2 dx); also the
// discrete divergence.
inline Vector centered(const Vector& f, double dx) {
  const int n = static_cast<int>(f.size());
  Vector out(n);
  for (int i = 0; i < n; ++i) out[i] = (f[(i + 1) % n] - f[(i + n - 1) % n]) / (2.0 * dx);
  return out;
}

inline Vector second_difference(const Vector& f, double dx) {
  const int n = static_cast<int>(f.size());
  Vector out(n);
  for (int i = 0; i < n; ++i) {
    out[i] = (f[(i + 1) % n] - 2.0 * f[i] + f[(i + n - 1) % n]) / (dx * dx);
  }
  return out;
}

}  // namespace detail

// Frames of the bridge on T + 1 uniform time samples, with the fields the
// action and constraint evaluators need. Masses per cell; velocities at
// cell centers.
struct BridgeFrames {
  double dx = 0.0;
  double dt = 0.0;
  std::vector<Vector> rho;     // masses
  std::vector<Vector> b;       // grad phi, phi = 2 gamma ln eta
  std::vector<Vector> v;       // b - gamma grad ln rho
  std::vector<Vector> b_star;  // v - gamma grad ln rho
  std::vector<Vector> grad_log_rho;
};

inline BridgeFrames bridge_frames(const GridBridgeSolution& sol, int T) {
  if (T < 2) throw ConfigError("bridge_actions: need at least 2 time intervals");
  const auto& grid = sol.grid;
  const double g = grid.gamma;
  const Matrix Pd = heat_semigroup(grid, 1.0 / T, sol.kernel);
  std::vector<Vector> es(T + 1), e(T + 1);
  es[0] = sol.eta0_star;
  for (int k = 1; k <= T; ++k) es[k] = Pd * es[k - 1];
  e[T] = sol.eta1;
  for (int k = T - 1; k >= 0; --k) e[k] = Pd * e[k + 1];

  BridgeFrames f;
  f.dx = grid.dx();
  f.dt = 1.0 / T;
  for (int k = 0; k <= T; ++k) {
    const Vector rho = e[k].cwiseProduct(es[k]);
    detail::require_positive(rho, "rho_t");
    const Vector phi = 2.0 * g * e[k].array().log().matrix();
    const Vector b = detail::centered(phi, f.dx);
    const Vector gl = detail::centered(rho.array().log().matrix(), f.dx);
    const Vector v = b - g * gl;
    f.rho.push_back(rho);
    f.b.push_back(b);
    f.v.push_back(v);
    f.b_star.push_back(v - g * gl);
    f.grad_log_rho.push_back(gl);
  }
  return f;
}

// Integral of 1/2 |v|^2 rho + (gamma^2/2) |grad rho|^2 / rho. gamma is a
// parameter so the evaluator can be probed with either sign.
inline double yasue_action(const BridgeFrames& f, double gamma) {
  std::vector<double> integrand;
  for (std::size_t k = 0; k < f.rho.size(); ++k) {
    const auto vk = f.v[k].array();
    const auto gl = f.grad_log_rho[k].array();
    integrand.push_back(
        ((0.5 * vk.square() + 0.5 * gamma * gamma * gl.square()) * f.rho[k].array()).sum());
  }
  return trapezoid(integrand, f.dt);
}

inline double kinetic_action(const BridgeFrames& f, const std::vector<Vector>& field) {
  std::vector<double> integrand;
  for (std::size_t k = 0; k < f.rho.size(); ++k) {
    integrand.push_back((0.5 * field[k].array().square() * f.rho[k].array()).sum());
  }
  return trapezoid(integrand, f.dt);
}

// S(rho) = gamma * integral rho ln rho dx, rho the density.
inline double entropy(const GridDensity& d, double gamma) {
  const double dx = 1.0 / static_cast<double>(d.mass.size());
  double s = 0.0;
  for (double m : d.mass) {
    if (m > 0.0) s += m * std::log(m / dx);
  }
  return gamma * s;
}

struct ResidualNorms {
  double sb = 0.0;       // d_t rho + div(rho b) - gamma L rho
  double yasue = 0.0;    // d_t rho + div(rho v)
  double sb_star = 0.0;  // d_t rho + div(rho b*) + gamma L rho
};

// Space-time L2 norms in density units over interior time samples, with
// centered differences in time.
inline ResidualNorms constraint_residuals(const BridgeFrames& f, double gamma) {
  ResidualNorms r;
  const std::size_t T = f.rho.size() - 1;
  for (std::size_t k = 1; k < T; ++k) {
    const Vector d = f.rho[k] / f.dx;
    const Vector dt = (f.rho[k + 1] - f.rho[k - 1]) / (2.0 * f.dt * f.dx);
    const Vector lap = detail::second_difference(d, f.dx);
    const Vector r1 = dt + detail::centered(d.cwiseProduct(f.b[k]), f.dx) - gamma * lap;
    const Vector r2 = dt + detail::centered(d.cwiseProduct(f.v[k]), f.dx);
    const Vector r3 = dt + detail::centered(d.cwiseProduct(f.b_star[k]), f.dx) + gamma * lap;
    const double w = f.dx * f.dt;
    r.sb += r1.squaredNorm() * w;
    r.yasue += r2.squaredNorm() * w;
    r.sb_star += r3.squaredNorm() * w;
  }
  r.sb = std::sqrt(r.sb);
  r.yasue = std::sqrt(r.yasue);
  r.sb_star = std::sqrt(r.sb_star);
  return r;
}

struct BridgeActions {
  int time_intervals = 0;
  double A_SB = 0.0;
  double A_SB_star = 0.0;
  double A_Y = 0.0;
  double S_mu = 0.0;
  double S_nu = 0.0;
  ResidualNorms residuals;

  // A_SB - A_Y - (S(nu) - S(mu))
  double sb_identity_gap() const { return A_SB - A_Y - (S_nu - S_mu); }
  // A_SB* - A_Y + (S(nu) - S(mu))
  double sb_star_identity_gap() const { return A_SB_star - A_Y + (S_nu - S_mu); }
};

inline BridgeActions bridge_actions(const GridBridgeSolution& sol, int T) {
  const BridgeFrames f = bridge_frames(sol, T);
  const double g = sol.grid.gamma;
  BridgeActions a;
  a.time_intervals = T;
  a.A_SB = kinetic_action(f, f.b);
  a.A_SB_star = kinetic_action(f, f.b_star);
  a.A_Y = yasue_action(f, g);
  a.S_mu = entropy(sol.mu, g);
  a.S_nu = entropy(sol.nu, g);
  a.residuals = constraint_residuals(f, g);
  return a;
}

// ---------------------------------------------------------------------------
// Porous-medium bridge by direct transcription of the mechanics form
//
//   min  sum_k sum_i 1/2 j^2 / rhobar dx dt
//      + trapezoid_k sum_faces (gamma^2 m^2 / 2) (D rho)^2 avg(rho)^(2m-3) dx dt
//   s.t. (rho_{k+1} - rho_k)/dt + (j_{k,i} - j_{k,i-1})/dx = 0,
//
// densities rho at time nodes (ends pinned to the marginals), fluxes j on
// faces i+1/2 at half steps, rhobar the four-point average. The constraint
// enters as a quadratic penalty with lambda stepped from 1e2 to 1e6.
// ---------------------------------------------------------------------------

struct PorousOptions {
  int max_iter = 20000;
  double grad_tol = 1e-10;
  double f_rel_tol = 1e-13;
  std::vector<double> penalties = {1e2, 1e3, 1e4, 1e5, 1e6};
};

class PorousObjective {
 public:
  PorousObjective(const PeriodicGrid& grid, const GridDensity& mu, const GridDensity& nu,
                  double m_exp, int N)
      : n_(grid.n), N_(N), gamma_(grid.gamma), m_(m_exp),
        mu_(mu.mass / grid.dx()), nu_(nu.mass / grid.dx()) {}

  int unknowns() const { return (N_ - 1) * n_ + N_ * n_; }
  int n() const { return n_; }
  int steps() const { return N_; }
  void set_penalty(double lambda) { lambda_ = lambda; }
  double penalty() const { return lambda_; }

  // Densities rho[k] for k = 0..N and fluxes j[k] for k = 0..N-1.
  void unpack(const Vector& x, std::vector<Vector>& rho, std::vector<Vector>& j) const {
    rho.assign(N_ + 1, Vector());
    j.assign(N_, Vector());
    rho[0] = mu_;
    rho[N_] = nu_;
    for (int k = 1; k < N_; ++k) rho[k] = x.segment((k - 1) * n_, n_);
    const int off = (N_ - 1) * n_;
    for (int k = 0; k < N_; ++k) j[k] = x.segment(off + k * n_, n_);
  }

  // Linear densities and the constant-in-time flux that carries mu to nu.
  Vector initial_guess() const {
    Vector x(unknowns());
    for (int k = 1; k < N_; ++k) {
      const double t = static_cast<double>(k) / N_;
      x.segment((k - 1) * n_, n_) = (1.0 - t) * mu_ + t * nu_;
    }
    const double dx = 1.0 / n_;
    Vector flux(n_);
    double c = 0.0;
    for (int i = 0; i < n_; ++i) {
      c -= (nu_[i] - mu_[i]) * dx;
      flux[i] = c;
    }
    flux.array() -= flux.mean();
    const int off = (N_ - 1) * n_;
    for (int k = 0; k < N_; ++k) x.segment(off + k * n_, n_) = flux;
    return x;
  }

  struct Parts {
    double kinetic = 0.0;
    double potential = 0.0;
    double penalty = 0.0;
    double constraint_l2 = 0.0;  // sqrt(sum c^2 dx dt)
  };

  // SPD approximation of the Hessian at x: the exact penalty Hessian
  // lambda dx dt C^T C (C the continuity operator) plus the diagonal of the
  // kinetic and potential terms. Used as the quasi-Newton preconditioner.
  Eigen::SparseMatrix<double> hessian_model(const Vector& x) const {
    const double dx = 1.0 / n_, dt = 1.0 / N_;
    std::vector<Vector> rho, j;
    unpack(x, rho, j);
    const int n = n_;
    const int off = (N_ - 1) * n_;
    auto rho_index = [n](int k, int i) { return (k - 1) * n + i; };
    auto j_index = [n, off](int k, int i) { return off + k * n + i; };
    auto nx = [n](int i) { return (i + 1) % n; };
    auto pv = [n](int i) { return (i + n - 1) % n; };

    std::vector<Eigen::Triplet<double>> ct;
    for (int k = 0; k < N_; ++k) {
      for (int i = 0; i < n_; ++i) {
        const int row = k * n_ + i;
        if (k + 1 < N_) ct.emplace_back(row, rho_index(k + 1, i), 1.0 / dt);
        if (k > 0) ct.emplace_back(row, rho_index(k, i), -1.0 / dt);
        ct.emplace_back(row, j_index(k, i), 1.0 / dx);
        ct.emplace_back(row, j_index(k, pv(i)), -1.0 / dx);
      }
    }
    Eigen::SparseMatrix<double> C(N_ * n_, unknowns());
    C.setFromTriplets(ct.begin(), ct.end());
    Eigen::SparseMatrix<double> H = (lambda_ * dx * dt) * (C.transpose() * C);

    Vector diag = Vector::Zero(unknowns());
    const double c = 0.5 * gamma_ * gamma_ * m_ * m_;
    const double pw = 2.0 * m_ - 3.0;
    for (int k = 0; k < N_; ++k) {
      for (int i = 0; i < n_; ++i) {
        const double rb = 0.25 * (rho[k][i] + rho[k + 1][i] + rho[k][nx(i)] + rho[k + 1][nx(i)]);
        diag[j_index(k, i)] += dx * dt / rb;
        const double a = j[k][i] * j[k][i] / (rb * rb * rb) * dx * dt / 16.0;
        for (int kk : {k, k + 1}) {
          if (kk == 0 || kk == N_) continue;
          diag[rho_index(kk, i)] += a;
          diag[rho_index(kk, nx(i))] += a;
        }
      }
    }
    for (int k = 1; k < N_; ++k) {
      for (int i = 0; i < n_; ++i) {
        const double A = 0.5 * (rho[k][i] + rho[k][nx(i)]);
        const double f = 2.0 * c * std::pow(A, pw) / dx * dt;
        diag[rho_index(k, i)] += f;
        diag[rho_index(k, nx(i))] += f;
      }
    }
    for (int r = 0; r < unknowns(); ++r) H.coeffRef(r, r) += diag[r];
    H.makeCompressed();
    return H;
  }

  Parts parts(const Vector& x) const {
    Vector g;
    Parts p;
    evaluate(x, g, &p, false);
    return p;
  }

  double operator()(const Vector& x, Vector& grad) const {
    return evaluate(x, grad, nullptr, true);
  }

 private:
  double evaluate(const Vector& x, Vector& grad, Parts* parts, bool want_grad) const {
    const double dx = 1.0 / n_, dt = 1.0 / N_;
    std::vector<Vector> rho, j;
    unpack(x, rho, j);
    for (int k = 1; k < N_; ++k) {
      if (!rho[k].allFinite() || rho[k].minCoeff() <= 0.0) {
        return std::numeric_limits<double>::infinity();
      }
    }
    if (want_grad) grad = Vector::Zero(unknowns());
    std::vector<Vector> g_rho(N_ + 1, Vector::Zero(n_)), g_j(N_, Vector::Zero(n_));
    const int n = n_;
    auto nx = [n](int i) { return (i + 1) % n; };
    auto pv = [n](int i) { return (i + n - 1) % n; };

    double kin = 0.0;
    for (int k = 0; k < N_; ++k) {
      for (int i = 0; i < n_; ++i) {
        const double rb = 0.25 * (rho[k][i] + rho[k + 1][i] + rho[k][nx(i)] + rho[k + 1][nx(i)]);
        const double jj = j[k][i];
        kin += 0.5 * jj * jj / rb * dx * dt;
        g_j[k][i] += jj / rb * dx * dt;
        const double a = -0.5 * jj * jj / (rb * rb) * dx * dt * 0.25;
        g_rho[k][i] += a;
        g_rho[k + 1][i] += a;
        g_rho[k][nx(i)] += a;
        g_rho[k + 1][nx(i)] += a;
      }
    }

    const double c = 0.5 * gamma_ * gamma_ * m_ * m_;
    const double pw = 2.0 * m_ - 3.0;
    double pot = 0.0;
    for (int k = 0; k <= N_; ++k) {
      const double w = (k == 0 || k == N_) ? 0.5 * dt : dt;
      for (int i = 0; i < n_; ++i) {
        const double r0 = rho[k][i], r1 = rho[k][nx(i)];
        const double D = (r1 - r0) / dx;
        const double A = 0.5 * (r0 + r1);
        const double Ap = std::pow(A, pw);
        pot += w * c * D * D * Ap * dx;
        const double dD = w * c * 2.0 * D * Ap;                     // d/dD * dx cancels 1/dx
        const double dA = w * c * D * D * pw * Ap / A * dx * 0.5;  // d/d r via A
        g_rho[k][nx(i)] += dD + dA;
        g_rho[k][i] += -dD + dA;
      }
    }

    double pen = 0.0, cl2 = 0.0;
    for (int k = 0; k < N_; ++k) {
      Vector ck(n_);
      for (int i = 0; i < n_; ++i) {
        ck[i] = (rho[k + 1][i] - rho[k][i]) / dt + (j[k][i] - j[k][pv(i)]) / dx;
      }
      cl2 += ck.squaredNorm() * dx * dt;
      pen += 0.5 * lambda_ * ck.squaredNorm() * dx * dt;
      for (int i = 0; i < n_; ++i) {
        g_rho[k + 1][i] += lambda_ * ck[i] * dx;
        g_rho[k][i] -= lambda_ * ck[i] * dx;
        g_j[k][i] += lambda_ * dt * (ck[i] - ck[nx(i)]);
      }
    }

    if (parts) *parts = {kin, pot, pen, std::sqrt(cl2)};
    if (want_grad) {
      for (int k = 1; k < N_; ++k) grad.segment((k - 1) * n_, n_) = g_rho[k];
      const int off = (N_ - 1) * n_;
      for (int k = 0; k < N_; ++k) grad.segment(off + k * n_, n_) = g_j[k];
    }
    return kin + pot + pen;
  }

  int n_, N_;
  double gamma_, m_;
  Vector mu_, nu_;
  double lambda_ = 1e2;
};

struct PorousResult {
  std::vector<Vector> rho;  // masses per cell at t_k = k / N
  std::vector<Vector> flux;
  double action = 0.0;  // kinetic + potential, penalty excluded
  double kinetic = 0.0;
  double potential = 0.0;
  double constraint_l2 = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string message;
};

inline PorousResult porous_direct(const PeriodicGrid& grid, const GridDensity& mu,
                                  const GridDensity& nu, double m_exp, int N_time,
                                  const PorousOptions& opt = {}) {
  grid.validate();
  if (!(m_exp > 1.0)) throw ConfigError("porous: exponent m must exceed 1");
  if (grid.n > 64 || N_time > 32 || N_time < 2) {
    throw ConfigError("porous: sizes limited to n <= 64 cells and 2 <= N_time <= 32");
  }
  if (mu.mass.size() != grid.n || nu.mass.size() != grid.n) {
    throw ConfigError("porous: marginals must have one mass per cell");
  }
  if (!mu.strictly_positive() || !nu.strictly_positive()) {
    throw DomainError("porous: marginals must be strictly positive");
  }
  PorousObjective obj(grid, mu, nu, m_exp, N_time);
  Vector x = obj.initial_guess();
  PorousResult out;
  for (std::size_t stage = 0; stage < opt.penalties.size(); ++stage) {
    obj.set_penalty(opt.penalties[stage]);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(obj.hessian_model(x));
    if (ldlt.info() != Eigen::Success) {
      throw DomainError("porous: preconditioner factorization failed");
    }
    const Preconditioner precond = [&ldlt](const Vector& v) -> Vector { return ldlt.solve(v); };
    LbfgsOptions lo;
    lo.max_iter = opt.max_iter;
    lo.grad_tol = opt.grad_tol;
    lo.f_rel_tol = opt.f_rel_tol;
    const LbfgsResult r = lbfgs_minimize(
        [&obj](const Vector& z, Vector& g) { return obj(z, g); }, x, lo, precond);
    x = r.x;
    out.iterations += r.iterations;
    // Earlier stages only provide warm starts; the last one decides.
    if (stage + 1 == opt.penalties.size()) {
      out.converged = r.converged;
      out.message = r.message;
    }
  }
  std::vector<Vector> rho, j;
  obj.unpack(x, rho, j);
  for (auto& r : rho) out.rho.push_back(r * grid.dx());
  out.flux = std::move(j);
  const auto p = obj.parts(x);
  out.kinetic = p.kinetic;
  out.potential = p.potential;
  out.action = p.kinetic + p.potential;
  out.constraint_l2 = p.constraint_l2;
  return out;
}

}  // namespace geobridge

#endif  // GEOBRIDGE_ENTROPIC_GRID_HPP_
