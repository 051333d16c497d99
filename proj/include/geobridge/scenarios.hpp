#ifndef GEOBRIDGE_SCENARIOS_HPP_
#define GEOBRIDGE_SCENARIOS_HPP_

// Named scenarios: each binds a chart or a pair of grid marginals to a
// solver pipeline and a list of checks. Running one yields a JSON document
// {scenario, config_echo, results, checks, timings} plus optional CSV data.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "geobridge/bvp.hpp"
#include "geobridge/charts.hpp"
#include "geobridge/config.hpp"
#include "geobridge/dynamics.hpp"
#include "geobridge/entropic_grid.hpp"
#include "geobridge/errors.hpp"
#include "geobridge/hopfcole.hpp"
#include "geobridge/output.hpp"
#include "geobridge/report.hpp"

namespace geobridge {

struct RunOptions {
  bool artifacts = true;   // trajectory / frame arrays and CSV files
  bool wall_clock = false;  // wall-clock seconds in `timings`
};

struct ScenarioOutcome {
  std::string scenario;
  Json config_echo = Json::object();
  Json results = Json::object();
  std::vector<Check> checks;
  Json timings = Json::object();
  // (file suffix, contents), e.g. ("trajectory.csv", ...)
  std::vector<std::pair<std::string, std::string>> files;

  bool as_expected() const { return all_as_expected(checks); }
  const Check& check(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return c;
    }
    throw ConfigError("no check named '" + name + "' in scenario " + scenario);
  }
};

struct ScenarioInfo {
  std::string name;
  std::string description;
  std::string anchor;
  std::function<Config()> defaults;
  std::function<void(const Config&, const RunOptions&, ScenarioOutcome&)> run;
};

// Rounds every float to 12 significant digits; non-finite values become null.
inline Json rounded(const Json& j) {
  if (j.is_number_float()) return num(j.get<double>());
  if (j.is_array() || j.is_object()) {
    Json out = j;
    for (auto it = out.begin(); it != out.end(); ++it) *it = rounded(*it);
    return out;
  }
  return j;
}

inline Json outcome_json(const ScenarioOutcome& o) {
  Json j;
  j["scenario"] = o.scenario;
  j["config_echo"] = o.config_echo;
  j["results"] = o.results;
  Json checks = Json::array();
  for (const auto& c : o.checks) checks.push_back(check_json(c));
  j["checks"] = checks;
  j["timings"] = o.timings;
  return rounded(j);
}

// A non-optimal trajectory with the endpoints of `base`: the path is
// displaced by amp * sum_j coeff_j sin(j pi t) and the covector rebuilt as
// phi = g qdot + dV from the displaced velocity.
inline Trajectory perturbed_path(const ChartManifold& m, const Trajectory& base,
                                 const Matrix& coeff, double amp) {
  std::vector<PhaseState> states;
  for (int k = 0; k <= base.steps(); ++k) {
    const double t = base[k].t;
    Vector q = base[k].q;
    Vector qdot = base.velocity(m, k);
    for (Eigen::Index j = 0; j < coeff.cols(); ++j) {
      const double w = (j + 1) * std::numbers::pi;
      q += amp * std::sin(w * t) * coeff.col(j);
      qdot += amp * w * std::cos(w * t) * coeff.col(j);
    }
    if (!m.admissible(q)) throw DomainError("perturbed path leaves the chart");
    states.push_back({t, q, metric_pair(m, q).lower * qdot + differential(m, q)});
  }
  return Trajectory(std::move(states));
}

// Max |A_oc - A_m - (V(q_1) - V(q_0))| over `count` random perturbations of
// `base` (three sine modes with N(0, 1/j^2) coefficients, scaled by
// amplitude * (1 + |q_1 - q_0|)). A draw that leaves the chart is retried
// with half the amplitude.
inline double random_path_identity_gap(const ChartManifold& m, const Trajectory& base,
                                       int count, std::uint64_t seed,
                                       double amplitude = 0.05) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const double scale =
      amplitude * (1.0 + (base.back().q - base.front().q).cwiseAbs().maxCoeff());
  double worst = 0.0;
  for (int c = 0; c < count; ++c) {
    Matrix coeff(m.dim, 3);
    for (int i = 0; i < m.dim; ++i) {
      for (int j = 0; j < 3; ++j) coeff(i, j) = nd(rng) / (j + 1);
    }
    double amp = scale;
    for (int attempt = 0;; ++attempt) {
      try {
        const Trajectory tr = perturbed_path(m, base, coeff, amp);
        const ActionPair a = actions_along(m, tr);
        worst = std::max(worst, std::abs(a.oc - a.m - (m.potential(tr.back().q) -
                                                        m.potential(tr.front().q))));
        break;
      } catch (const DomainError&) {
        if (attempt >= 20) throw;
        amp *= 0.5;
      }
    }
  }
  return worst;
}

// Endpoint errors of the RK4 flow from (y, phi0) at N and 2N steps,
// against a 64x finer run. e(N) / e(2N) is about 16 for a fourth-order
// scheme; when e(N) is at roundoff level the flow is integrated exactly
// and the ratio carries no information.
struct OrderProbe {
  double coarse = 0.0;
  double fine = 0.0;
  double ratio() const { return coarse / fine; }
  bool exact() const { return coarse <= 1e-11; }
};

inline OrderProbe integrator_order_probe(const ChartManifold& m, const Vector& y,
                                         const Vector& phi0, int N) {
  const Vector ref = integrate_el(m, y, phi0, 64 * N).back().q;
  return {(integrate_el(m, y, phi0, N).back().q - ref).norm(),
          (integrate_el(m, y, phi0, 2 * N).back().q - ref).norm()};
}

namespace detail {

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline const std::set<std::string>& known_outputs() {
  static const std::set<std::string> s = {"report", "trajectory", "hopfcole", "frames", "csv"};
  return s;
}

inline bool wants(const Config& c, const std::string& what) {
  for (const auto& w : c.words("outputs")) {
    if (!known_outputs().count(w)) {
      throw ConfigError("unknown output '" + w +
                        "' (known: report, trajectory, hopfcole, frames, csv)");
    }
  }
  for (const auto& w : c.words("outputs")) {
    if (w == what) return true;
  }
  return false;
}

inline std::uint64_t seed_of(const Config& c) {
  const auto s = c.get<std::int64_t>("seed");
  if (s < 0) throw ConfigError("seed must be nonnegative");
  return static_cast<std::uint64_t>(s);
}

inline int positive_int(const Config& c, const std::string& key, int lo = 1) {
  const int v = c.integer(key);
  if (v < lo) throw ConfigError("config key '" + key + "' must be >= " + std::to_string(lo));
  return v;
}

inline double positive_number(const Config& c, const std::string& key) {
  const double v = c.number(key);
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError("config key '" + key + "' must be positive");
  }
  return v;
}

// --------------------------------------------------------------------------
// Finite-dimensional bridges
// --------------------------------------------------------------------------

using Entries = std::vector<std::pair<std::string, ConfigValue>>;

inline Entries bridge_defaults(std::vector<double> y, std::vector<double> z) {
  return {
      {"y", std::move(y)},
      {"z", std::move(z)},
      {"N", std::int64_t{1000}},
      {"shooting.tol", 1e-10},
      {"shooting.max_newton", std::int64_t{50}},
      {"direct.action_tol", 1e-6},
      {"direct.max_iter", std::int64_t{20000}},
      {"assumptions.samples", std::int64_t{32}},
      {"random_paths.count", std::int64_t{100}},
      {"random_paths.N", std::int64_t{2000}},
      {"random_paths.amplitude", 0.05},
      {"order.N", std::int64_t{20}},
      {"seed", std::int64_t{0}},
  };
}

inline Entries fixed_point_defaults() {
  return {
      {"fixed_point.omega", 1.0},
      {"fixed_point.tol", 1e-10},
      {"fixed_point.max_iter", std::int64_t{200}},
      {"fixed_point.sweep", std::string("auto")},
  };
}

inline Config make_config(std::vector<Entries> parts, std::vector<std::string> outputs) {
  Entries all;
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  all.emplace_back("outputs", std::move(outputs));
  return Config(std::move(all));
}

enum class HopfCole { Holds, Refused, Violated };

struct BridgePlan {
  HopfCole hopf_cole = HopfCole::Holds;
  bool fixed_point = false;
  // expected outcomes of the four assumption checks
  bool metric_ok = true;
  bool potential_ok = true;
  bool dV_invertible = true;
  bool hessian_injective = true;
  EquivalenceTolerances tolerances{1e-4, 1e-6, 1e-6};  // action gap pinned at 1e-6
};

inline Sweep parse_sweep(const std::string& s) {
  if (s == "auto") return Sweep::Auto;
  if (s == "forward") return Sweep::Forward;
  if (s == "mirrored") return Sweep::Mirrored;
  throw ConfigError("fixed_point.sweep must be auto, forward or mirrored, got '" + s + "'");
}

inline Json trajectory_rows(const Trajectory& tr) {
  Json rows = Json::array();
  for (const auto& s : tr.states()) {
    Json r = Json::array({s.t});
    for (double x : s.q) r.push_back(x);
    for (double x : s.phi) r.push_back(x);
    rows.push_back(r);
  }
  return rows;
}

inline std::string trajectory_csv(const Trajectory& tr) {
  const int n = static_cast<int>(tr.front().q.size());
  std::vector<std::string> header = {"t"};
  for (int i = 0; i < n; ++i) header.push_back("q" + std::to_string(i));
  for (int i = 0; i < n; ++i) header.push_back("phi" + std::to_string(i));
  std::vector<std::vector<double>> rows;
  for (const auto& s : tr.states()) {
    std::vector<double> r = {s.t};
    r.insert(r.end(), s.q.begin(), s.q.end());
    r.insert(r.end(), s.phi.begin(), s.phi.end());
    rows.push_back(std::move(r));
  }
  return csv_table(header, rows);
}

inline Json hopf_cole_rows(const HopfColePair& p) {
  Json rows = Json::array();
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    Json r = Json::array({p.times[k]});
    for (double x : p.eta[k]) r.push_back(x);
    for (double x : p.eta_star[k]) r.push_back(x);
    rows.push_back(r);
  }
  return rows;
}

inline Json solution_json(const BridgeSolution& s) {
  Json j;
  j["method"] = s.method;
  j["converged"] = s.converged;
  j["iterations"] = s.iterations;
  j["endpoint_residual"] = s.residual;
  j["phi0"] = num(s.phi0);
  j["A_oc"] = s.A_oc;
  j["A_m"] = s.A_m;
  j["H0"] = s.H0;
  return j;
}

inline BridgeSpec bridge_spec(const ChartManifold& m, const Config& c) {
  BridgeSpec spec{m, to_vector(c.numbers("y")), to_vector(c.numbers("z"))};
  spec.N = positive_int(c, "N", 2);
  spec.shooting_tol = positive_number(c, "shooting.tol");
  spec.max_newton = positive_int(c, "shooting.max_newton");
  spec.action_tol = positive_number(c, "direct.action_tol");
  return spec;
}

struct BridgeRun {
  BridgeSpec spec;
  BridgeSolution shooting;
};

inline BridgeRun run_bridge(const ChartManifold& m, const Config& c, const BridgePlan& plan,
                            const RunOptions& opt, ScenarioOutcome& out) {
  const BridgeSpec spec = bridge_spec(m, c);
  const std::uint64_t seed = seed_of(c);
  const bool want_trajectory = wants(c, "trajectory");
  const bool want_hopfcole = wants(c, "hopfcole");
  const bool want_csv = wants(c, "csv");
  auto& res = out.results;
  auto& checks = out.checks;
  res["manifold"] = m.name;
  res["dim"] = m.dim;

  const BridgeSolution sol = solve_shooting(spec);
  if (!sol.converged) throw ConvergenceError("shooting: " + sol.message);
  res["shooting"] = solution_json(sol);
  out.timings["shooting_newton_iterations"] = sol.iterations;

  DirectOptions dopt;
  dopt.max_iter = positive_int(c, "direct.max_iter");
  const BridgeSolution direct = solve_direct(spec, dopt);
  if (!direct.converged) throw ConvergenceError("direct method: " + direct.message);
  res["direct"] = solution_json(direct);
  res["direct"]["discrete_el_residual"] = discrete_el_residual(spec, direct.trajectory);
  out.timings["direct_lbfgs_iterations"] = direct.iterations;

  const EquivalenceReport eq = equivalence_report(spec, sol, direct, plan.tolerances);
  res["equivalence"] = {{"path_sup", eq.path_sup},
                        {"action_gap", eq.action_gap},
                        {"sign_flip_sup", eq.sign_flip_sup},
                        {"sign_flip_converged", eq.sign_flip_converged}};
  checks.insert(checks.end(), eq.checks.begin(), eq.checks.end());

  // Non-optimal paths around the optimum, on their own time grid.
  const int count = positive_int(c, "random_paths.count", 0);
  const int Nr = positive_int(c, "random_paths.N", 2);
  const double amp = positive_number(c, "random_paths.amplitude");
  double gap = 0.0;
  if (count > 0) {
    const Trajectory base = Nr == spec.N ? sol.trajectory : integrate_el(m, spec.y, sol.phi0, Nr);
    gap = random_path_identity_gap(m, base, count, seed, amp);
  }
  res["random_paths"] = {{"count", count}, {"N", Nr}, {"amplitude", amp}, {"max_identity_gap", gap}};
  checks.push_back(check_le("random_path_identity_gap", gap, 1e-6));

  const double drift = hamiltonian_drift(m, sol.trajectory);
  const OrderProbe order =
      integrator_order_probe(m, spec.y, sol.phi0, positive_int(c, "order.N", 2));
  res["hamiltonian"] = {{"H0", sol.H0},
                        {"drift", drift},
                        {"order_error_N", order.coarse},
                        {"order_error_2N", order.fine},
                        {"order_ratio", order.exact() ? Json(nullptr) : Json(order.ratio())}};
  checks.push_back(check_le("hamiltonian_drift", drift, 1e-8));
  if (order.exact()) {
    checks.push_back(check_le("integrator_exact", order.coarse, 1e-11));
  } else {
    checks.push_back(check_ge("integrator_order_ratio_min", order.ratio(), 12.0));
    checks.push_back(check_le("integrator_order_ratio_max", order.ratio(), 20.0));
  }

  const int samples = positive_int(c, "assumptions.samples", 10);
  const AssumptionReport ar = check_assumptions(m, samples, seed);
  res["assumptions"] = {{"metric_ok", ar.metric_ok},
                        {"metric_deviation", ar.metric_deviation},
                        {"potential_ok", ar.potential_ok},
                        {"potential_deviation", ar.potential_deviation},
                        {"dV_invertible", ar.dV_invertible},
                        {"hessian_injective", ar.hessian_injective},
                        {"min_singular_value", ar.min_singular_value},
                        {"tolerance", ar.tolerance},
                        {"samples", samples}};
  checks.push_back(check_flag("metric_ok", ar.metric_ok, plan.metric_ok));
  checks.push_back(check_flag("potential_ok", ar.potential_ok, plan.potential_ok));
  checks.push_back(check_flag("dV_invertible", ar.dV_invertible, plan.dV_invertible));
  checks.push_back(check_flag("hessian_injective", ar.hessian_injective, plan.hessian_injective));

  // phi dynamics at fixed covectors, spread over random base points
  const auto qs = sample_points(m, 50, seed + 1);
  const double spread = std::max(el_q_independence(m, sol.phi0, qs),
                                 el_q_independence(m, Vector::Ones(m.dim), qs));
  res["q_independence_spread"] = spread;
  if (plan.hopf_cole == HopfCole::Violated) {
    checks.push_back(check_ge("q_dependence_detected", spread, 1e-2));
  } else {
    checks.push_back(check_le("q_independence", spread, 1e-6));
  }

  Json hc;
  if (plan.hopf_cole == HopfCole::Refused) {
    bool refused = false;
    std::string reason;
    try {
      hopf_cole_forward(m, sol.trajectory);
    } catch (const HypothesisError& e) {
      refused = true;
      reason = e.what();
    }
    hc["refused"] = refused;
    hc["reason"] = reason;
    checks.push_back(check_flag("hopf_cole_refused", refused));
  } else {
    const bool holds = plan.hopf_cole == HopfCole::Holds;
    const HopfColePair p = hopf_cole_forward(m, sol.trajectory, holds);
    hc["hypotheses_enforced"] = holds;
    hc["flow_residual_eta"] = p.flow_residual_eta;
    hc["flow_residual_eta_star"] = p.flow_residual_eta_star;
    if (holds) {
      double round_trip = 0.0;
      for (std::size_t k = 0; k < p.times.size(); ++k) {
        const auto& s = sol.trajectory[k];
        const PhaseState r = reconstruct(m, p.eta[k], p.eta_star[k], s.t, s.q);
        round_trip = std::max({round_trip, (r.q - s.q).cwiseAbs().maxCoeff(),
                               (r.phi - s.phi).cwiseAbs().maxCoeff()});
      }
      hc["round_trip_error"] = round_trip;
      checks.push_back(check_le("hopf_cole_flow_residual", p.flow_residual(), 1e-5));
      checks.push_back(check_le("hopf_cole_round_trip", round_trip, 1e-10));
    } else {
      checks.push_back(check_ge("hopf_cole_flow_violation", p.flow_residual(), 1e-2));
    }
    if (want_hopfcole && opt.artifacts) hc["path"] = hopf_cole_rows(p);
  }
  res["hopf_cole"] = hc;

  if (plan.fixed_point) {
    FixedPointOptions fo;
    fo.omega = c.number("fixed_point.omega");
    fo.tol = positive_number(c, "fixed_point.tol");
    fo.max_iter = positive_int(c, "fixed_point.max_iter");
    fo.sweep = parse_sweep(c.text("fixed_point.sweep"));
    const FixedPointResult fp = schrodinger_fixed_point(spec, fo);
    if (!fp.converged) throw ConvergenceError("fixed point: " + fp.message);
    const double sup = sup_distance(fp.solution.trajectory, sol.trajectory);
    res["fixed_point"] = {{"sweep", sweep_name(fp.sweep_used)},
                          {"iterations", fp.iterations},
                          {"message", fp.message},
                          {"last_step", fp.history.empty() ? 0.0 : fp.history.back()},
                          {"flow_residual", fp.pair.flow_residual()},
                          {"sup_vs_shooting", sup}};
    out.timings["fixed_point_iterations"] = fp.iterations;
    checks.push_back(check_le("fixed_point_vs_shooting_sup", sup, 1e-5));
  }

  if (opt.artifacts && want_trajectory) res["trajectory"] = trajectory_rows(sol.trajectory);
  if (opt.artifacts && want_csv) out.files.emplace_back("trajectory.csv", trajectory_csv(sol.trajectory));
  return {spec, sol};
}

// --------------------------------------------------------------------------
// Grid scenarios
// --------------------------------------------------------------------------

inline Entries density_defaults(const std::string& prefix, const std::string& family,
                                double center, double sigma) {
  return {{prefix + ".family", family},
          {prefix + ".center", center},
          {prefix + ".sigma", sigma},
          {prefix + ".csv", std::string()}};
}

inline Entries grid_defaults(std::int64_t n, double gamma) {
  return {{"grid.n", n}, {"grid.gamma", gamma}, {"grid.kernel", std::string("laplacian")}};
}

inline PeriodicGrid make_grid(const Config& c, int scale = 1) {
  return PeriodicGrid(c.integer("grid.n") * scale, c.number("grid.gamma"));
}

inline Kernel parse_kernel(const std::string& s) {
  if (s == "laplacian") return Kernel::Laplacian;
  if (s == "gaussian") return Kernel::Gaussian;
  throw ConfigError("grid.kernel must be laplacian or gaussian, got '" + s + "'");
}

inline GridDensity make_density(const Config& c, const std::string& prefix,
                                const PeriodicGrid& grid) {
  const std::string& family = c.text(prefix + ".family");
  if (family == "uniform") return uniform_density(grid);
  if (family == "wrapped-gaussian") {
    return wrapped_gaussian(grid, c.number(prefix + ".center"),
                            positive_number(c, prefix + ".sigma"));
  }
  if (family == "csv") {
    const std::string& path = c.text(prefix + ".csv");
    if (path.empty()) throw ConfigError(prefix + ".csv must name a file");
    return load_density_csv(path, grid);
  }
  throw ConfigError(prefix + ".family must be uniform, wrapped-gaussian or csv, got '" +
                    family + "'");
}

inline Json density_rows(const std::vector<double>& times, const std::vector<Vector>& rho) {
  Json rows = Json::array();
  for (std::size_t k = 0; k < times.size(); ++k) {
    Json r = Json::array({times[k]});
    for (double x : rho[k]) r.push_back(x);
    rows.push_back(r);
  }
  return rows;
}

inline std::string density_csv(const std::vector<double>& times, const std::vector<Vector>& rho) {
  std::vector<std::string> header = {"t"};
  for (Eigen::Index i = 0; i < rho.front().size(); ++i) header.push_back("rho" + std::to_string(i));
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> r = {times[k]};
    r.insert(r.end(), rho[k].begin(), rho[k].end());
    rows.push_back(std::move(r));
  }
  return csv_table(header, rows);
}

inline Entries sinkhorn_defaults(int T, int frames) {
  return {{"sinkhorn.tol", 1e-10},
          {"sinkhorn.max_iter", std::int64_t{500}},
          {"time_samples", std::int64_t{T}},
          {"frames", std::int64_t{frames}},
          {"seed", std::int64_t{0}}};
}

inline GridBridgeSolution solve_grid_bridge(const PeriodicGrid& grid, const GridDensity& mu,
                                            const GridDensity& nu, const Config& c) {
  SinkhornOptions so;
  so.tol = positive_number(c, "sinkhorn.tol");
  so.max_iter = positive_int(c, "sinkhorn.max_iter");
  so.kernel = parse_kernel(c.text("grid.kernel"));
  GridBridgeSolution sol = sinkhorn_solve(grid, mu, nu, so);
  if (!sol.converged) {
    throw ConvergenceError("sinkhorn: marginal error " + fmt12(sol.marginal_err) +
                           " after " + std::to_string(sol.iterations) + " iterations");
  }
  return sol;
}

inline Json actions_json(const BridgeActions& a) {
  return {{"time_intervals", a.time_intervals},
          {"A_SB", a.A_SB},
          {"A_SB_star", a.A_SB_star},
          {"A_Y", a.A_Y},
          {"S_mu", a.S_mu},
          {"S_nu", a.S_nu},
          {"sb_identity_gap", a.sb_identity_gap()},
          {"sb_star_identity_gap", a.sb_star_identity_gap()},
          {"residual_sb", a.residuals.sb},
          {"residual_yasue", a.residuals.yasue},
          {"residual_sb_star", a.residuals.sb_star}};
}

struct GridPlan {
  bool static_solution = false;  // uniform marginals: nothing moves
  bool refinement = false;       // continuity residual under grid doubling
};

inline void run_sinkhorn(const Config& c, const GridPlan& plan, const RunOptions& opt,
                         ScenarioOutcome& out) {
  const PeriodicGrid grid = make_grid(c);
  const GridDensity mu = make_density(c, "mu", grid);
  const GridDensity nu = make_density(c, "nu", grid);
  const int T = positive_int(c, "time_samples", 2);
  const int F = positive_int(c, "frames", 2);
  auto& res = out.results;
  auto& checks = out.checks;

  const GridBridgeSolution sol = solve_grid_bridge(grid, mu, nu, c);
  double increase = 0.0;
  for (std::size_t i = 1; i < sol.history.size(); ++i) {
    increase = std::max(increase, sol.history[i] - sol.history[i - 1]);
  }
  res["grid"] = {{"n", grid.n}, {"gamma", grid.gamma}, {"kernel", kernel_name(sol.kernel)}};
  res["sinkhorn"] = {{"iterations", sol.iterations},
                     {"marginal_err", sol.marginal_err},
                     {"max_error_increase", increase}};
  out.timings["sinkhorn_iterations"] = sol.iterations;
  checks.push_back(check_le("sinkhorn_marginal_err", sol.marginal_err, c.number("sinkhorn.tol")));
  checks.push_back(check_le("marginal_err_monotone", increase, 1e-14));

  const BridgeFrames f = bridge_frames(sol, T);
  double mass = 0.0;
  for (const auto& r : f.rho) mass = std::max(mass, std::abs(r.sum() - 1.0));

  std::vector<double> times;
  std::vector<Vector> frames;
  double hc = 0.0, mass_frames = 0.0, uniform_dev = 0.0;
  for (int k = 0; k < F; ++k) {
    const double t = static_cast<double>(k) / (F - 1);
    times.push_back(t);
    frames.push_back(interpolate(sol, t).mass);
    mass_frames = std::max(mass_frames, std::abs(frames.back().sum() - 1.0));
    uniform_dev = std::max(uniform_dev, (frames.back().array() - grid.dx()).abs().maxCoeff());
    const HopfColeConsistency h = hopf_cole_consistency(sol, t);
    hc = std::max({hc, h.product, h.psi});
  }
  mass = std::max(mass, mass_frames);
  res["mass_error"] = mass;
  res["hopf_cole_consistency"] = hc;
  // Exact only for the discrete semigroup; the sampled Gaussian kernel is
  // a semigroup up to discretization error, so there it is just reported.
  if (sol.kernel == Kernel::Laplacian) checks.push_back(check_le("mass_conservation", mass, 1e-12));
  checks.push_back(check_le("hopf_cole_consistency", hc, 1e-12));

  // (mu, nu) swapped, read backwards in time
  const GridBridgeSolution rev = solve_grid_bridge(grid, nu, mu, c);
  double reversal = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    reversal = std::max(reversal, (frames[k] - rev.rho(1.0 - times[k])).cwiseAbs().maxCoeff());
  }
  res["time_reversal_error"] = reversal;
  checks.push_back(check_le("time_reversal", reversal, 1e-10));

  const BridgeActions a = bridge_actions(sol, T);
  res["actions"] = actions_json(a);
  const double scale = 5e-3 * std::max(1.0, a.A_SB);
  checks.push_back(check_le("sb_yasue_identity", std::abs(a.sb_identity_gap()), scale));
  checks.push_back(check_le("sb_star_yasue_identity", std::abs(a.sb_star_identity_gap()), scale));
  // A_SB - A_SB* = 2 (S(nu) - S(mu)); equal actions when the entropies agree.
  checks.push_back(check_le("sb_vs_sb_star",
                            std::abs(a.A_SB - a.A_SB_star - 2.0 * (a.S_nu - a.S_mu)), scale));
  const double flip = std::abs(yasue_action(f, grid.gamma) - yasue_action(f, -grid.gamma));
  res["yasue_gamma_flip"] = flip;
  checks.push_back(check_le("yasue_gamma_sign_invariance", flip, 1e-12 * std::max(1.0, a.A_Y)));

  if (plan.static_solution) {
    checks.push_back(check_le("sinkhorn_iterations", sol.iterations, 1.0));
    checks.push_back(check_le("frames_uniform", uniform_dev, 1e-12));
    checks.push_back(check_le("action_sb", std::abs(a.A_SB), 1e-12));
    checks.push_back(check_le("action_sb_star", std::abs(a.A_SB_star), 1e-12));
    checks.push_back(check_le("action_yasue", std::abs(a.A_Y), 1e-12));
    checks.push_back(check_le("residual_sb", a.residuals.sb, 1e-10));
    checks.push_back(check_le("residual_yasue", a.residuals.yasue, 1e-10));
    checks.push_back(check_le("residual_sb_star", a.residuals.sb_star, 1e-10));
  }

  if (plan.refinement) {
    const PeriodicGrid fine = make_grid(c, 2);
    const GridBridgeSolution sf =
        solve_grid_bridge(fine, make_density(c, "mu", fine), make_density(c, "nu", fine), c);
    const BridgeActions af = bridge_actions(sf, 2 * T);
    const double ratio = a.residuals.yasue / af.residuals.yasue;
    res["refinement"] = {{"n", fine.n},
                         {"time_intervals", 2 * T},
                         {"residual_yasue", af.residuals.yasue},
                         {"ratio", ratio}};
    checks.push_back(check_ge("continuity_residual_ratio_min", ratio, 3.0));
    checks.push_back(check_le("continuity_residual_ratio_max", ratio, 5.0));
  }

  if (opt.artifacts && wants(c, "frames")) res["frames"] = density_rows(times, frames);
  if (opt.artifacts && wants(c, "csv")) out.files.emplace_back("frames.csv", density_csv(times, frames));
}

inline void run_porous(const Config& c, const RunOptions& opt, ScenarioOutcome& out) {
  const PeriodicGrid grid = make_grid(c);
  const GridDensity mu = make_density(c, "mu", grid);
  const GridDensity nu = make_density(c, "nu", grid);
  const double m_exp = c.number("porous.m");
  const int N = c.integer("porous.N_time");
  PorousOptions po;
  po.max_iter = positive_int(c, "porous.max_iter");
  auto& res = out.results;
  auto& checks = out.checks;

  const PorousResult pr = porous_direct(grid, mu, nu, m_exp, N, po);
  if (!pr.converged) throw ConvergenceError("porous: " + pr.message);
  double mass = 0.0;
  for (const auto& r : pr.rho) mass = std::max(mass, std::abs(r.sum() - 1.0));
  res["grid"] = {{"n", grid.n}, {"gamma", grid.gamma}};
  res["porous"] = {{"m", m_exp},
                   {"N_time", N},
                   {"action", pr.action},
                   {"kinetic", pr.kinetic},
                   {"potential", pr.potential},
                   {"constraint_l2", pr.constraint_l2},
                   {"mass_error", mass},
                   {"iterations", pr.iterations},
                   {"message", pr.message}};
  out.timings["porous_lbfgs_iterations"] = pr.iterations;
  checks.push_back(check_le("porous_constraint_l2", pr.constraint_l2, 1e-3));

  // Near m = 1 the mechanics action approaches the entropic Yasue action.
  if (m_exp - 1.0 <= 1e-2) {
    const GridBridgeSolution sol = solve_grid_bridge(grid, mu, nu, c);
    const BridgeActions a = bridge_actions(sol, positive_int(c, "time_samples", 2));
    const double rel = std::abs(pr.action - a.A_Y) / std::max(a.A_Y, 1e-300);
    res["entropic_limit"] = {{"A_Y", a.A_Y}, {"relative_gap", rel}};
    out.timings["sinkhorn_iterations"] = sol.iterations;
    if (a.A_Y > 1e-12) {
      checks.push_back(check_le("entropic_limit_relative_gap", rel, 0.02));
    } else {
      checks.push_back(check_le("entropic_limit_action", std::abs(pr.action), 1e-8));
    }
  }

  std::vector<double> times;
  for (int k = 0; k <= N; ++k) times.push_back(static_cast<double>(k) / N);
  if (opt.artifacts && wants(c, "frames")) res["frames"] = density_rows(times, pr.rho);
  if (opt.artifacts && wants(c, "csv")) out.files.emplace_back("frames.csv", density_csv(times, pr.rho));
}

}  // namespace detail

// Closed form for V = a/2 |q|^2: q(t) = eta0 e^{at} + eta0* e^{-at} per
// coordinate, with eta0 + eta0* = y and eta0 e^a + eta0* e^{-a} = z.
struct QuadraticClosedForm {
  Vector eta0, eta0_star;
  double a = 1.0;

  QuadraticClosedForm(double a_, const Vector& y, const Vector& z) : a(a_) {
    const double ep = std::exp(a), em = std::exp(-a);
    eta0 = (z - em * y) / (ep - em);
    eta0_star = y - eta0;
  }
  Vector q(double t) const { return eta0 * std::exp(a * t) + eta0_star * std::exp(-a * t); }
  Vector phi0() const { return 2.0 * a * eta0; }
};

inline const std::vector<ScenarioInfo>& scenario_registry() {
  using namespace detail;
  static const std::vector<ScenarioInfo> registry = {
      {"quadratic-bridge",
       "Euclidean quadratic potential; shooting vs closed form, Hopf-Cole and fixed point",
       "Hopf-Cole reduction to forward/backward gradient flows",
       [] {
         return make_config({bridge_defaults({1.0}, {2.0}), {{"manifold.a", 1.0}},
                             fixed_point_defaults()},
                            {"report", "trajectory", "hopfcole"});
       },
       [](const Config& c, const RunOptions& opt, ScenarioOutcome& out) {
         const double a = positive_number(c, "manifold.a");
         const int n = static_cast<int>(c.numbers("y").size());
         if (n < 1) throw ConfigError("y must have at least one coordinate");
         BridgePlan plan;
         plan.fixed_point = true;
         const BridgeRun run = run_bridge(charts::euclidean_quadratic(n, a), c, plan, opt, out);
         const QuadraticClosedForm cf(a, run.spec.y, run.spec.z);
         double path = 0.0;
         for (const auto& s : run.shooting.trajectory.states()) {
           path = std::max(path, (s.q - cf.q(s.t)).cwiseAbs().maxCoeff());
         }
         const double phi_err = (run.shooting.phi0 - cf.phi0()).cwiseAbs().maxCoeff();
         out.results["closed_form"] = {{"eta0", num(cf.eta0)},
                                       {"eta0_star", num(cf.eta0_star)},
                                       {"phi0", num(cf.phi0())},
                                       {"q_half", num(cf.q(0.5))},
                                       {"phi0_error", phi_err},
                                       {"path_sup_error", path}};
         out.checks.push_back(check_le("closed_form_phi0", phi_err, 1e-6));
         out.checks.push_back(check_le("closed_form_path_sup", path, 1e-6));
       }},
      {"cone-entropy-bridge",
       "Half-line chart with metric q and potential c q log q + d q; Hopf-Cole and fixed point",
       "finite-dimensional shadow of the entropy on Wasserstein space",
       [] {
         return make_config({bridge_defaults({0.25}, {0.5}),
                             {{"manifold.c", 1.0}, {"manifold.d", 1.0}},
                             fixed_point_defaults()},
                            {"report", "trajectory", "hopfcole"});
       },
       [](const Config& c, const RunOptions& opt, ScenarioOutcome& out) {
         BridgePlan plan;
         plan.fixed_point = true;
         plan.tolerances = {1e-5, 1e-6, 1e-6};
         run_bridge(charts::cone_entropy(c.number("manifold.c"), c.number("manifold.d")), c,
                    plan, opt, out);
       }},
      {"geodesic",
       "V identically zero: straight-line geodesic; Hopf-Cole correctly refused",
       "geodesic example, V = 0",
       [] {
         return make_config({bridge_defaults({0.0, 0.0}, {1.0, 1.0})},
                            {"report", "trajectory"});
       },
       [](const Config& c, const RunOptions& opt, ScenarioOutcome& out) {
         const int n = static_cast<int>(c.numbers("y").size());
         if (n < 1) throw ConfigError("y must have at least one coordinate");
         BridgePlan plan;
         plan.hopf_cole = HopfCole::Refused;
         plan.dV_invertible = false;
         plan.hessian_injective = false;
         const BridgeRun run = run_bridge(charts::flat_free(n), c, plan, opt, out);
         const Vector& y = run.spec.y;
         const Vector& z = run.spec.z;
         double line = 0.0;
         for (const auto& s : run.shooting.trajectory.states()) {
           line = std::max(line, (s.q - ((1.0 - s.t) * y + s.t * z)).cwiseAbs().maxCoeff());
         }
         const double energy = std::abs(run.shooting.A_oc - 0.5 * (z - y).squaredNorm());
         out.results["straight_line"] = {{"sup_error", line}, {"energy_error", energy}};
         out.checks.push_back(check_le("straight_line_sup", line, 1e-10));
         out.checks.push_back(check_le("kinetic_energy", energy, 1e-10));
       }},
      {"linear-potential",
       "V(q) = <f, q>: constant gradient, degenerate Hessian; Hopf-Cole hypotheses fail",
       "linear potential example; Hessian hypothesis of the Hopf-Cole reduction",
       [] {
         return make_config({bridge_defaults({0.0, 0.0}, {1.0, 0.5}),
                             {{"manifold.f", std::vector<double>{1.0, -0.5}}}},
                            {"report", "trajectory"});
       },
       [](const Config& c, const RunOptions& opt, ScenarioOutcome& out) {
         BridgePlan plan;
         plan.hopf_cole = HopfCole::Refused;
         plan.dV_invertible = false;
         plan.hessian_injective = false;
         run_bridge(charts::linear_potential(to_vector(c.numbers("manifold.f"))), c, plan, opt,
                    out);
       }},
      {"sphere-assumption-check",
       "Round sphere in polar chart: inverse metric not constant, Hopf-Cole fails as expected",
       "constancy hypotheses of the Hopf-Cole reduction (negative case)",
       [] {
         return make_config({bridge_defaults({1.0, -0.5}, {2.0, 0.5}), {{"manifold.a", 1.0}}},
                            {"report", "trajectory", "hopfcole"});
       },
       [](const Config& c, const RunOptions& opt, ScenarioOutcome& out) {
         BridgePlan plan;
         plan.hopf_cole = HopfCole::Violated;
         plan.metric_ok = false;
         plan.potential_ok = false;
         run_bridge(charts::sphere_polar(c.number("manifold.a")), c, plan, opt, out);
       }},
      {"gaussian-sinkhorn",
       "Periodic grid, wrapped Gaussians at 0.25 and 0.75: Sinkhorn, interpolation, actions",
       "Schrodinger system and entropic interpolation; action equivalence of SB and Yasue",
       [] {
         return make_config({grid_defaults(64, 0.05),
                             density_defaults("mu", "wrapped-gaussian", 0.25, 0.05),
                             density_defaults("nu", "wrapped-gaussian", 0.75, 0.05),
                             sinkhorn_defaults(200, 11)},
                            {"report", "frames"});
       },
       [](const Config& c, const RunOptions& opt, ScenarioOutcome& out) {
         run_sinkhorn(c, {false, true}, opt, out);
       }},
      {"uniform-sinkhorn",
       "Uniform marginals: static bridge, zero actions and residuals",
       "Schrodinger system, trivial solution",
       [] {
         return make_config({grid_defaults(64, 0.05),
                             density_defaults("mu", "uniform", 0.5, 0.1),
                             density_defaults("nu", "uniform", 0.5, 0.1),
                             sinkhorn_defaults(50, 5)},
                            {"report", "frames"});
       },
       [](const Config& c, const RunOptions& opt, ScenarioOutcome& out) {
         run_sinkhorn(c, {true, false}, opt, out);
       }},
      {"porous-medium",
       "Porous-medium bridge by direct transcription; m near 1 recovers the Yasue action",
       "porous medium example, diffusion gamma Laplacian of rho^m",
       [] {
         return make_config({grid_defaults(32, 0.05),
                             density_defaults("mu", "wrapped-gaussian", 0.25, 0.1),
                             density_defaults("nu", "wrapped-gaussian", 0.75, 0.1),
                             {{"porous.m", 1.001},
                              {"porous.N_time", std::int64_t{32}},
                              {"porous.max_iter", std::int64_t{20000}}},
                             sinkhorn_defaults(200, 2)},
                            {"report", "frames"});
       },
       [](const Config& c, const RunOptions& opt, ScenarioOutcome& out) {
         run_porous(c, opt, out);
       }},
  };
  return registry;
}

inline const ScenarioInfo& find_scenario(const std::string& name) {
  for (const auto& s : scenario_registry()) {
    if (s.name == name) return s;
  }
  std::string known;
  for (const auto& s : scenario_registry()) known += (known.empty() ? "" : ", ") + s.name;
  throw ConfigError("unknown scenario '" + name + "' (known: " + known + ")");
}

// Runs a scenario against a fully populated config. Solver failures and
// domain errors propagate as exceptions.
inline ScenarioOutcome run_scenario(const ScenarioInfo& info, const Config& cfg,
                                    const RunOptions& opt = {}) {
  ScenarioOutcome out;
  out.scenario = info.name;
  out.config_echo = cfg.to_json();
  detail::wants(cfg, "report");  // validates the outputs list up front
  const auto start = std::chrono::steady_clock::now();
  info.run(cfg, opt, out);
  out.results["all_checks_as_expected"] = out.as_expected();
  if (opt.wall_clock) {
    out.timings["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return out;
}

inline ScenarioOutcome run_scenario(const std::string& name, const RunOptions& opt = {}) {
  const ScenarioInfo& info = find_scenario(name);
  return run_scenario(info, info.defaults(), opt);
}

}  // namespace geobridge

#endif  // GEOBRIDGE_SCENARIOS_HPP_
