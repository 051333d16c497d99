// Finite-dimensional bridges: shooting, direct minimization, the Hopf-Cole
// pair and the Schrodinger-type fixed point on the quadratic and cone charts.

#include <cstdio>

#include "geobridge/bvp.hpp"
#include "geobridge/charts.hpp"
#include "geobridge/hopfcole.hpp"

using namespace geobridge;

static void report(const char* label, const BridgeSpec& spec) {
  const BridgeSolution oc = solve_shooting(spec);
  const BridgeSolution m = solve_direct(spec);
  const EquivalenceReport eq = equivalence_report(spec, oc, m);
  std::printf("%s\n", label);
  std::printf("  phi0 = %.9f  (%s, %d Newton steps)\n", oc.phi0[0], oc.method.c_str(),
              oc.iterations);
  std::printf("  A_oc = %.9f  A_m = %.9f  V(z) - V(y) = %.9f\n", oc.A_oc, oc.A_m,
              spec.manifold.potential(spec.z) - spec.manifold.potential(spec.y));
  std::printf("  shooting vs direct: %.3e   sign flip: %.3e\n", eq.path_sup, eq.sign_flip_sup);

  const HopfColePair hc = hopf_cole_forward(spec.manifold, oc.trajectory);
  std::printf("  eta(0) = %.6f  eta*(0) = %.6f  flow residual %.2e\n", hc.eta.front()[0],
              hc.eta_star.front()[0], hc.flow_residual());

  const FixedPointResult fp = schrodinger_fixed_point(spec);
  std::printf("  fixed point: %s sweep, %d iterations, sup vs shooting %.2e\n",
              sweep_name(fp.sweep_used), fp.iterations,
              sup_distance(fp.solution.trajectory, oc.trajectory));
}

int main() {
  report("quadratic V = q^2/2, 1 -> 2",
         {charts::euclidean_quadratic(1, 1.0), Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)});
  report("cone, V = q log q + q, 0.25 -> 0.5",
         {charts::cone_entropy(1.0, 1.0), Vector::Constant(1, 0.25), Vector::Constant(1, 0.5)});

  // The polar sphere violates the constancy hypotheses.
  const AssumptionReport r = check_assumptions(charts::sphere_polar(), 32, 0);
  std::printf("sphere-polar hypotheses: %s\n", r.hypotheses_hold() ? "hold" : r.failures().c_str());
  return 0;
}
