#ifndef GEOBRIDGE_REPORT_HPP_
#define GEOBRIDGE_REPORT_HPP_

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace geobridge {

// One numerical verification: `pass` is the raw outcome of
// value <= tolerance (or the flag itself for boolean checks). Some checks
// are negative controls whose expected outcome is failure.
struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool expect_pass = true;

  bool as_expected() const { return pass == expect_pass; }
};

inline Check check_le(std::string name, double value, double tol,
                      bool expect_pass = true) {
  const bool ok = std::isfinite(value) && value <= tol;
  return {std::move(name), value, tol, ok, expect_pass};
}

inline Check check_ge(std::string name, double value, double bound,
                      bool expect_pass = true) {
  const bool ok = std::isfinite(value) && value >= bound;
  return {std::move(name), value, bound, ok, expect_pass};
}

inline Check check_flag(std::string name, bool flag, bool expect_pass = true) {
  return {std::move(name), flag ? 1.0 : 0.0, 1.0, flag, expect_pass};
}

inline bool all_as_expected(const std::vector<Check>& checks) {
  for (const auto& c : checks) {
    if (!c.as_expected()) return false;
  }
  return true;
}

}  // namespace geobridge

#endif  // GEOBRIDGE_REPORT_HPP_
