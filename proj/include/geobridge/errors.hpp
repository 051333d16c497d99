#ifndef GEOBRIDGE_ERRORS_HPP_
#define GEOBRIDGE_ERRORS_HPP_

#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace geobridge {

// Error hierarchy. The CLI maps these onto exit codes:
//   ConfigError -> 2, ConvergenceError -> 3, DomainError (and subclasses) -> 4.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateMetricError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Raised by the one-step integrators when a stage leaves the chart or
// produces non-finite values.
class BlowUpError : public DomainError {
 public:
  BlowUpError(const std::string& what, double time)
      : DomainError(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Theorem hypotheses (flat Assumption checks, invertible differential,
// injective Hessian) not met.
class HypothesisError : public DomainError {
 public:
  using DomainError::DomainError;
};

inline std::string format_point(const Eigen::VectorXd& q) {
  std::ostringstream os;
  os.precision(10);
  os << "(";
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (i) os << ", ";
    os << q[i];
  }
  os << ")";
  return os.str();
}

}  // namespace geobridge

#endif  // GEOBRIDGE_ERRORS_HPP_
