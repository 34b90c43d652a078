#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace hafi {

/// Model or data inputs violate a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Transition matrix has spectral radius >= 1.
class NonStationary : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// One-step-ahead forecast covariance is (numerically) singular.
class SingularForecast : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested moments cannot be produced by a density on the given support.
class InfeasibleMoments : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative solver stopped before reaching its tolerance.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, double residual)
      : std::runtime_error(what + " (final residual " + format(residual) + ")"), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  static std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
  }
  double residual_;
};

}  // namespace hafi
