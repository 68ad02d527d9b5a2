#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rfr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// All simulation time is kept in integer microseconds so that multi-rate
/// loops share one exact grid.
using Micros = std::chrono::microseconds;

inline double to_seconds(Micros t) { return static_cast<double>(t.count()) / 1e6; }
inline Micros from_seconds(double s) { return Micros{std::llround(s * 1e6)}; }

/// Precondition or dimension violation at an API boundary.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure (non-PSD covariance, singular innovation covariance).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The secure store failed its integrity check.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Recovery cannot proceed (no consistent checkpoint, gap in the control log).
class UnrecoverableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario validation failure; carries every violated invariant.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> failures);
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

}  // namespace rfr
