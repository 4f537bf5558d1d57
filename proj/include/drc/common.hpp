#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace drc {

using Eigen::MatrixXd;
using Eigen::Matrix3d;
using Eigen::Vector3d;
using Eigen::VectorXd;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed model or scenario text.
class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// A model, gain or configuration value violates its invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Base pitch too close to +-pi/2 for the ZYX Euler parameterization.
class GimbalLockError : public Error {
 public:
  using Error::Error;
};

/// Linear-algebra or optimizer failure (singular KKT, infeasible task, ...).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Physics integration blew up.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

inline Matrix3d skew(const Vector3d& v) {
  Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace drc
