#pragma once

#include <vector>

#include "drc/common.hpp"

namespace drc::trajopt {

/// Per-node quantities of a discrete-time optimal control problem. Jacobians
/// are filled only when requested.
struct NodeTerms {
  VectorXd f;  // continuous dynamics
  MatrixXd fx, fu;
  VectorXd eq;  // equality constraints eq(x, u) = 0
  MatrixXd eqx, equ;
  VectorXd res;  // least-squares residuals, cost 0.5 |res|^2
  MatrixXd resx, resu;
  VectorXd ineq;  // inequalities ineq(u) >= 0 on the input only
  MatrixXd inequ;
  std::vector<MatrixXd> ineq_hessian;  // second derivative of each ineq in u
  double barrier_scale = 1.0;          // multiplies the barrier weight at this node
};

/// Problem seen by the solver: nodes x_0..x_{H-1} with inputs u_0..u_{H-1},
/// defects x_{i+1} - x_i - dt (f(x_i, u_i) + offset) = 0, x_0 pinned, and a
/// per-node mask of inputs fixed at exactly zero.
class OcpFunctions {
 public:
  virtual ~OcpFunctions() = default;
  virtual int nodes() const = 0;
  virtual int nx() const = 0;
  virtual int nu() const = 0;
  virtual double dt() const = 0;
  virtual void evaluate(int node, const VectorXd& x, const VectorXd& u, bool derivatives,
                        NodeTerms& out) const = 0;
  virtual VectorXd offset() const { return VectorXd::Zero(nx()); }
  virtual std::vector<bool> zero_inputs(int node) const {
    return std::vector<bool>(static_cast<size_t>(nu()), false);
  }
};

struct SqpSettings {
  int max_iterations = 30;
  double step_tolerance = 1e-6;
  double barrier_weight = 10.0;
  double barrier_delta = 1e-3;
  double hessian_regularization = 1e-8;
  double constraint_regularization = 1e-10;
  // Filter line search.
  double armijo = 1e-4;
  double filter_margin = 1e-6;
  double min_violation = 1e-6;  // below this the iterate counts as feasible
  double max_violation = 1e6;
};

struct SqpResult {
  std::vector<VectorXd> x, u;
  int iterations = 0;
  bool converged = false;
  double cost = 0.0;
  double defect_norm = 0.0;     // max |dynamics defect|
  double equality_norm = 0.0;   // max |eq|
};

/// Relaxed log barrier: -w ln h for h >= delta, quadratic extension below.
double relaxed_barrier(double h, double weight, double delta);
double relaxed_barrier_d1(double h, double weight, double delta);
double relaxed_barrier_d2(double h, double weight, double delta);

/// Gauss-Newton SQP with a filter line search. `x_guess`/`u_guess` hold one
/// entry per node; x_guess[0] is the pinned initial state.
SqpResult solve_sqp(const OcpFunctions& ocp, std::vector<VectorXd> x_guess,
                    std::vector<VectorXd> u_guess, const SqpSettings& settings = {});

}  // namespace drc::trajopt
