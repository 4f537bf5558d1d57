#pragma once

#include "drc/model/robot_model.hpp"

namespace drc::estimator {

/// Linear extended state observer. x3 estimates the scaled disturbance
/// D^-1 d, so the generalized disturbance itself is D(y1) x3.
struct EsoState {
  VectorXd x1;
  VectorXd x2;
  VectorXd x3;
  double omega0 = 200.0;

  /// Starts at the measurement with a zero disturbance estimate.
  static EsoState from_measurement(const VectorXd& y1, const VectorXd& y2, double omega0);
};

/// Measurements and the known input u_hat = [tau; F_ref]. F_ref carries
/// three entries per foot (swing feet zero).
struct EsoInput {
  VectorXd y1;
  VectorXd y2;
  VectorXd u_hat;
};

/// Model-predicted acceleration f_e + g_e u_hat at (y1, y2).
VectorXd eso_drive(const model::RobotModel& model, const VectorXd& y1, const VectorXd& y2,
                   const VectorXd& u_hat);

/// One explicit-Euler observer step with a precomputed drive f_e + g_e u_hat.
EsoState eso_step(const EsoState& state, const VectorXd& y1, const VectorXd& drive, double dt);

EsoState eso_step(const EsoState& state, const EsoInput& input, const model::RobotModel& model,
                  double dt);

/// Generalized disturbance estimate D(y1) x3.
VectorXd eso_uncertainty(const model::RobotModel& model, const VectorXd& y1, const VectorXd& x3);

/// Scaled error [x1 - x1_hat; (x2 - x2_hat)/w0; (x3 - x3_hat)/w0^2].
VectorXd estimation_error(const VectorXd& x1, const VectorXd& x2, const VectorXd& x3,
                          const EsoState& estimate);

}  // namespace drc::estimator
