#include "drc/estimator/eso.hpp"

#include "drc/model/dynamics.hpp"

namespace drc::estimator {

EsoState EsoState::from_measurement(const VectorXd& y1, const VectorXd& y2, double omega0) {
  if (!(omega0 > 0.0)) throw InvariantError("ESO bandwidth omega0 must be positive");
  return {y1, y2, VectorXd::Zero(y1.size()), omega0};
}

VectorXd eso_drive(const model::RobotModel& model, const VectorXd& y1, const VectorXd& y2,
                   const VectorXd& u_hat) {
  const int n = model.num_joints();
  const int nf = model.num_feet();
  if (u_hat.size() != n + 3 * nf) throw InvariantError("ESO input: u_hat must hold [tau; F_ref]");
  const model::StanceFlags all(static_cast<size_t>(nf), true);
  return model::forward_dynamics(model, y1, y2, u_hat.head(n), u_hat.tail(3 * nf), VectorXd(), all);
}

EsoState eso_step(const EsoState& s, const VectorXd& y1, const VectorXd& drive, double dt) {
  if (!(dt > 0.0)) throw InvariantError("ESO step: dt must be positive");
  const double w = s.omega0;
  const VectorXd e = y1 - s.x1;
  EsoState next = s;
  next.x1 = s.x1 + dt * (s.x2 + 3.0 * w * e);
  next.x2 = s.x2 + dt * (drive + s.x3 + 3.0 * w * w * e);
  next.x3 = s.x3 + dt * (w * w * w) * e;
  return next;
}

EsoState eso_step(const EsoState& state, const EsoInput& in, const model::RobotModel& model,
                  double dt) {
  return eso_step(state, in.y1, eso_drive(model, in.y1, in.y2, in.u_hat), dt);
}

VectorXd eso_uncertainty(const model::RobotModel& model, const VectorXd& y1, const VectorXd& x3) {
  return model::mass_matrix(model, y1) * x3;
}

VectorXd estimation_error(const VectorXd& x1, const VectorXd& x2, const VectorXd& x3,
                          const EsoState& est) {
  const auto n = x1.size();
  VectorXd eta(3 * n);
  eta << x1 - est.x1, (x2 - est.x2) / est.omega0, (x3 - est.x3) / (est.omega0 * est.omega0);
  return eta;
}

}  // namespace drc::estimator
