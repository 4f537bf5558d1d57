#pragma once

#include "drc/model/robot_model.hpp"
#include "drc/wbc/hqp.hpp"

namespace drc::wbc {

/// Inputs of one whole-body control tick. Forces hold one 3-vector per foot.
struct WbcInput {
  VectorXd q, qd;
  model::StanceFlags stance;
  VectorXd qdd_ref;
  VectorXd F_ref;
  VectorXd f_process;  // processed uncertainty, zero disables compensation
  double mu = 0.7;
  VectorXd torque_limit;  // symmetric bound per joint; empty uses the model's
};

/// Decision vector layout z = [qdd (nv); F (3 nf); tau (n)].
struct WbcLayout {
  int nv, nf, n;
  int dim() const { return nv + 3 * nf + n; }
  int F() const { return nv; }
  int tau() const { return nv + 3 * nf; }
};

WbcLayout wbc_layout(const model::RobotModel& model);

/// Priority 1: dynamics, friction pyramid, no swing force, torque limits.
/// Priority 2: acceleration tracking. Priority 3: no contact motion and
/// foot force tracking.
TaskSet build_tasks(const model::RobotModel& model, const WbcInput& in);

/// Four-face pyramid |f_x|, |f_y| <= mu f_z plus f_z >= 0, as rows C f <= 0.
Eigen::Matrix<double, 5, 3> friction_pyramid(double mu);

struct WbcSolution {
  VectorXd qdd, F, tau;
  std::vector<double> residuals;
  int activations = 0;
};

WbcSolution solve_wbc(const model::RobotModel& model, const WbcInput& in,
                      const HierarchySettings& settings = {});

/// u = tau* + Kp (q_ref - q) + Kd (qd_ref - qd), clamped to [lower, upper].
VectorXd pd_torque(const VectorXd& tau_star, const VectorXd& q_ref, const VectorXd& qd_ref,
                   const VectorXd& q, const VectorXd& qd, const VectorXd& kp, const VectorXd& kd,
                   const VectorXd& lower, const VectorXd& upper);

}  // namespace drc::wbc
