#pragma once

#include <vector>

#include "drc/model/robot_model.hpp"
#include "drc/trajopt/centroidal_ocp.hpp"

namespace drc::trajopt {

/// Acceleration estimate and momentum-derivative discrepancy.
struct DcEstimate {
  VectorXd dc;       // [hdot; Ldot; qd] measured-model rate minus reference rate
  VectorXd qdd_hat;  // acceleration estimate used for the momentum rate
};

/// qdd_hat = D^-1 (-bias + S^T tau + J^T F_ref + f_process), then
/// dc = [A qdd_hat + Adot qd; qd] - ref_rate. `F_ref` holds one 3-vector per
/// foot (zero for swing feet); `ref_rate` is [hdot_ref; Ldot_ref; qd_ref].
DcEstimate estimate_dc(const model::RobotModel& model, const VectorXd& q, const VectorXd& qd,
                       const VectorXd& tau, const VectorXd& F_ref, const VectorXd& f_process,
                       const VectorXd& ref_rate);

struct ReferenceKnots {
  std::vector<VectorXd> q, qd, qdd;
};

/// Generalized position/velocity/acceleration references at every knot of a
/// centroidal trajectory. Base velocity comes from the momentum partition,
/// joint accelerations from differences of the joint rates, and the base
/// acceleration from the unactuated rows of the whole-body dynamics.
ReferenceKnots reconstruct_references(const model::RobotModel& model, const Trajectory& traj);

}  // namespace drc::trajopt
