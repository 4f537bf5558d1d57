#pragma once

#include "drc/model/dynamics.hpp"

namespace drc::model {

/// x_c = [h; L; q], dimension 12 + n for a floating base.
struct CentroidalState {
  Vector3d h = Vector3d::Zero();
  Vector3d L = Vector3d::Zero();
  VectorXd q;

  VectorXd to_vector() const;
  static CentroidalState from_vector(const VectorXd& x);
};

/// u_c = [F; qd_j]: one force 3-vector per foot (zero for swing feet) and
/// the actuated joint velocities.
struct CentroidalInput {
  VectorXd F;
  VectorXd qdj;

  VectorXd to_vector() const;
  static CentroidalInput from_vector(const VectorXd& u, int num_feet);
};

inline int centroidal_state_dim(const RobotModel& model) { return 6 + model.nv(); }
inline int centroidal_input_dim(const RobotModel& model) {
  return 3 * model.num_feet() + model.num_joints();
}

/// Centroidal state of a generalized state: [A(q) qd; q].
CentroidalState centroidal_state(const RobotModel& model, const VectorXd& q, const VectorXd& qd);

/// Base velocity recovered from momentum and joint velocities through the
/// A = [A_b, A_j] partition: qd_b = A_b^-1 ([h; L] - A_j qd_j).
Vector6d base_velocity_from_momentum(const RobotModel& model, const Kinematics& kin,
                                     const MatrixXd& cmm, const Vector6d& momentum,
                                     const VectorXd& qdj);

/// Full generalized velocity implied by a centroidal state and input.
VectorXd generalized_velocity(const RobotModel& model, const CentroidalState& x,
                              const VectorXd& qdj);

/// Centroidal dynamics xdot_c = f_c(x_c, u_c):
///   hdot = sum f_i + m g_vec,  Ldot = sum (p_i - c) x f_i,
///   qdot = [qd_b; qd_j] with qd_b from the momentum partition.
VectorXd centroidal_rhs(const RobotModel& model, const CentroidalState& x,
                        const CentroidalInput& u, const StanceFlags& stance);

}  // namespace drc::model
