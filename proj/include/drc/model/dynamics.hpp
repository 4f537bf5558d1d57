#pragma once

#include <vector>

#include "drc/model/robot_model.hpp"

namespace drc::model {

/// Generalized position and velocity. For a floating base
/// q = [base position (3), ZYX Euler angles (yaw, pitch, roll), joints (n)]
/// and qd = dq/dt, so the base angular block holds Euler-angle rates.
struct GeneralizedState {
  VectorXd q;
  VectorXd qd;
};

/// Rotation matrix of ZYX Euler angles (yaw, pitch, roll).
Matrix3d rotation_zyx(const Vector3d& euler);
/// Map T(e) from ZYX Euler rates to world-frame angular velocity.
Matrix3d euler_rate_map(const Vector3d& euler);
/// Time derivative of euler_rate_map along the Euler rates.
Matrix3d euler_rate_map_dot(const Vector3d& euler, const Vector3d& euler_rate);

/// Throws GimbalLockError / InvariantError if q cannot be used with the model.
void check_configuration(const RobotModel& model, const VectorXd& q);

/// World placement of every body and cached quantities for one configuration.
struct Kinematics {
  std::vector<Matrix3d> rotation;  // body -> world
  std::vector<Vector3d> position;  // body frame origin in world
  std::vector<Vector3d> com;       // body center of mass in world
  Matrix3d euler_map = Matrix3d::Identity();
  Vector3d com_total = Vector3d::Zero();
};

Kinematics forward_kinematics(const RobotModel& model, const VectorXd& q);

Vector3d com_position(const RobotModel& model, const VectorXd& q);
std::vector<Vector3d> foot_positions(const RobotModel& model, const VectorXd& q);

/// Linear velocity Jacobian (3 x nv) of a point fixed on `body` at
/// `offset` (body frame), world coordinates.
MatrixXd point_jacobian(const RobotModel& model, const Kinematics& kin, int body,
                        const Vector3d& offset);
/// Angular velocity Jacobian (3 x nv) of `body`, world coordinates.
MatrixXd angular_jacobian(const RobotModel& model, const Kinematics& kin, int body);

/// Recursive Newton-Euler: D(q) qdd + C(q,qd) qd + G(q). Gravity is
/// included unless `with_gravity` is false.
VectorXd inverse_dynamics(const RobotModel& model, const VectorXd& q, const VectorXd& qd,
                          const VectorXd& qdd, bool with_gravity = true);

/// Composite-rigid-body mass matrix D(q).
MatrixXd mass_matrix(const RobotModel& model, const VectorXd& q);

/// C(q,qd) qd + G(q).
VectorXd bias_forces(const RobotModel& model, const VectorXd& q, const VectorXd& qd);

/// Stacked foot-point Jacobian, 3 rows per stance foot in foot order.
MatrixXd contact_jacobian(const RobotModel& model, const VectorXd& q, const StanceFlags& stance);

/// Directional derivative Jdot(q, qd) qd of the stance Jacobian.
VectorXd contact_jacobian_bias(const RobotModel& model, const VectorXd& q, const VectorXd& qd,
                               const StanceFlags& stance);

/// Centroidal momentum matrix A(q): [h; L] = A qd, L about the CoM.
MatrixXd centroidal_momentum_matrix(const RobotModel& model, const VectorXd& q);
MatrixXd centroidal_momentum_matrix(const RobotModel& model, const Kinematics& kin);

/// Adot(q, qd) qd by central difference of A along qd.
Vector6d centroidal_momentum_bias(const RobotModel& model, const VectorXd& q, const VectorXd& qd);

/// [hdot; Ldot] = A(q) qdd + Adot qd.
Vector6d momentum_rate(const RobotModel& model, const VectorXd& q, const VectorXd& qd,
                       const VectorXd& qdd);

/// qdd = D^-1 (S^T tau + J^T F + extra - bias). `forces` holds 3 entries per
/// stance foot.
VectorXd forward_dynamics(const RobotModel& model, const VectorXd& q, const VectorXd& qd,
                          const VectorXd& tau, const VectorXd& forces, const VectorXd& extra,
                          const StanceFlags& stance);

/// Kinetic plus gravitational potential energy.
double total_energy(const RobotModel& model, const VectorXd& q, const VectorXd& qd);

/// Generalized force of a world wrench [force; torque] applied at the base
/// frame origin.
VectorXd base_wrench_to_generalized(const RobotModel& model, const VectorXd& q,
                                    const Vector6d& wrench);

}  // namespace drc::model
