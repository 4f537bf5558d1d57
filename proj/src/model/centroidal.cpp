#include "drc/model/centroidal.hpp"

#include <Eigen/LU>

namespace drc::model {

VectorXd CentroidalState::to_vector() const {
  VectorXd x(6 + q.size());
  x << h, L, q;
  return x;
}

CentroidalState CentroidalState::from_vector(const VectorXd& x) {
  CentroidalState s;
  s.h = x.segment<3>(0);
  s.L = x.segment<3>(3);
  s.q = x.tail(x.size() - 6);
  return s;
}

VectorXd CentroidalInput::to_vector() const {
  VectorXd u(F.size() + qdj.size());
  u << F, qdj;
  return u;
}

CentroidalInput CentroidalInput::from_vector(const VectorXd& u, int num_feet) {
  CentroidalInput c;
  c.F = u.head(3 * num_feet);
  c.qdj = u.tail(u.size() - 3 * num_feet);
  return c;
}

CentroidalState centroidal_state(const RobotModel& model, const VectorXd& q, const VectorXd& qd) {
  const Vector6d hL = centroidal_momentum_matrix(model, q) * qd;
  return {hL.head<3>(), hL.tail<3>(), q};
}

Vector6d base_velocity_from_momentum(const RobotModel& model, const Kinematics& kin,
                                     const MatrixXd& cmm, const Vector6d& momentum,
                                     const VectorXd& qdj) {
  if (!model.floating()) throw InvariantError("base velocity requested for a fixed-base model");
  const Matrix6d Ab = cmm.leftCols<6>();
  Eigen::PartialPivLU<Matrix6d> lu(Ab);
  if (!(lu.rcond() > 1e-12)) throw SolverError("A_b block of the centroidal momentum matrix is singular");
  return lu.solve(momentum - cmm.rightCols(model.num_joints()) * qdj);
}

VectorXd generalized_velocity(const RobotModel& model, const CentroidalState& x,
                              const VectorXd& qdj) {
  const Kinematics kin = forward_kinematics(model, x.q);
  const MatrixXd A = centroidal_momentum_matrix(model, kin);
  Vector6d hL;
  hL << x.h, x.L;
  VectorXd qd(model.nv());
  qd << base_velocity_from_momentum(model, kin, A, hL, qdj), qdj;
  return qd;
}

VectorXd centroidal_rhs(const RobotModel& model, const CentroidalState& x,
                        const CentroidalInput& u, const StanceFlags& stance) {
  const int nf = model.num_feet();
  if (u.F.size() != 3 * nf || u.qdj.size() != model.num_joints())
    throw InvariantError("centroidal input: dimension mismatch");
  if (static_cast<int>(stance.size()) != nf)
    throw InvariantError("stance flags: expected one flag per foot");
  for (int i = 0; i < nf; ++i)
    if (!stance[static_cast<size_t>(i)] && !u.F.segment<3>(3 * i).isZero(0.0))
      throw InvariantError("centroidal input: swing foot " + model.feet()[static_cast<size_t>(i)].name +
                           " has a nonzero force");

  const Kinematics kin = forward_kinematics(model, x.q);
  const MatrixXd A = centroidal_momentum_matrix(model, kin);
  Vector6d hL;
  hL << x.h, x.L;

  VectorXd xdot(6 + model.nv());
  Vector3d hdot = model.total_mass() * model.gravity();
  Vector3d Ldot = Vector3d::Zero();
  for (int i = 0; i < nf; ++i) {
    const Foot& foot = model.feet()[static_cast<size_t>(i)];
    const auto b = static_cast<size_t>(foot.body);
    const Vector3d p = kin.position[b] + kin.rotation[b] * foot.offset;
    const Vector3d f = u.F.segment<3>(3 * i);
    hdot += f;
    Ldot += (p - kin.com_total).cross(f);
  }
  xdot.segment<3>(0) = hdot;
  xdot.segment<3>(3) = Ldot;
  xdot.segment<6>(6) = base_velocity_from_momentum(model, kin, A, hL, u.qdj);
  xdot.tail(model.num_joints()) = u.qdj;
  return xdot;
}

}  // namespace drc::model
