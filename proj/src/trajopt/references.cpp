#include "drc/trajopt/references.hpp"

#include <Eigen/LU>

#include "drc/model/centroidal.hpp"
#include "drc/model/dynamics.hpp"

namespace drc::trajopt {

DcEstimate estimate_dc(const model::RobotModel& m, const VectorXd& q, const VectorXd& qd,
                       const VectorXd& tau, const VectorXd& F_ref, const VectorXd& f_process,
                       const VectorXd& ref_rate) {
  const int nv = m.nv(), nf = m.num_feet();
  if (F_ref.size() != 3 * nf) throw InvariantError("estimate_dc: F_ref needs 3 entries per foot");
  if (ref_rate.size() != 6 + nv) throw InvariantError("estimate_dc: reference rate has the wrong dimension");
  const model::StanceFlags all(static_cast<size_t>(nf), true);
  DcEstimate out;
  out.qdd_hat = model::forward_dynamics(m, q, qd, tau, F_ref, f_process, all);
  VectorXd fh(6 + nv);
  fh.head<6>() = model::momentum_rate(m, q, qd, out.qdd_hat);
  fh.tail(nv) = qd;
  out.dc = fh - ref_rate;
  return out;
}

ReferenceKnots reconstruct_references(const model::RobotModel& m, const Trajectory& traj) {
  if (traj.t.size() < 2) throw InvariantError("reconstruct_references: at least two knots are required");
  if (!m.floating()) throw InvariantError("reconstruct_references: floating-base model required");
  const int nv = m.nv(), n = m.num_joints(), nf = m.num_feet();
  const size_t K = traj.t.size();
  ReferenceKnots r;
  r.q.resize(K);
  r.qd.resize(K);
  r.qdd.resize(K);

  for (size_t k = 0; k < K; ++k) {
    const VectorXd& x = traj.x[k];
    r.q[k] = x.tail(nv);
    const model::Kinematics kin = model::forward_kinematics(m, r.q[k]);
    const MatrixXd A = model::centroidal_momentum_matrix(m, kin);
    const Eigen::FullPivLU<Matrix6d> Ab(A.leftCols<6>());
    if (!Ab.isInvertible())
      throw SolverError("reconstruct_references: singular base momentum block at node " + std::to_string(k));
    const VectorXd qdj = traj.u[k].tail(n);
    r.qd[k].resize(nv);
    r.qd[k].head<6>() = Ab.solve(x.head<6>() - A.rightCols(n) * qdj);
    r.qd[k].tail(n) = qdj;
  }

  const model::StanceFlags all(static_cast<size_t>(nf), true);
  for (size_t k = 0; k < K; ++k) {
    const size_t a = k == 0 ? 0 : k - 1, b = k + 1 == K ? k : k + 1;
    const VectorXd qddj = (r.qd[b].tail(n) - r.qd[a].tail(n)) / (traj.t[b] - traj.t[a]);
    const MatrixXd D = model::mass_matrix(m, r.q[k]);
    const VectorXd rhs = -model::bias_forces(m, r.q[k], r.qd[k]) +
                         model::contact_jacobian(m, r.q[k], all).transpose() * traj.u[k].head(3 * nf);
    const Eigen::FullPivLU<Matrix6d> D11(D.topLeftCorner<6, 6>());
    if (!D11.isInvertible())
      throw SolverError("reconstruct_references: singular base inertia at node " + std::to_string(k));
    r.qdd[k].resize(nv);
    r.qdd[k].head<6>() = D11.solve(rhs.head<6>() - D.topRightCorner(6, n) * qddj);
    r.qdd[k].tail(n) = qddj;
  }
  return r;
}

}  // namespace drc::trajopt
