#include "drc/wbc/wbc.hpp"

#include <cmath>

#include "drc/model/dynamics.hpp"

namespace drc::wbc {

WbcLayout wbc_layout(const model::RobotModel& m) {
  return {m.nv(), m.num_feet(), m.num_joints()};
}

Eigen::Matrix<double, 5, 3> friction_pyramid(double mu) {
  Eigen::Matrix<double, 5, 3> C;
  C << 1, 0, -mu,  //
      -1, 0, -mu,  //
      0, 1, -mu,   //
      0, -1, -mu,  //
      0, 0, -1;
  return C;
}

TaskSet build_tasks(const model::RobotModel& m, const WbcInput& in) {
  const WbcLayout L = wbc_layout(m);
  const int nv = L.nv, nf = L.nf, n = L.n, dim = L.dim();
  if (in.q.size() != nv || in.qd.size() != nv || in.qdd_ref.size() != nv)
    throw InvariantError("wbc: state or acceleration reference has the wrong dimension");
  if (in.F_ref.size() != 3 * nf || in.stance.size() != static_cast<size_t>(nf))
    throw InvariantError("wbc: force reference or stance flags have the wrong dimension");
  if (in.f_process.size() != nv) throw InvariantError("wbc: uncertainty has the wrong dimension");
  if (!(in.mu >= 0.0)) throw InvariantError("wbc: friction coefficient must be non-negative");

  const model::StanceFlags all(static_cast<size_t>(nf), true);
  const MatrixXd D = model::mass_matrix(m, in.q);
  const VectorXd bias = model::bias_forces(m, in.q, in.qd);
  const MatrixXd J = model::contact_jacobian(m, in.q, all);
  int ns = 0;
  for (bool s : in.stance) ns += s ? 1 : 0;

  TaskSet set;
  set.dim = dim;

  Task dyn{"dynamics", 1, MatrixXd::Zero(nv, dim), in.f_process - bias, {}, {}};
  dyn.A_eq.leftCols(nv) = D;
  dyn.A_eq.middleCols(L.F(), 3 * nf) = -J.transpose();
  dyn.A_eq.bottomRightCorner(n, n) = -MatrixXd::Identity(n, n);
  dyn.A_in.resize(0, dim);
  set.tasks.push_back(std::move(dyn));

  Task cone{"friction cone", 1, MatrixXd(0, dim), VectorXd(0), MatrixXd::Zero(5 * ns, dim), VectorXd::Zero(5 * ns)};
  Task swing{"no swing force", 1, MatrixXd::Zero(3 * (nf - ns), dim), VectorXd::Zero(3 * (nf - ns)), MatrixXd(0, dim), VectorXd(0)};
  const auto C = friction_pyramid(in.mu);
  int rs = 0, rw = 0;
  for (int i = 0; i < nf; ++i) {
    if (in.stance[static_cast<size_t>(i)]) {
      cone.A_in.block(5 * rs++, L.F() + 3 * i, 5, 3) = C;
    } else {
      swing.A_eq.block(3 * rw++, L.F() + 3 * i, 3, 3).setIdentity();
    }
  }
  set.tasks.push_back(std::move(cone));
  set.tasks.push_back(std::move(swing));

  const VectorXd lim = in.torque_limit.size() == n ? in.torque_limit : m.torque_limits();
  std::vector<int> bounded;
  for (int j = 0; j < n; ++j)
    if (std::isfinite(lim[j])) bounded.push_back(j);
  const int nb = static_cast<int>(bounded.size());
  Task torque{"torque limits", 1, MatrixXd(0, dim), VectorXd(0), MatrixXd::Zero(2 * nb, dim), VectorXd(2 * nb)};
  for (int r = 0; r < nb; ++r) {
    const int j = bounded[static_cast<size_t>(r)];
    torque.A_in(2 * r, L.tau() + j) = 1.0;
    torque.A_in(2 * r + 1, L.tau() + j) = -1.0;
    torque.b_in[2 * r] = torque.b_in[2 * r + 1] = lim[j];
  }
  set.tasks.push_back(std::move(torque));

  Task acc{"acceleration tracking", 2, MatrixXd::Zero(nv, dim), in.qdd_ref, MatrixXd(0, dim), VectorXd(0)};
  acc.A_eq.leftCols(nv).setIdentity();
  set.tasks.push_back(std::move(acc));

  const MatrixXd Js = model::contact_jacobian(m, in.q, in.stance);
  Task motion{"no contact motion", 3, MatrixXd::Zero(Js.rows(), dim),
              -model::contact_jacobian_bias(m, in.q, in.qd, in.stance), MatrixXd(0, dim), VectorXd(0)};
  motion.A_eq.leftCols(nv) = Js;
  set.tasks.push_back(std::move(motion));

  Task force{"foot force tracking", 3, MatrixXd::Zero(3 * nf, dim), in.F_ref, MatrixXd(0, dim), VectorXd(0)};
  force.A_eq.middleCols(L.F(), 3 * nf).setIdentity();
  set.tasks.push_back(std::move(force));
  return set;
}

WbcSolution solve_wbc(const model::RobotModel& m, const WbcInput& in, const HierarchySettings& s) {
  const WbcLayout L = wbc_layout(m);
  const HierarchyResult r = solve_hierarchy(build_tasks(m, in), s);
  WbcSolution out;
  out.qdd = r.z.head(L.nv);
  out.F = r.z.segment(L.F(), 3 * L.nf);
  out.tau = r.z.tail(L.n);
  // Swing rows are exact up to round-off; pin them so downstream sees zeros.
  for (int i = 0; i < L.nf; ++i)
    if (!in.stance[static_cast<size_t>(i)]) out.F.segment<3>(3 * i).setZero();
  out.residuals = r.residuals;
  out.activations = r.activations;
  return out;
}

VectorXd pd_torque(const VectorXd& tau_star, const VectorXd& q_ref, const VectorXd& qd_ref,
                   const VectorXd& q, const VectorXd& qd, const VectorXd& kp, const VectorXd& kd,
                   const VectorXd& lower, const VectorXd& upper) {
  const auto n = tau_star.size();
  if (q_ref.size() != n || qd_ref.size() != n || q.size() != n || qd.size() != n || kp.size() != n ||
      kd.size() != n || lower.size() != n || upper.size() != n)
    throw InvariantError("pd_torque: dimension mismatch");
  if ((kp.array() <= 0).any() || (kd.array() <= 0).any())
    throw InvariantError("pd_torque: gains must be positive");
  const VectorXd u = tau_star + kp.cwiseProduct(q_ref - q) + kd.cwiseProduct(qd_ref - qd);
  return u.cwiseMax(lower).cwiseMin(upper);
}

}  // namespace drc::wbc
