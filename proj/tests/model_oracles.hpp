#pragma once

#include <vector>

#include "drc/model/dynamics.hpp"

namespace drc::test {

// Link momenta about the CoM from a velocity recursion that does not use
// any Jacobian code.
inline Vector6d per_link_momentum(const model::RobotModel& m, const VectorXd& q, const VectorXd& qd) {
  const model::Kinematics kin = model::forward_kinematics(m, q);
  const int nb = m.num_bodies();
  std::vector<Vector3d> w(static_cast<size_t>(nb)), v(static_cast<size_t>(nb));
  for (int i = 0; i < nb; ++i) {
    const auto ui = static_cast<size_t>(i);
    const model::Body& b = m.body(i);
    if (i == 0) {
      if (m.floating()) {
        w[0] = model::euler_rate_map(q.segment<3>(3)) * qd.segment<3>(3);
        v[0] = qd.head<3>();
      } else {
        w[0].setZero();
        v[0].setZero();
      }
      continue;
    }
    const auto up = static_cast<size_t>(b.parent);
    v[ui] = v[up] + w[up].cross(kin.position[ui] - kin.position[up]);
    w[ui] = w[up] + kin.rotation[ui] * b.axis * qd[m.dof_index(i)];
  }
  Vector6d hL = Vector6d::Zero();
  for (int i = 0; i < nb; ++i) {
    const auto ui = static_cast<size_t>(i);
    const model::Body& b = m.body(i);
    const Vector3d vc = v[ui] + w[ui].cross(kin.com[ui] - kin.position[ui]);
    hL.head<3>() += b.mass * vc;
    hL.tail<3>() += kin.rotation[ui] * b.inertia * kin.rotation[ui].transpose() * w[ui] +
                    (kin.com[ui] - kin.com_total).cross(b.mass * vc);
  }
  return hL;
}

// Kick-drift-kick step used by the energy audits.
inline void leapfrog(const model::RobotModel& m, VectorXd& q, VectorXd& qd, double dt) {
  const VectorXd none;
  const VectorXd tau = VectorXd::Zero(m.num_joints());
  model::StanceFlags swing(static_cast<size_t>(m.num_feet()), false);
  qd += 0.5 * dt * model::forward_dynamics(m, q, qd, tau, none, none, swing);
  q += dt * qd;
  qd += 0.5 * dt * model::forward_dynamics(m, q, qd, tau, none, none, swing);
}

}  // namespace drc::test
