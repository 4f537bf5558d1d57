#include "drc/model/dynamics.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>

namespace drc::model {

namespace {

constexpr double kGimbalMargin = 1e-3;
constexpr double kDirectionalStep = 1e-6;

// Spatial motion/force vectors are stored [angular; linear] in body
// coordinates.
struct Transform {
  Matrix3d E;  // parent -> child coordinates
  Vector3d r;  // child origin in parent coordinates

  Vector6d apply(const Vector6d& m) const {
    Vector6d out;
    out.head<3>() = E * m.head<3>();
    out.tail<3>() = E * (m.tail<3>() - r.cross(m.head<3>()));
    return out;
  }
  // X^T applied to a force expressed in child coordinates.
  Vector6d apply_transpose(const Vector6d& f) const {
    Vector6d out;
    out.tail<3>() = E.transpose() * f.tail<3>();
    out.head<3>() = E.transpose() * f.head<3>() + r.cross(out.tail<3>());
    return out;
  }
  Matrix6d matrix() const {
    Matrix6d X = Matrix6d::Zero();
    X.topLeftCorner<3, 3>() = E;
    X.bottomRightCorner<3, 3>() = E;
    X.bottomLeftCorner<3, 3>() = -E * skew(r);
    return X;
  }
};

Vector6d cross_motion(const Vector6d& v, const Vector6d& m) {
  Vector6d out;
  out.head<3>() = v.head<3>().cross(m.head<3>());
  out.tail<3>() = v.head<3>().cross(m.tail<3>()) + v.tail<3>().cross(m.head<3>());
  return out;
}

Vector6d cross_force(const Vector6d& v, const Vector6d& f) {
  Vector6d out;
  out.head<3>() = v.head<3>().cross(f.head<3>()) + v.tail<3>().cross(f.tail<3>());
  out.tail<3>() = v.head<3>().cross(f.tail<3>());
  return out;
}

Vector6d apply_inertia(const Body& b, const Vector6d& v) {
  const Vector3d w = v.head<3>();
  const Vector3d p = b.mass * (v.tail<3>() + w.cross(b.com));
  Vector6d out;
  out.head<3>() = b.inertia * w + b.com.cross(p);
  out.tail<3>() = p;
  return out;
}

Matrix6d inertia_matrix(const Body& b) {
  const Matrix3d cx = skew(b.com);
  Matrix6d I;
  I.topLeftCorner<3, 3>() = b.inertia + b.mass * cx * cx.transpose();
  I.topRightCorner<3, 3>() = b.mass * cx;
  I.bottomLeftCorner<3, 3>() = b.mass * cx.transpose();
  I.bottomRightCorner<3, 3>() = b.mass * Matrix3d::Identity();
  return I;
}

Matrix3d axis_rotation(const Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

Transform joint_transform(const RobotModel& model, int i, const VectorXd& q) {
  const Body& b = model.body(i);
  switch (b.joint) {
    case JointType::Floating:
      return {rotation_zyx(q.segment<3>(3)).transpose(), q.head<3>()};
    case JointType::Fixed:
      return {Matrix3d::Identity(), b.origin};
    case JointType::Revolute:
      return {axis_rotation(b.axis, q[model.dof_index(i)]).transpose(), b.origin};
  }
  return {Matrix3d::Identity(), Vector3d::Zero()};
}

// Motion subspace of the floating base: qd_b = [pdot; euler rates] maps to
// the base spatial velocity [omega_body; v_body].
Eigen::Matrix<double, 6, 6> floating_subspace(const Matrix3d& R, const Matrix3d& T) {
  Matrix6d S = Matrix6d::Zero();
  S.topRightCorner<3, 3>() = R.transpose() * T;
  S.bottomLeftCorner<3, 3>() = R.transpose();
  return S;
}

}  // namespace

Matrix3d rotation_zyx(const Vector3d& e) {
  return (Eigen::AngleAxisd(e[0], Vector3d::UnitZ()) * Eigen::AngleAxisd(e[1], Vector3d::UnitY()) *
          Eigen::AngleAxisd(e[2], Vector3d::UnitX()))
      .toRotationMatrix();
}

Matrix3d euler_rate_map(const Vector3d& e) {
  const double sy = std::sin(e[0]), cy = std::cos(e[0]);
  const double sp = std::sin(e[1]), cp = std::cos(e[1]);
  Matrix3d T;
  T << 0.0, -sy, cy * cp,
       0.0, cy, sy * cp,
       1.0, 0.0, -sp;
  return T;
}

Matrix3d euler_rate_map_dot(const Vector3d& e, const Vector3d& ed) {
  const double sy = std::sin(e[0]), cy = std::cos(e[0]);
  const double sp = std::sin(e[1]), cp = std::cos(e[1]);
  const double dy = ed[0], dp = ed[1];
  Matrix3d Td;
  Td << 0.0, -cy * dy, -sy * cp * dy - cy * sp * dp,
        0.0, -sy * dy, cy * cp * dy - sy * sp * dp,
        0.0, 0.0, -cp * dp;
  return Td;
}

void check_configuration(const RobotModel& model, const VectorXd& q) {
  if (q.size() != model.nv())
    throw InvariantError("q: expected dimension " + std::to_string(model.nv()) + ", got " +
                         std::to_string(q.size()));
  if (!q.allFinite()) throw InvariantError("q: non-finite entry");
  if (model.floating() && std::abs(q[4]) >= std::numbers::pi / 2 - kGimbalMargin)
    throw GimbalLockError("base pitch " + std::to_string(q[4]) + " rad is within the gimbal guard");
}

Kinematics forward_kinematics(const RobotModel& model, const VectorXd& q) {
  check_configuration(model, q);
  const int nb = model.num_bodies();
  Kinematics kin;
  kin.rotation.resize(static_cast<size_t>(nb));
  kin.position.resize(static_cast<size_t>(nb));
  kin.com.resize(static_cast<size_t>(nb));
  for (int i = 0; i < nb; ++i) {
    const Body& b = model.body(i);
    const auto ui = static_cast<size_t>(i);
    if (i == 0) {
      if (b.joint == JointType::Floating) {
        kin.rotation[0] = rotation_zyx(q.segment<3>(3));
        kin.position[0] = q.head<3>();
        kin.euler_map = euler_rate_map(q.segment<3>(3));
      } else {
        kin.rotation[0] = Matrix3d::Identity();
        kin.position[0] = b.origin;
      }
    } else {
      const auto up = static_cast<size_t>(b.parent);
      kin.rotation[ui] = kin.rotation[up] * axis_rotation(b.axis, q[model.dof_index(i)]);
      kin.position[ui] = kin.position[up] + kin.rotation[up] * b.origin;
    }
    kin.com[ui] = kin.position[ui] + kin.rotation[ui] * b.com;
    kin.com_total += b.mass * kin.com[ui];
  }
  kin.com_total /= model.total_mass();
  return kin;
}

Vector3d com_position(const RobotModel& model, const VectorXd& q) {
  return forward_kinematics(model, q).com_total;
}

std::vector<Vector3d> foot_positions(const RobotModel& model, const VectorXd& q) {
  const Kinematics kin = forward_kinematics(model, q);
  std::vector<Vector3d> out;
  out.reserve(model.feet().size());
  for (const Foot& f : model.feet()) {
    const auto b = static_cast<size_t>(f.body);
    out.push_back(kin.position[b] + kin.rotation[b] * f.offset);
  }
  return out;
}

MatrixXd point_jacobian(const RobotModel& model, const Kinematics& kin, int body,
                        const Vector3d& offset) {
  MatrixXd J = MatrixXd::Zero(3, model.nv());
  const auto ub = static_cast<size_t>(body);
  const Vector3d p = kin.position[ub] + kin.rotation[ub] * offset;
  for (int k = body; k >= 0; k = model.body(k).parent) {
    const Body& b = model.body(k);
    const auto uk = static_cast<size_t>(k);
    if (b.joint == JointType::Revolute) {
      const Vector3d axis = kin.rotation[uk] * b.axis;
      J.col(model.dof_index(k)) = axis.cross(p - kin.position[uk]);
    } else if (b.joint == JointType::Floating) {
      J.block<3, 3>(0, 0).setIdentity();
      J.block<3, 3>(0, 3) = -skew(p - kin.position[0]) * kin.euler_map;
    }
  }
  return J;
}

MatrixXd angular_jacobian(const RobotModel& model, const Kinematics& kin, int body) {
  MatrixXd J = MatrixXd::Zero(3, model.nv());
  for (int k = body; k >= 0; k = model.body(k).parent) {
    const Body& b = model.body(k);
    if (b.joint == JointType::Revolute) {
      J.col(model.dof_index(k)) = kin.rotation[static_cast<size_t>(k)] * b.axis;
    } else if (b.joint == JointType::Floating) {
      J.block<3, 3>(0, 3) = kin.euler_map;
    }
  }
  return J;
}

VectorXd inverse_dynamics(const RobotModel& model, const VectorXd& q, const VectorXd& qd,
                          const VectorXd& qdd, bool with_gravity) {
  check_configuration(model, q);
  const int nb = model.num_bodies();
  std::vector<Transform> X;
  X.reserve(static_cast<size_t>(nb));
  std::vector<Vector6d> v(static_cast<size_t>(nb)), a(static_cast<size_t>(nb)),
      f(static_cast<size_t>(nb));
  Vector6d a_world = Vector6d::Zero();
  if (with_gravity) a_world.tail<3>() = -model.gravity();

  Eigen::Matrix<double, 6, 6> S_base;
  for (int i = 0; i < nb; ++i) {
    const Body& b = model.body(i);
    const auto ui = static_cast<size_t>(i);
    X.push_back(joint_transform(model, i, q));
    const Vector6d v_parent = i == 0 ? Vector6d::Zero() : v[static_cast<size_t>(b.parent)];
    const Vector6d a_parent = i == 0 ? a_world : a[static_cast<size_t>(b.parent)];
    Vector6d vJ = Vector6d::Zero();
    Vector6d aJ = Vector6d::Zero();
    if (b.joint == JointType::Revolute) {
      const int k = model.dof_index(i);
      vJ.head<3>() = b.axis * qd[k];
      aJ.head<3>() = b.axis * qdd[k];
    } else if (b.joint == JointType::Floating) {
      const Vector3d e = q.segment<3>(3);
      const Vector3d ed = qd.segment<3>(3);
      const Matrix3d R = rotation_zyx(e);
      const Matrix3d T = euler_rate_map(e);
      S_base = floating_subspace(R, T);
      vJ = S_base * qd.head<6>();
      aJ = S_base * qdd.head<6>();
      // c_J = Sdot qd
      aJ.head<3>() += R.transpose() * euler_rate_map_dot(e, ed) * ed;
      aJ.tail<3>() += -vJ.head<3>().cross(vJ.tail<3>());
    }
    v[ui] = X[ui].apply(v_parent) + vJ;
    a[ui] = X[ui].apply(a_parent) + aJ + cross_motion(v[ui], vJ);
    f[ui] = apply_inertia(b, a[ui]) + cross_force(v[ui], apply_inertia(b, v[ui]));
  }

  VectorXd tau = VectorXd::Zero(model.nv());
  for (int i = nb - 1; i >= 0; --i) {
    const Body& b = model.body(i);
    const auto ui = static_cast<size_t>(i);
    if (b.joint == JointType::Revolute) {
      tau[model.dof_index(i)] = b.axis.dot(f[ui].head<3>());
    } else if (b.joint == JointType::Floating) {
      tau.head<6>() = S_base.transpose() * f[ui];
    }
    if (b.parent >= 0) f[static_cast<size_t>(b.parent)] += X[ui].apply_transpose(f[ui]);
  }
  return tau;
}

MatrixXd mass_matrix(const RobotModel& model, const VectorXd& q) {
  check_configuration(model, q);
  const int nb = model.num_bodies();
  std::vector<Matrix6d> X(static_cast<size_t>(nb)), Ic(static_cast<size_t>(nb));
  std::vector<MatrixXd> S(static_cast<size_t>(nb));
  for (int i = 0; i < nb; ++i) {
    const Body& b = model.body(i);
    const auto ui = static_cast<size_t>(i);
    X[ui] = joint_transform(model, i, q).matrix();
    Ic[ui] = inertia_matrix(b);
    if (b.joint == JointType::Revolute) {
      S[ui] = MatrixXd::Zero(6, 1);
      S[ui].col(0).head<3>() = b.axis;
    } else if (b.joint == JointType::Floating) {
      S[ui] = floating_subspace(rotation_zyx(q.segment<3>(3)), euler_rate_map(q.segment<3>(3)));
    }
  }
  for (int i = nb - 1; i > 0; --i) {
    const auto ui = static_cast<size_t>(i);
    Ic[static_cast<size_t>(model.body(i).parent)] += X[ui].transpose() * Ic[ui] * X[ui];
  }

  MatrixXd D = MatrixXd::Zero(model.nv(), model.nv());
  for (int i = 0; i < nb; ++i) {
    const int ni = model.dof_count(i);
    if (ni == 0) continue;
    const auto ui = static_cast<size_t>(i);
    const int ci = model.dof_index(i);
    MatrixXd F = Ic[ui] * S[ui];
    D.block(ci, ci, ni, ni) = S[ui].transpose() * F;
    for (int j = i; model.body(j).parent >= 0;) {
      F = X[static_cast<size_t>(j)].transpose() * F;
      j = model.body(j).parent;
      const int nj = model.dof_count(j);
      if (nj == 0) break;
      const int cj = model.dof_index(j);
      D.block(cj, ci, nj, ni) = S[static_cast<size_t>(j)].transpose() * F;
      D.block(ci, cj, ni, nj) = D.block(cj, ci, nj, ni).transpose();
    }
  }
  return D;
}

VectorXd bias_forces(const RobotModel& model, const VectorXd& q, const VectorXd& qd) {
  return inverse_dynamics(model, q, qd, VectorXd::Zero(model.nv()), true);
}

MatrixXd contact_jacobian(const RobotModel& model, const VectorXd& q, const StanceFlags& stance) {
  const Kinematics kin = forward_kinematics(model, q);
  int rows = 0;
  for (int i = 0; i < model.num_feet(); ++i)
    if (stance.at(static_cast<size_t>(i))) rows += 3;
  MatrixXd J(rows, model.nv());
  int r = 0;
  for (int i = 0; i < model.num_feet(); ++i) {
    if (!stance[static_cast<size_t>(i)]) continue;
    const Foot& foot = model.feet()[static_cast<size_t>(i)];
    J.middleRows(r, 3) = point_jacobian(model, kin, foot.body, foot.offset);
    r += 3;
  }
  return J;
}

VectorXd contact_jacobian_bias(const RobotModel& model, const VectorXd& q, const VectorXd& qd,
                               const StanceFlags& stance) {
  const double h = kDirectionalStep;
  const MatrixXd Jp = contact_jacobian(model, q + h * qd, stance);
  const MatrixXd Jm = contact_jacobian(model, q - h * qd, stance);
  return (Jp - Jm) * qd / (2.0 * h);
}

MatrixXd centroidal_momentum_matrix(const RobotModel& model, const Kinematics& kin) {
  MatrixXd A = MatrixXd::Zero(6, model.nv());
  for (int i = 0; i < model.num_bodies(); ++i) {
    const Body& b = model.body(i);
    const auto ui = static_cast<size_t>(i);
    const MatrixXd Jv = point_jacobian(model, kin, i, b.com);
    const MatrixXd Jw = angular_jacobian(model, kin, i);
    const Matrix3d Iw = kin.rotation[ui] * b.inertia * kin.rotation[ui].transpose();
    A.topRows<3>() += b.mass * Jv;
    A.bottomRows<3>() += Iw * Jw + b.mass * skew(kin.com[ui] - kin.com_total) * Jv;
  }
  return A;
}

MatrixXd centroidal_momentum_matrix(const RobotModel& model, const VectorXd& q) {
  return centroidal_momentum_matrix(model, forward_kinematics(model, q));
}

Vector6d centroidal_momentum_bias(const RobotModel& model, const VectorXd& q, const VectorXd& qd) {
  const double h = kDirectionalStep;
  const MatrixXd Ap = centroidal_momentum_matrix(model, VectorXd(q + h * qd));
  const MatrixXd Am = centroidal_momentum_matrix(model, VectorXd(q - h * qd));
  return (Ap - Am) * qd / (2.0 * h);
}

Vector6d momentum_rate(const RobotModel& model, const VectorXd& q, const VectorXd& qd,
                       const VectorXd& qdd) {
  return centroidal_momentum_matrix(model, q) * qdd + centroidal_momentum_bias(model, q, qd);
}

VectorXd forward_dynamics(const RobotModel& model, const VectorXd& q, const VectorXd& qd,
                          const VectorXd& tau, const VectorXd& forces, const VectorXd& extra,
                          const StanceFlags& stance) {
  const int nv = model.nv();
  const int bd = model.base_dofs();
  VectorXd rhs = -bias_forces(model, q, qd);
  rhs.tail(nv - bd) += tau;
  if (forces.size() > 0) rhs += contact_jacobian(model, q, stance).transpose() * forces;
  if (extra.size() > 0) rhs += extra;
  Eigen::LLT<MatrixXd> llt(mass_matrix(model, q));
  if (llt.info() != Eigen::Success) throw SolverError("mass matrix is not positive definite");
  return llt.solve(rhs);
}

double total_energy(const RobotModel& model, const VectorXd& q, const VectorXd& qd) {
  const Kinematics kin = forward_kinematics(model, q);
  double potential = 0.0;
  for (int i = 0; i < model.num_bodies(); ++i)
    potential -= model.body(i).mass * model.gravity().dot(kin.com[static_cast<size_t>(i)]);
  return 0.5 * qd.dot(mass_matrix(model, q) * qd) + potential;
}

VectorXd base_wrench_to_generalized(const RobotModel& model, const VectorXd& q,
                                    const Vector6d& wrench) {
  const Kinematics kin = forward_kinematics(model, q);
  return point_jacobian(model, kin, 0, Vector3d::Zero()).transpose() * wrench.head<3>() +
         angular_jacobian(model, kin, 0).transpose() * wrench.tail<3>();
}

}  // namespace drc::model
