#include "drc/trajopt/centroidal_ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

#include "drc/model/dynamics.hpp"

namespace drc::trajopt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kFdStep = 1e-6;

struct NodeKin {
  std::vector<Vector3d> feet;
  std::vector<MatrixXd> J;  // 3 x nv per foot
  Vector3d com;
  MatrixXd A;
  Eigen::PartialPivLU<Matrix6d> Ab;
};

NodeKin node_kin(const model::RobotModel& m, const VectorXd& q) {
  NodeKin k;
  const model::Kinematics kin = model::forward_kinematics(m, q);
  k.com = kin.com_total;
  k.A = model::centroidal_momentum_matrix(m, kin);
  k.Ab.compute(k.A.leftCols<6>());
  for (const auto& f : m.feet()) {
    const auto b = static_cast<size_t>(f.body);
    k.feet.push_back(kin.position[b] + kin.rotation[b] * f.offset);
    k.J.push_back(model::point_jacobian(m, kin, f.body, f.offset));
  }
  return k;
}

/// Dynamics and stance-foot velocities at one node for a given kinematic
/// evaluation: returns [f; v_stance].
VectorXd node_outputs(const model::RobotModel& m, const NodeKin& k, const VectorXd& x,
                      const VectorXd& u, const model::StanceFlags& stance) {
  const int nf = m.num_feet(), n = m.num_joints(), nv = m.nv();
  int ns = 0;
  for (bool s : stance) ns += s ? 1 : 0;
  const VectorXd qdj = u.tail(n);
  VectorXd qd(nv);
  qd.head<6>() = k.Ab.solve(x.head<6>() - k.A.rightCols(n) * qdj);
  qd.tail(n) = qdj;

  VectorXd out(6 + nv + 3 * ns);
  Vector3d hdot = m.total_mass() * m.gravity();
  Vector3d Ldot = Vector3d::Zero();
  int r = 0;
  for (int i = 0; i < nf; ++i) {
    const auto ui = static_cast<size_t>(i);
    const Vector3d f = u.segment<3>(3 * i);
    hdot += f;
    Ldot += (k.feet[ui] - k.com).cross(f);
    if (stance[ui]) {
      out.segment<3>(6 + nv + 3 * r) = k.J[ui] * qd;
      ++r;
    }
  }
  out.head<3>() = hdot;
  out.segment<3>(3) = Ldot;
  out.segment(6, nv) = qd;
  return out;
}

model::StanceFlags stance_at(const sim::GaitConfig& gait, double t, int nf,
                             std::vector<double>* swing_z) {
  const sim::GaitPhase ph = sim::gait_flags(gait, t, nf);
  if (swing_z) {
    swing_z->assign(static_cast<size_t>(nf), kNaN);
    for (size_t i = 0; i < static_cast<size_t>(nf); ++i)
      if (!ph.stance[i]) (*swing_z)[i] = sim::swing_height(ph.swing_phase[i], gait.apex);
  }
  return ph.stance;
}

void fill_schedule(OcpProblem& p, const sim::GaitConfig& gait) {
  const int nf = p.model->num_feet();
  p.stance.resize(static_cast<size_t>(p.nodes));
  p.swing_z.resize(static_cast<size_t>(p.nodes));
  for (int i = 0; i < p.nodes; ++i)
    p.stance[static_cast<size_t>(i)] =
        stance_at(gait, p.t0 + i * p.dt, nf, &p.swing_z[static_cast<size_t>(i)]);
}

void check_weights(const OcpWeights& w, int nx, int nu) {
  if (w.Q_stage.size() != nx || w.Q_terminal.size() != nx || w.R.size() != nu)
    throw InvariantError("OCP weights: dimension mismatch");
  if ((w.Q_stage.array() < 0).any() || (w.Q_terminal.array() < 0).any())
    throw InvariantError("OCP weights: Q must be positive semidefinite");
  if ((w.R.array() <= 0).any()) throw InvariantError("OCP weights: R must be positive definite");
  if (!(w.mu >= 0.0)) throw InvariantError("OCP weights: friction coefficient must be non-negative");
}

}  // namespace

OcpWeights OcpWeights::defaults(const model::RobotModel& m) {
  const int n = m.num_joints(), nf = m.num_feet();
  OcpWeights w;
  w.Q_stage.resize(12 + n);
  w.Q_stage << 5, 5, 5, 10, 10, 10, 200, 200, 500, 100, 300, 300, VectorXd::Constant(n, 20.0);
  w.Q_terminal = 5.0 * w.Q_stage;
  w.R.resize(3 * nf + n);
  w.R << VectorXd::Constant(3 * nf, 1e-3), VectorXd::Constant(n, 2.0);
  return w;
}

CentroidalOcp::CentroidalOcp(const OcpProblem& p) : p_(p) {}

int CentroidalOcp::nx() const { return 6 + p_.model->nv(); }
int CentroidalOcp::nu() const { return 3 * p_.model->num_feet() + p_.model->num_joints(); }

VectorXd CentroidalOcp::offset() const {
  return p_.dc.size() == nx() ? p_.dc : VectorXd::Zero(nx());
}

std::vector<bool> CentroidalOcp::zero_inputs(int node) const {
  std::vector<bool> mask(static_cast<size_t>(nu()), false);
  const auto& st = p_.stance[static_cast<size_t>(node)];
  for (size_t i = 0; i < st.size(); ++i)
    if (!st[i]) mask[3 * i] = mask[3 * i + 1] = mask[3 * i + 2] = true;
  return mask;
}

void CentroidalOcp::evaluate(int node, const VectorXd& x, const VectorXd& u, bool derivatives,
                             NodeTerms& out) const {
  const model::RobotModel& m = *p_.model;
  const auto un = static_cast<size_t>(node);
  const auto& stance = p_.stance[un];
  const int nf = m.num_feet(), n = m.num_joints(), nv = m.nv();
  const int NX = nx(), NU = nu();
  const bool terminal = node == p_.nodes - 1;
  const OcpWeights& w = p_.weights;

  const VectorXd q = x.tail(nv);
  const NodeKin k = node_kin(m, q);
  const VectorXd y = node_outputs(m, k, x, u, stance);
  const int ns = static_cast<int>(y.size()) - NX;
  out.f = y.head(NX);
  out.eq = y.tail(ns);

  // Residuals: state, input, swing heights.
  std::vector<int> swing;
  for (int i = 0; i < nf; ++i)
    if (!stance[static_cast<size_t>(i)] && std::isfinite(p_.swing_z[un][static_cast<size_t>(i)]))
      swing.push_back(i);
  const double sx = terminal ? 1.0 : p_.dt;
  const VectorXd wx = (terminal ? w.Q_terminal : w.Q_stage).cwiseSqrt() * std::sqrt(sx);
  const VectorXd wu = w.R.cwiseSqrt() * std::sqrt(p_.dt);
  const double wsw = std::sqrt(w.swing_height * sx);
  const int nr = NX + NU + static_cast<int>(swing.size());
  out.res.resize(nr);
  out.res.head(NX) = wx.cwiseProduct(x - p_.x_ref[un]);
  out.res.segment(NX, NU) = wu.cwiseProduct(u - p_.u_ref[un]);
  for (size_t s = 0; s < swing.size(); ++s) {
    const auto f = static_cast<size_t>(swing[s]);
    out.res[NX + NU + static_cast<int>(s)] = wsw * (k.feet[f].z() - p_.swing_z[un][f]);
  }

  // Friction inequalities on stance feet: f_z >= 0 and mu f_z - |f_t| >= 0,
  // integrated like the running cost. The terminal input drives no defect
  // and only carries its tracking term.
  std::vector<int> st_feet;
  if (!terminal)
    for (int i = 0; i < nf; ++i)
      if (stance[static_cast<size_t>(i)]) st_feet.push_back(i);
  out.barrier_scale = p_.dt;
  out.ineq.resize(2 * static_cast<int>(st_feet.size()));
  out.inequ = MatrixXd::Zero(out.ineq.size(), NU);
  out.ineq_hessian.assign(static_cast<size_t>(out.ineq.size()), MatrixXd());
  for (size_t s = 0; s < st_feet.size(); ++s) {
    const int i = st_feet[s];
    const Vector3d f = u.segment<3>(3 * i);
    const double tn = std::sqrt(f.x() * f.x() + f.y() * f.y() + w.cone_smoothing * w.cone_smoothing);
    const auto r = static_cast<Eigen::Index>(2 * s);
    out.ineq[r] = f.z();
    out.ineq[r + 1] = w.mu * f.z() - tn;
    if (derivatives) {
      out.inequ(r, 3 * i + 2) = 1.0;
      out.inequ(r + 1, 3 * i) = -f.x() / tn;
      out.inequ(r + 1, 3 * i + 1) = -f.y() / tn;
      out.inequ(r + 1, 3 * i + 2) = w.mu;
      MatrixXd h0 = MatrixXd::Zero(NU, NU);
      out.ineq_hessian[static_cast<size_t>(r)] = h0;
      Eigen::Matrix2d hs;
      hs << 1.0 / tn - f.x() * f.x() / (tn * tn * tn), -f.x() * f.y() / (tn * tn * tn),
          -f.x() * f.y() / (tn * tn * tn), 1.0 / tn - f.y() * f.y() / (tn * tn * tn);
      h0.block<2, 2>(3 * i, 3 * i) = -hs;
      out.ineq_hessian[static_cast<size_t>(r + 1)] = h0;
    }
  }
  if (!derivatives) return;

  // Analytic parts of the dynamics / velocity Jacobians.
  out.fx = MatrixXd::Zero(NX, NX);
  out.fu = MatrixXd::Zero(NX, NU);
  out.eqx = MatrixXd::Zero(ns, NX);
  out.equ = MatrixXd::Zero(ns, NU);
  const Matrix6d Ab_inv = k.Ab.inverse();
  const MatrixXd dqb_dqdj = -Ab_inv * k.A.rightCols(n);
  out.fx.block<6, 6>(6, 0) = Ab_inv;
  out.fu.block(6, 3 * nf, 6, n) = dqb_dqdj;
  out.fu.block(12, 3 * nf, n, n).setIdentity();
  int r = 0;
  for (int i = 0; i < nf; ++i) {
    const auto ui = static_cast<size_t>(i);
    out.fu.block<3, 3>(0, 3 * i).setIdentity();
    out.fu.block<3, 3>(3, 3 * i) = skew(k.feet[ui] - k.com);
    if (stance[ui]) {
      const MatrixXd& J = k.J[ui];
      out.eqx.block(3 * r, 0, 3, 6) = J.leftCols<6>() * Ab_inv;
      out.equ.block(3 * r, 3 * nf, 3, n) = J.leftCols<6>() * dqb_dqdj + J.rightCols(n);
      ++r;
    }
  }
  // Configuration columns by central differences.
  for (int c = 0; c < nv; ++c) {
    VectorXd xp = x, xm = x;
    xp[6 + c] += kFdStep;
    xm[6 + c] -= kFdStep;
    const VectorXd yp = node_outputs(m, node_kin(m, xp.tail(nv)), xp, u, stance);
    const VectorXd ym = node_outputs(m, node_kin(m, xm.tail(nv)), xm, u, stance);
    const VectorXd d = (yp - ym) / (2.0 * kFdStep);
    out.fx.col(6 + c) = d.head(NX);
    out.eqx.col(6 + c) = d.tail(ns);
  }

  out.resx = MatrixXd::Zero(nr, NX);
  out.resu = MatrixXd::Zero(nr, NU);
  out.resx.leftCols(NX).diagonal() = wx;
  out.resu.block(NX, 0, NU, NU).diagonal() = wu;
  for (size_t s = 0; s < swing.size(); ++s)
    out.resx.block(NX + NU + static_cast<int>(s), 6, 1, nv) =
        wsw * k.J[static_cast<size_t>(swing[s])].row(2);
}

OcpProblem build_nominal_ocp(const model::RobotModel& m, const BaseCommand& goal,
                             const VectorXd& x_meas, double t0, const sim::GaitConfig& gait,
                             const OcpWeights& weights, double horizon, int nodes) {
  if (nodes < 2) throw InvariantError("OCP: at least two nodes are required");
  if (!(horizon > 0.0)) throw InvariantError("OCP: horizon must be positive");
  if (!m.floating() || m.num_feet() == 0)
    throw InvariantError("OCP: a floating-base model with feet is required");
  const int nv = m.nv(), n = m.num_joints(), nf = m.num_feet();
  if (x_meas.size() != 6 + nv) throw InvariantError("OCP: measured state has the wrong dimension");
  check_weights(weights, 6 + nv, 3 * nf + n);
  gait.validate();

  OcpProblem p;
  p.model = &m;
  p.horizon = horizon;
  p.nodes = nodes;
  p.dt = horizon / (nodes - 1);
  p.t0 = t0;
  p.tag = Trajectory::Tag::Nominal;
  p.weights = weights;
  p.dc = VectorXd::Zero(6 + nv);
  p.x_meas = x_meas;
  fill_schedule(p, gait);

  const bool moving = goal.velocity.norm() > 0.0;
  const double mg = -m.total_mass() * m.gravity().z();
  for (int i = 0; i < nodes; ++i) {
    const double ti = i * p.dt;
    VectorXd xr = VectorXd::Zero(6 + nv);
    xr.head<2>() = m.total_mass() * goal.velocity;
    Vector3d pos = goal.position;
    if (moving) pos.head<2>() = x_meas.segment<2>(6) + goal.velocity * ti;
    xr.segment<3>(6) = pos;
    xr[9] = goal.yaw;
    xr.tail(n) = m.nominal_posture();
    p.x_ref.push_back(xr);

    VectorXd ur = VectorXd::Zero(3 * nf + n);
    const auto& st = p.stance[static_cast<size_t>(i)];
    int ns = 0;
    for (bool s : st) ns += s ? 1 : 0;
    for (int f = 0; f < nf; ++f)
      if (st[static_cast<size_t>(f)]) ur[3 * f + 2] = mg / ns;
    p.u_ref.push_back(ur);
  }
  return p;
}

OcpProblem build_robust_ocp(const model::RobotModel& m, const Trajectory& nominal,
                            const VectorXd& dc, const VectorXd& x_meas, double t0,
                            const sim::GaitConfig& gait, const OcpWeights& weights,
                            double horizon, int nodes) {
  if (nominal.empty()) throw InvariantError("robust OCP: nominal trajectory is empty");
  if (nodes < 2) throw InvariantError("OCP: at least two nodes are required");
  const int nv = m.nv(), n = m.num_joints(), nf = m.num_feet();
  if (dc.size() != 6 + nv) throw InvariantError("robust OCP: offset has the wrong dimension");
  if (x_meas.size() != 6 + nv) throw InvariantError("OCP: measured state has the wrong dimension");
  check_weights(weights, 6 + nv, 3 * nf + n);
  const double dt = horizon / (nodes - 1);
  if (t0 < nominal.t.front() - 1e-9 || t0 + horizon > nominal.t.back() + dt + 1e-9)
    throw InvariantError("robust OCP: nominal trajectory does not cover the horizon");

  OcpProblem p;
  p.model = &m;
  p.horizon = horizon;
  p.nodes = nodes;
  p.dt = dt;
  p.t0 = t0;
  p.tag = Trajectory::Tag::Robust;
  p.weights = weights;
  p.dc = dc;
  p.x_meas = x_meas;
  fill_schedule(p, gait);
  for (int i = 0; i < nodes; ++i) {
    const TrajectorySample s = interpolate(nominal, t0 + i * dt);
    p.x_ref.push_back(s.x);
    p.u_ref.push_back(s.u);
  }
  return p;
}

Trajectory solve_ocp(const OcpProblem& p, const Trajectory* warm, int max_iterations) {
  if (!p.model) throw InvariantError("OCP: problem has no model");
  const int H = p.nodes;
  std::vector<VectorXd> xg(static_cast<size_t>(H)), ug(static_cast<size_t>(H));
  for (int i = 0; i < H; ++i) {
    const auto ui = static_cast<size_t>(i);
    if (warm && !warm->empty()) {
      const TrajectorySample s = interpolate(*warm, p.t0 + i * p.dt);
      xg[ui] = s.x;
      ug[ui] = s.u;
    } else {
      xg[ui] = p.x_ref[ui];
      ug[ui] = p.u_ref[ui];
    }
  }
  xg[0] = p.x_meas;

  SqpSettings settings = p.settings;
  if (max_iterations >= 0) settings.max_iterations = max_iterations;
  const CentroidalOcp ocp(p);
  const SqpResult r = solve_sqp(ocp, std::move(xg), std::move(ug), settings);

  Trajectory t;
  t.tag = p.tag;
  for (int i = 0; i < H; ++i) t.t.push_back(p.t0 + i * p.dt);
  t.x = r.x;
  t.u = r.u;
  t.stance = p.stance;
  t.iterations = r.iterations;
  t.converged = r.converged;
  t.defect_norm = r.defect_norm;
  t.equality_norm = r.equality_norm;
  return t;
}

TrajectorySample interpolate(const Trajectory& traj, double t) {
  if (traj.empty()) throw InvariantError("interpolate: empty trajectory");
  if (t <= traj.t.front()) return {traj.x.front(), traj.u.front(), t < traj.t.front()};
  if (t >= traj.t.back()) return {traj.x.back(), traj.u.back(), t > traj.t.back()};
  const auto it = std::upper_bound(traj.t.begin(), traj.t.end(), t);
  const auto i = static_cast<size_t>(it - traj.t.begin()) - 1;
  const double a = (t - traj.t[i]) / (traj.t[i + 1] - traj.t[i]);
  return {(1.0 - a) * traj.x[i] + a * traj.x[i + 1], (1.0 - a) * traj.u[i] + a * traj.u[i + 1], false};
}

VectorXd trajectory_rate(const Trajectory& traj, double t) {
  if (traj.t.size() < 2) throw InvariantError("trajectory rate: at least two knots are required");
  auto it = std::upper_bound(traj.t.begin(), traj.t.end(), t);
  size_t i = it == traj.t.begin() ? 0 : static_cast<size_t>(it - traj.t.begin()) - 1;
  i = std::min(i, traj.t.size() - 2);
  return (traj.x[i + 1] - traj.x[i]) / (traj.t[i + 1] - traj.t[i]);
}

}  // namespace drc::trajopt
