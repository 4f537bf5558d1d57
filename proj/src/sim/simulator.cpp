#include "drc/sim/simulator.hpp"

#include <array>
#include <cmath>
#include <random>

namespace drc::sim {

double NoiseSpec::position_sigma() const { return as_sigma ? position : std::sqrt(position); }
double NoiseSpec::velocity_sigma() const { return as_sigma ? velocity : std::sqrt(velocity); }

namespace {

void check_interval(const Interval& w, double episode, const std::string& what) {
  if (!std::isfinite(w.start) || !std::isfinite(w.end) || w.start < 0.0 || w.end < w.start ||
      w.end > episode + 1e-12)
    throw InvariantError(what + ": interval must lie within [0, " + std::to_string(episode) + "]");
}

/// SplitMix64 finalizer, used to key the counter-based stream.
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void DisturbanceSpec::validate(const model::RobotModel& model, double episode_length) const {
  if (!(episode_length > 0.0)) throw InvariantError("episode length must be positive");
  if (payload) {
    if (!(payload->mass >= 0.0) || !payload->offset.allFinite())
      throw InvariantError("payload: mass must be non-negative and offset finite");
    check_interval(payload->when, episode_length, "payload");
  }
  for (const auto& w : wrenches) {
    if (!w.wrench.allFinite()) throw InvariantError("external wrench: non-finite entries");
    check_interval(w.when, episode_length, "external wrench");
  }
  for (const auto& f : faults) {
    if (f.joint < 0 || f.joint >= model.num_joints())
      throw InvariantError("fault: joint index " + std::to_string(f.joint) + " out of range");
    if (!(f.scale >= 0.0 && f.scale <= 1.0)) throw InvariantError("fault: scale must be in [0, 1]");
    check_interval(f.when, episode_length, "fault");
  }
  if (!(noise.position >= 0.0) || !(noise.velocity >= 0.0))
    throw InvariantError("noise: variances must be non-negative");
}

VectorXd DisturbanceSpec::torque_scale(int num_joints, double t) const {
  VectorXd s = VectorXd::Ones(num_joints);
  for (const auto& f : faults)
    if (f.when.contains(t)) s[f.joint] *= f.scale;
  return s;
}

Vector3d contact_force(const ContactParams& c, const Vector3d& p, const Vector3d& v,
                       Vector3d& anchor, bool& in_contact) {
  if (p.z() > 0.0) {
    in_contact = false;
    return Vector3d::Zero();
  }
  if (!in_contact) anchor = p;  // touch-down
  in_contact = true;
  Vector3d f = Vector3d::Zero();
  f.z() = std::max(0.0, -c.kp * p.z() - c.kd * v.z());
  Eigen::Vector2d ft = -c.kt * (p - anchor).head<2>() - c.dt_damping * v.head<2>();
  const double bound = c.mu * f.z();
  const double n = ft.norm();
  if (n > bound) {
    ft *= (n > 0.0 ? bound / n : 0.0);
    // Slide the anchor so the spring alone reproduces the clamped force.
    anchor.head<2>() = p.head<2>() + (ft + c.dt_damping * v.head<2>()) / c.kt;
  }
  f.head<2>() = ft;
  return f;
}

VectorXd gaussian_draws(std::uint64_t seed, std::uint64_t tick, std::uint64_t stream, int n,
                        double sigma) {
  if (sigma == 0.0) return VectorXd::Zero(n);
  std::mt19937_64 gen(mix(mix(seed) ^ mix(tick * 4 + stream)));
  std::normal_distribution<double> dist(0.0, sigma);
  VectorXd out(n);
  for (int i = 0; i < n; ++i) out[i] = dist(gen);
  return out;
}

Simulator::Simulator(const model::RobotModel& model, DisturbanceSpec spec, ContactParams contact)
    : model_(model), spec_(std::move(spec)), contact_(contact) {
  if (!model.floating()) throw InvariantError("simulator: the model needs a floating base");
  if (!(contact_.kp > 0.0) || !(contact_.kd >= 0.0) || !(contact_.kt > 0.0) ||
      !(contact_.dt_damping >= 0.0) || !(contact_.mu >= 0.0))
    throw InvariantError("contact: stiffness must be positive, damping and mu non-negative");
  if (spec_.payload && spec_.payload->mass > 0.0)
    loaded_ = model.with_payload(0, spec_.payload->mass, spec_.payload->offset);
}

const model::RobotModel& Simulator::physics_model(double t) const {
  if (loaded_ && spec_.payload->when.contains(t)) return *loaded_;
  return model_;
}

VectorXd Simulator::applied_torque(const VectorXd& u_d, double t) const {
  return u_d.cwiseProduct(spec_.torque_scale(model_.num_joints(), t));
}

VectorXd Simulator::acceleration(const model::RobotModel& m, const VectorXd& q,
                                 const VectorXd& qd, const VectorXd& tau, double t, double h,
                                 std::vector<Vector3d>& anchor, std::vector<Vector3d>& force,
                                 std::vector<bool>& touching) const {
  const int nf = m.num_feet();
  const model::StanceFlags all(static_cast<size_t>(nf), true);
  const MatrixXd J = model::contact_jacobian(m, q, all);
  const auto feet = model::foot_positions(m, q);
  const MatrixXd D = model::mass_matrix(m, q);
  VectorXd rhs = -model::bias_forces(m, q, qd);
  rhs.tail(m.num_joints()) += tau;
  for (const auto& w : spec_.wrenches)
    if (w.when.contains(t)) rhs += model::base_wrench_to_generalized(m, q, w.wrench);

  // Contact damping is stiff for light feet, so the foot velocities it acts
  // on are predicted with the damping taken implicitly over the kick h.
  MatrixXd K = D;
  VectorXd b = D * qd + h * rhs;
  bool any = false;
  const Vector3d damping(contact_.dt_damping, contact_.dt_damping, contact_.kd);
  for (int i = 0; i < nf; ++i) {
    const Vector3d& p = feet[static_cast<size_t>(i)];
    if (p.z() > 0.0) continue;
    any = true;
    const auto Ji = J.middleRows<3>(3 * i);
    const Vector3d a = touching[static_cast<size_t>(i)] ? anchor[static_cast<size_t>(i)] : p;
    const Vector3d spring(-contact_.kt * (p.x() - a.x()), -contact_.kt * (p.y() - a.y()),
                          -contact_.kp * p.z());
    K += h * Ji.transpose() * damping.asDiagonal() * Ji;
    b += h * Ji.transpose() * spring;
  }
  const VectorXd v_pred = any ? VectorXd(K.llt().solve(b)) : qd;
  const VectorXd vf = J * v_pred;

  VectorXd F(3 * nf);
  for (int i = 0; i < nf; ++i) {
    const size_t k = static_cast<size_t>(i);
    bool c = touching[k];
    force[k] = contact_force(contact_, feet[k], vf.segment<3>(3 * i), anchor[k], c);
    touching[k] = c;
    F.segment<3>(3 * i) = force[k];
  }
  Eigen::LLT<MatrixXd> llt(D);
  if (llt.info() != Eigen::Success) throw SolverError("mass matrix is not positive definite");
  return llt.solve(rhs + J.transpose() * F);
}

WorldState Simulator::step(const WorldState& world, const VectorXd& u_d, double dt) const {
  if (!(dt > 0.0 && dt <= 1e-3)) throw InvariantError("step: dt must be in (0, 1e-3]");
  if (u_d.size() != model_.num_joints() || !u_d.allFinite())
    throw InvariantError("step: torques must be finite with one entry per joint");
  const double t = world.time;
  const model::RobotModel& m = physics_model(t);
  const VectorXd tau = applied_torque(u_d, t);

  WorldState next = world;
  const int nf = m.num_feet();
  if (next.anchor.size() != static_cast<size_t>(nf)) {
    next.anchor.assign(static_cast<size_t>(nf), Vector3d::Zero());
    next.in_contact.assign(static_cast<size_t>(nf), false);
  }
  next.contact_force.assign(static_cast<size_t>(nf), Vector3d::Zero());

  // Kick-drift-kick: exact for constant accelerations.
  std::vector<Vector3d> anchor = next.anchor;
  std::vector<bool> touching = next.in_contact;
  const VectorXd& q = world.truth.q;
  const VectorXd& qd = world.truth.qd;
  const VectorXd a0 = acceleration(m, q, qd, tau, t, 0.5 * dt, anchor, next.contact_force, touching);
  const VectorXd v_half = qd + 0.5 * dt * a0;
  const VectorXd q1 = q + dt * v_half;
  anchor = next.anchor;
  touching = next.in_contact;
  const VectorXd a1 = acceleration(m, q1, v_half, tau, t, 0.5 * dt, anchor, next.contact_force, touching);
  next.truth.q = q1;
  next.truth.qd = v_half + 0.5 * dt * a1;
  next.anchor = anchor;
  next.in_contact = touching;
  next.tick = world.tick + 1;
  next.time = world.time + dt;
  if (!next.truth.q.allFinite() || !next.truth.qd.allFinite() || next.truth.qd.norm() > 1e3)
    throw DivergenceError("simulation diverged at t = " + std::to_string(next.time) + " s");
  return next;
}

Measurement Simulator::measure(const WorldState& world) const {
  const int nv = static_cast<int>(world.truth.q.size());
  Measurement y;
  y.y1 = world.truth.q + gaussian_draws(world.seed, world.tick, 0, nv, spec_.noise.position_sigma());
  y.y2 = world.truth.qd + gaussian_draws(world.seed, world.tick, 1, nv, spec_.noise.velocity_sigma());
  return y;
}

StandingStart standing_start(const model::RobotModel& model, const ContactParams& contact,
                             const VectorXd& posture, double yaw, std::uint64_t seed) {
  const int nv = model.nv(), nf = model.num_feet(), n = model.num_joints();
  if (posture.size() != n) throw InvariantError("standing start: posture needs one entry per joint");
  VectorXd q = VectorXd::Zero(nv);
  q[3] = yaw;
  q.tail(n) = posture;
  const VectorXd qd = VectorXd::Zero(nv);
  const model::StanceFlags all(static_cast<size_t>(nf), true);

  // Normal forces follow from penetration; tangential forces are the
  // least-norm balance of the horizontal and yaw rows of the base.
  const std::array<int, 3> planar{0, 1, 3};
  auto spring_forces = [&](const VectorXd& qc) {
    const VectorXd G = model::bias_forces(model, qc, qd);
    const MatrixXd Jb = model::contact_jacobian(model, qc, all).leftCols(6).transpose();
    const auto feet = model::foot_positions(model, qc);
    VectorXd F = VectorXd::Zero(3 * nf);
    MatrixXd Jt(3, 2 * nf);
    Vector3d rhs;
    for (int i = 0; i < nf; ++i) F[3 * i + 2] = -contact.kp * feet[static_cast<size_t>(i)].z();
    const VectorXd normal = Jb * F;
    for (int r = 0; r < 3; ++r) {
      const int row = planar[static_cast<size_t>(r)];
      rhs[r] = G[row] - normal[row];
      for (int i = 0; i < nf; ++i) Jt.block(r, 2 * i, 1, 2) = Jb.block(row, 3 * i, 1, 2);
    }
    const VectorXd ft = Jt.completeOrthogonalDecomposition().solve(rhs);
    for (int i = 0; i < nf; ++i) F.segment<2>(3 * i) = ft.segment<2>(2 * i);
    const VectorXd r = Jb * F - G.head(6);
    return std::pair<VectorXd, Vector3d>(F, Vector3d(r[2], r[4], r[5]));
  };

  // Height, pitch and roll such that the springs carry the rest.
  const auto feet0 = model::foot_positions(model, q);
  double z = 0.0;
  for (const auto& p : feet0) z += p.z();
  q[2] = -z / nf - model.total_mass() * 9.81 / nf / contact.kp;
  const std::array<int, 3> free{2, 4, 5};
  for (int it = 0; it < 30; ++it) {
    const Vector3d r = spring_forces(q).second;
    if (r.norm() < 1e-11 * model.total_mass()) break;
    Matrix3d Jr;
    for (int j = 0; j < 3; ++j) {
      VectorXd qp = q, qm = q;
      qp[free[static_cast<size_t>(j)]] += 1e-7;
      qm[free[static_cast<size_t>(j)]] -= 1e-7;
      Jr.col(j) = (spring_forces(qp).second - spring_forces(qm).second) / 2e-7;
    }
    const Vector3d du = Jr.partialPivLu().solve(-r);
    for (int j = 0; j < 3; ++j) q[free[static_cast<size_t>(j)]] += du[j];
  }
  const VectorXd F = spring_forces(q).first;

  StandingStart out;
  WorldState& w = out.world;
  w.truth = {q, qd};
  w.seed = seed;
  w.contact_force.assign(static_cast<size_t>(nf), Vector3d::Zero());
  w.anchor.assign(static_cast<size_t>(nf), Vector3d::Zero());
  w.in_contact.assign(static_cast<size_t>(nf), true);
  const auto feet = model::foot_positions(model, q);
  VectorXd Fs(3 * nf);
  for (int i = 0; i < nf; ++i) {
    const size_t k = static_cast<size_t>(i);
    if (feet[k].z() >= 0.0) throw InvariantError("standing start: posture cannot reach the ground");
    w.anchor[k] = feet[k];
    w.anchor[k].head<2>() += F.segment<2>(3 * i) / contact.kt;
    bool c = true;
    w.contact_force[k] = contact_force(contact, feet[k], Vector3d::Zero(), w.anchor[k], c);
    Fs.segment<3>(3 * i) = w.contact_force[k];
  }
  out.tau = model::bias_forces(model, q, qd).tail(n) -
            (model::contact_jacobian(model, q, all).transpose() * Fs).tail(n);
  return out;
}

}  // namespace drc::sim
