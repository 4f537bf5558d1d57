#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "drc/model/dynamics.hpp"
#include "drc/model/robot_model.hpp"

namespace drc::sim {

/// Half-open time window [start, end).
struct Interval {
  double start = 0.0;
  double end = 0.0;
  bool contains(double t) const { return t >= start && t < end; }
};

struct PayloadSpec {
  double mass = 0.0;
  Vector3d offset = Vector3d::Zero();  // trunk frame
  Interval when;
};

struct WrenchSpec {
  Vector6d wrench = Vector6d::Zero();  // world [force; torque] at the base origin
  Interval when;
};

struct FaultSpec {
  int joint = 0;
  double scale = 1.0;
  Interval when;
};

/// Gaussian measurement noise. The values are variances unless
/// `as_sigma` is set, in which case they are standard deviations.
struct NoiseSpec {
  double position = 0.0;
  double velocity = 0.0;
  bool as_sigma = false;

  double position_sigma() const;
  double velocity_sigma() const;
};

struct DisturbanceSpec {
  std::optional<PayloadSpec> payload;
  std::vector<WrenchSpec> wrenches;
  std::vector<FaultSpec> faults;
  NoiseSpec noise;

  void validate(const model::RobotModel& model, double episode_length) const;
  /// Per-joint torque scale at time t (1 outside every fault window).
  VectorXd torque_scale(int num_joints, double t) const;
};

/// Spring-damper ground at z = 0. Tangential forces come from a spring to a
/// per-foot anchor that slides whenever the force would leave the cone.
struct ContactParams {
  double kp = 2e4;
  double kd = 300.0;
  double kt = 2e4;
  double dt_damping = 300.0;
  double mu = 0.7;
};

struct WorldState {
  model::GeneralizedState truth;
  std::vector<Vector3d> contact_force;  // world frame, per foot
  std::vector<Vector3d> anchor;         // tangential anchor per foot
  std::vector<bool> in_contact;
  double time = 0.0;
  std::uint64_t tick = 0;
  std::uint64_t seed = 0;
};

struct Measurement {
  VectorXd y1, y2;
};

/// Penalty force on one foot. `anchor` is read and, if the foot is in
/// contact, slid so the tangential spring never exceeds the cone.
Vector3d contact_force(const ContactParams& c, const Vector3d& p, const Vector3d& v,
                       Vector3d& anchor, bool& in_contact);

class Simulator {
 public:
  Simulator(const model::RobotModel& model, DisturbanceSpec spec, ContactParams contact = {});

  /// Advances by dt with kick-drift-kick leapfrog; contact damping enters
  /// each kick semi-implicitly. Throws DivergenceError.
  WorldState step(const WorldState& world, const VectorXd& u_d, double dt) const;

  /// Noisy copies of q and qd drawn from a stream keyed on (seed, tick).
  Measurement measure(const WorldState& world) const;

  /// Torques actually applied for a commanded u_d at time t.
  VectorXd applied_torque(const VectorXd& u_d, double t) const;

  /// Model the physics uses at time t (payload-augmented inside its window).
  const model::RobotModel& physics_model(double t) const;

  const model::RobotModel& model() const { return model_; }
  const DisturbanceSpec& spec() const { return spec_; }
  const ContactParams& contact() const { return contact_; }

 private:
  VectorXd acceleration(const model::RobotModel& m, const VectorXd& q, const VectorXd& qd,
                        const VectorXd& tau, double t, double h, std::vector<Vector3d>& anchor,
                        std::vector<Vector3d>& force, std::vector<bool>& touching) const;

  const model::RobotModel& model_;
  std::optional<model::RobotModel> loaded_;
  DisturbanceSpec spec_;
  ContactParams contact_;
};

/// Gaussian vector from a counter-based stream: the same (seed, tick,
/// stream) always yields the same draws.
VectorXd gaussian_draws(std::uint64_t seed, std::uint64_t tick, std::uint64_t stream, int n,
                        double sigma);

/// Statically balanced start: the given base pose and joint posture, lowered
/// until the feet carry the weight on the springs, with the balancing
/// torques and anchors that make the state an exact equilibrium.
struct StandingStart {
  WorldState world;
  VectorXd tau;
};

StandingStart standing_start(const model::RobotModel& model, const ContactParams& contact,
                             const VectorXd& posture, double yaw = 0.0,
                             std::uint64_t seed = 0);

}  // namespace drc::sim
