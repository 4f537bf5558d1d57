#pragma once

#include <random>
#include <string>

#include "drc/model/dynamics.hpp"

namespace drc::test {

inline std::string fixture(const std::string& name) {
  return std::string(DRC_FIXTURE_DIR) + "/" + name;
}

inline const model::RobotModel& quadruped() {
  static const model::RobotModel m = model::load_model(fixture("quadruped.model"));
  return m;
}

inline const model::RobotModel& two_link_arm() {
  static const model::RobotModel m = model::load_model(fixture("two_link_arm.model"));
  return m;
}

/// Single free-floating box with a diagonal inertia.
inline model::RobotModel floating_box(double mass, const Vector3d& diag_inertia) {
  model::Body b;
  b.name = "box";
  b.joint = model::JointType::Floating;
  b.mass = mass;
  b.inertia = diag_inertia.asDiagonal();
  return model::RobotModel({b}, {});
}

/// Standing configuration of the quadruped with the base at `height`.
inline VectorXd standing_q(const model::RobotModel& m, double height = 0.31) {
  VectorXd q = VectorXd::Zero(m.nv());
  q[2] = height;
  q.tail(m.num_joints()) = m.nominal_posture();
  return q;
}

struct RandomStates {
  std::mt19937_64 rng;
  explicit RandomStates(uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

  VectorXd vector(int n, double scale) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(-scale, scale);
    return v;
  }

  VectorXd configuration(const model::RobotModel& m) {
    VectorXd q = vector(m.nv(), 1.5);
    if (m.floating()) {
      q.head<3>() = vector(3, 1.0);
      q[3] = uniform(-3.0, 3.0);
      q[4] = uniform(-1.2, 1.2);
      q[5] = uniform(-3.0, 3.0);
    }
    return q;
  }
};

}  // namespace drc::test
