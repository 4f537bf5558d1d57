#include <doctest.h>

#include <cmath>

#include "drc/sim/simulator.hpp"
#include "test_support.hpp"

using namespace drc;
using namespace drc::sim;
using drc::test::quadruped;

namespace {

model::GeneralizedState airborne(double height) {
  const auto& m = quadruped();
  return {test::standing_q(m, height), VectorXd::Zero(m.nv())};
}

WorldState world_at(const model::GeneralizedState& s, std::uint64_t seed = 0) {
  WorldState w;
  w.truth = s;
  w.seed = seed;
  return w;
}

Vector3d angular_momentum(const model::RobotModel& m, const model::GeneralizedState& s) {
  return (model::centroidal_momentum_matrix(m, s.q) * s.qd).tail<3>();
}

}  // namespace

TEST_CASE("robot balanced on the springs barely sags") {
  const auto& m = quadruped();
  const ContactParams contact;
  const StandingStart start = standing_start(m, contact, m.nominal_posture());
  const Simulator sim(m, {}, contact);
  const double c0 = model::com_position(m, start.world.truth.q).z();
  WorldState w = start.world;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    w = sim.step(w, start.tau, 1e-3);
    worst = std::max(worst, std::abs(model::com_position(m, w.truth.q).z() - c0));
  }
  MESSAGE("static drift " << worst);
  CHECK(worst <= 1e-3);
  // The weight rests on the feet.
  double fz = 0.0;
  for (const auto& f : w.contact_force) fz += f.z();
  CHECK(fz == doctest::Approx(m.total_mass() * 9.81).epsilon(1e-3));
}

TEST_CASE("unactuated flight follows the ballistic parabola") {
  const auto& m = quadruped();
  const Simulator sim(m, {});
  WorldState w = world_at(airborne(3.0));
  const double c0 = model::com_position(m, w.truth.q).z();
  const VectorXd zero = VectorXd::Zero(m.num_joints());
  double worst = 0.0;
  for (int k = 1; k <= 5000; ++k) {
    w = sim.step(w, zero, 1e-4);
    const double t = k * 1e-4;
    worst = std::max(worst, std::abs(model::com_position(m, w.truth.q).z() - (c0 - 0.5 * 9.81 * t * t)));
  }
  CHECK(worst <= 1e-6);
  for (const auto& f : w.contact_force) CHECK(f.norm() == 0.0);
}

TEST_CASE("contact-free motion conserves angular momentum about the CoM") {
  const auto& m = quadruped();
  const Simulator sim(m, {});
  test::RandomStates rs(7);
  model::GeneralizedState s = airborne(20.0);
  s.qd = rs.vector(m.nv(), 0.5);
  s.qd.head<3>().setZero();
  WorldState w = world_at(s);
  const Vector3d L0 = angular_momentum(m, s);
  const VectorXd zero = VectorXd::Zero(m.num_joints());
  // Leapfrog drift is second order in dt; 1e-4 s keeps it well inside 1e-6.
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    w = sim.step(w, zero, 1e-4);
    worst = std::max(worst, (angular_momentum(m, w.truth) - L0).norm());
  }
  MESSAGE("angular momentum drift over 1 s " << worst);
  CHECK(worst <= 1e-6);
}

TEST_CASE("fault windows scale the commanded torque exactly") {
  const auto& m = quadruped();
  DisturbanceSpec spec;
  spec.faults.push_back({2, 0.5, {1.0, 2.0}});
  spec.faults.push_back({5, 0.0, {1.5, 3.0}});
  spec.validate(m, 3.0);
  const Simulator sim(m, spec);
  test::RandomStates rs(3);
  const VectorXd u = rs.vector(m.num_joints(), 20.0);
  const VectorXd before = sim.applied_torque(u, 0.5);
  CHECK(before == u);
  const VectorXd during = sim.applied_torque(u, 1.2);
  CHECK(during[2] == 0.5 * u[2]);
  CHECK(during[5] == u[5]);
  const VectorXd both = sim.applied_torque(u, 1.7);
  CHECK(both[2] == 0.5 * u[2]);
  CHECK(both[5] == 0.0);
  CHECK(sim.applied_torque(u, 2.0)[2] == u[2]);
}

TEST_CASE("measurement noise") {
  const auto& m = quadruped();
  const WorldState w = world_at(airborne(0.31), 42);

  SUBCASE("zero variance returns the truth") {
    const Simulator sim(m, {});
    const Measurement y = sim.measure(w);
    CHECK(y.y1 == w.truth.q);
    CHECK(y.y2 == w.truth.qd);
  }

  SUBCASE("sample variance matches the configured variance") {
    const double var = 1e-3;
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    int count = 0;
    for (std::uint64_t tick = 0; count < n; ++tick) {
      const VectorXd e = gaussian_draws(42, tick, 0, 10, std::sqrt(var));
      for (int i = 0; i < e.size() && count < n; ++i, ++count) {
        sum += e[i];
        sq += e[i] * e[i];
      }
    }
    const double mean = sum / n;
    const double sample_var = sq / n - mean * mean;
    CHECK(std::abs(sample_var - var) <= 0.05 * var);

    DisturbanceSpec spec;
    spec.noise = {var, 0.0, false};
    CHECK(spec.noise.position_sigma() == doctest::Approx(std::sqrt(var)));
    spec.noise.as_sigma = true;
    CHECK(spec.noise.position_sigma() == var);
  }

  SUBCASE("same seed and tick give the same draws") {
    DisturbanceSpec spec;
    spec.noise = {1e-3, 1e-3, false};
    const Simulator sim(m, spec);
    const Measurement a = sim.measure(w), b = sim.measure(w);
    CHECK(a.y1 == b.y1);
    CHECK(a.y2 == b.y2);
    CHECK(a.y1 != a.y2 - w.truth.qd + w.truth.q);  // independent streams
    WorldState later = w;
    ++later.tick;
    CHECK(sim.measure(later).y1 != a.y1);
    WorldState other = w;
    other.seed = 43;
    CHECK(sim.measure(other).y1 != a.y1);
  }
}

TEST_CASE("contact forces stay in the cone and episodes are deterministic") {
  const auto& m = quadruped();
  const ContactParams contact;
  const StandingStart start = standing_start(m, contact, m.nominal_posture());
  DisturbanceSpec spec;
  spec.wrenches.push_back({(Vector6d() << 25.0, -10.0, 0.0, 0.0, 0.0, 2.0).finished(), {0.1, 0.4}});
  const Simulator sim(m, spec, contact);

  auto run = [&](std::vector<VectorXd>* trace) {
    WorldState w = start.world;
    test::RandomStates rs(11);
    bool ok = true;
    for (int k = 0; k < 500; ++k) {
      const VectorXd u = start.tau + rs.vector(m.num_joints(), 3.0);
      w = sim.step(w, u, 1e-3);
      for (const auto& f : w.contact_force)
        ok = ok && f.z() >= 0.0 && f.head<2>().norm() <= contact.mu * f.z() + 1e-9;
      if (trace) {
        trace->push_back(w.truth.q);
        trace->push_back(w.truth.qd);
      }
    }
    return ok;
  };
  std::vector<VectorXd> a, b;
  CHECK(run(&a));
  CHECK(run(&b));
  REQUIRE(a.size() == b.size());
  bool identical = true;
  for (size_t i = 0; i < a.size(); ++i) identical = identical && a[i] == b[i];
  CHECK(identical);
}

TEST_CASE("anchored tangential spring") {
  ContactParams c;
  Vector3d anchor(0.0, 0.0, 0.0);
  bool touching = false;
  // Touch-down places the anchor under the foot.
  Vector3d f = contact_force(c, Vector3d(0.1, 0.2, -0.001), Vector3d::Zero(), anchor, touching);
  CHECK(touching);
  CHECK(anchor.head<2>() == Eigen::Vector2d(0.1, 0.2));
  CHECK(f.z() == doctest::Approx(20.0));
  CHECK(f.head<2>().norm() == 0.0);
  // Small displacement sticks.
  f = contact_force(c, Vector3d(0.1001, 0.2, -0.001), Vector3d::Zero(), anchor, touching);
  CHECK(f.x() == doctest::Approx(-2.0));
  // Large displacement slides: force on the cone, anchor follows.
  f = contact_force(c, Vector3d(0.2, 0.2, -0.001), Vector3d::Zero(), anchor, touching);
  CHECK(f.head<2>().norm() == doctest::Approx(0.7 * 20.0));
  CHECK(anchor.x() == doctest::Approx(0.2 - 14.0 / c.kt));
  // Lift-off clears contact; pulling damping never makes f_z negative.
  f = contact_force(c, Vector3d(0.2, 0.2, -1e-4), Vector3d(0, 0, 5.0), anchor, touching);
  CHECK(f.z() == 0.0);
  CHECK(f.head<2>().norm() == 0.0);
  f = contact_force(c, Vector3d(0.2, 0.2, 0.01), Vector3d::Zero(), anchor, touching);
  CHECK_FALSE(touching);
}

TEST_CASE("payload and external wrench") {
  const auto& m = quadruped();
  DisturbanceSpec spec;
  spec.payload = PayloadSpec{2.4, Vector3d(0.0, 0.0, 0.05), {0.5, 1.0}};
  const double weight = m.total_mass() * 9.81;
  spec.wrenches.push_back({(Vector6d() << 0, 0, weight, 0, 0, 0).finished(), {0.0, 0.5}});
  spec.validate(m, 1.0);
  const Simulator sim(m, spec);
  CHECK(sim.physics_model(0.2).total_mass() == m.total_mass());
  CHECK(sim.physics_model(0.7).total_mass() == doctest::Approx(m.total_mass() + 2.4));
  // The controller-facing model is untouched.
  CHECK(sim.model().total_mass() == m.total_mass());

  // An upward force equal to the weight cancels gravity in flight.
  WorldState w = world_at(airborne(2.0));
  const double c0 = model::com_position(m, w.truth.q).z();
  const VectorXd zero = VectorXd::Zero(m.num_joints());
  for (int k = 0; k < 100; ++k) w = sim.step(w, zero, 1e-3);
  // Free fall would drop the CoM by 4.9 cm over the same 0.1 s.
  CHECK(std::abs(model::com_position(m, w.truth.q).z() - c0) <= 1e-4);
}

TEST_CASE("simulator validation and divergence") {
  const auto& m = quadruped();
  DisturbanceSpec spec;
  spec.faults.push_back({2, 1.5, {0.0, 1.0}});
  CHECK_THROWS_AS(spec.validate(m, 2.0), InvariantError);
  spec.faults = {{20, 0.5, {0.0, 1.0}}};
  CHECK_THROWS_AS(spec.validate(m, 2.0), InvariantError);
  spec.faults = {{2, 0.5, {1.0, 3.0}}};
  CHECK_THROWS_AS(spec.validate(m, 2.0), InvariantError);
  spec.faults.clear();
  spec.noise.position = -1.0;
  CHECK_THROWS_AS(spec.validate(m, 2.0), InvariantError);

  const Simulator sim(m, {});
  WorldState w = world_at(airborne(1.0));
  const VectorXd zero = VectorXd::Zero(m.num_joints());
  CHECK_THROWS_AS(sim.step(w, zero, 2e-3), InvariantError);
  CHECK_THROWS_AS(sim.step(w, VectorXd::Zero(3), 1e-3), InvariantError);
  VectorXd nan = zero;
  nan[0] = std::nan("");
  CHECK_THROWS_AS(sim.step(w, nan, 1e-3), InvariantError);

  w.truth.qd[6] = 2e3;
  try {
    sim.step(w, zero, 1e-3);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("simulation diverged") != std::string::npos);
  }
  CHECK_THROWS_AS(Simulator(test::two_link_arm(), {}), InvariantError);
}
