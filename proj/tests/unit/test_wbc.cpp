#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "doctest.h"
#include "drc/model/dynamics.hpp"
#include "drc/wbc/wbc.hpp"
#include "test_support.hpp"
#include "wbc_oracle.hpp"

using namespace drc;
using namespace drc::wbc;
using namespace drc::test;

namespace {

const model::RobotModel& robot() { return test::quadruped(); }

WbcInput standing_input() {
  const auto& m = robot();
  WbcInput in;
  in.q = test::standing_q(m);
  in.qd = VectorXd::Zero(18);
  in.stance = {true, true, true, true};
  in.qdd_ref = VectorXd::Zero(18);
  in.F_ref = VectorXd::Zero(12);
  for (int i = 0; i < 4; ++i) in.F_ref[3 * i + 2] = m.total_mass() * 9.81 / 4;
  in.f_process = VectorXd::Zero(18);
  return in;
}

/// References that every level can meet exactly: accelerations in the
/// contact-consistent set and forces balancing the base rows.
WbcInput consistent_input(test::RandomStates& rs) {
  const auto& m = robot();
  WbcInput in = standing_input();
  in.q += rs.vector(18, 0.03);
  in.qd = rs.vector(18, 0.2);
  const MatrixXd J = model::contact_jacobian(m, in.q, in.stance);
  const VectorXd Jdqd = model::contact_jacobian_bias(m, in.q, in.qd, in.stance);
  const MatrixXd NJ = null_basis(J, 18);
  in.qdd_ref = -pinv_solve(J, Jdqd) + NJ * rs.vector(static_cast<int>(NJ.cols()), 0.5);
  const MatrixXd D = model::mass_matrix(m, in.q);
  const VectorXd b = D * in.qdd_ref + model::bias_forces(m, in.q, in.qd);
  // Base rows: J_b^T F = (D qdd + bias)_b, nearest to an even vertical split.
  const MatrixXd JbT = J.leftCols(6).transpose();
  const MatrixXd Nb = null_basis(JbT, 12);
  VectorXd F = pinv_solve(JbT, b.head(6));
  F += Nb * Nb.transpose() * (in.F_ref - F);
  in.F_ref = F;
  return in;
}

double dynamics_residual(const model::RobotModel& m, const WbcInput& in, const WbcSolution& s) {
  const model::StanceFlags all(4, true);
  VectorXd r = model::mass_matrix(m, in.q) * s.qdd + model::bias_forces(m, in.q, in.qd) -
               model::contact_jacobian(m, in.q, all).transpose() * s.F - in.f_process;
  r.tail(12) -= s.tau;
  return r.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("nullspace basis") {
  test::RandomStates rs(1);
  const MatrixXd A = MatrixXd::Random(3, 7);
  const MatrixXd N = nullspace(A, 7);
  CHECK(N.cols() == 4);
  CHECK((A * N).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((N.transpose() * N - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(nullspace(MatrixXd(0, 3), 3) == MatrixXd::Identity(3, 3));
  MatrixXd R(2, 3);
  R << 1, 2, 3, 2, 4, 6;
  CHECK(nullspace(R, 3).cols() == 2);
}

TEST_CASE("hierarchy matches the lexicographic oracle") {
  test::RandomStates rs(2024);
  std::srand(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const TaskSet set = random_instance(rs, 5);
    const HierarchyResult r = solve_hierarchy(set);
    const LexOracle o = lexicographic_oracle(set);
    for (size_t l = 0; l < o.residuals.size(); ++l) {
      CHECK(std::abs(r.residuals[l] - o.residuals[l]) <= 1e-6);
      worst = std::max(worst, std::abs(r.residuals[l] - o.residuals[l]));
    }
    CHECK((r.z - o.z).cwiseAbs().maxCoeff() <= 1e-6);
    worst = std::max(worst, (r.z - o.z).cwiseAbs().maxCoeff());
    // Priority-one inequalities are hard.
    const Task L1 = set.level(1);
    CHECK(((L1.A_in * r.z - L1.b_in).array() <= 1e-8).all());
  }
  MESSAGE("worst oracle deviation ", worst);
}

TEST_CASE("hierarchy monotonicity against feasible competitors") {
  // No point that keeps level 1 optimal and feasible does better on level 2.
  test::RandomStates rs(7);
  std::srand(7);
  for (int trial = 0; trial < 20; ++trial) {
    const TaskSet set = random_instance(rs, 5);
    const HierarchyResult r = solve_hierarchy(set);
    const Task L1 = set.level(1), L2 = set.level(2);
    const MatrixXd N1 = nullspace(L1.A_eq, 5);
    const MatrixXd G = vstack(L1.A_in, L2.A_in);
    const VectorXd h = vstack(L1.b_in, L2.b_in);
    for (int s = 0; s < 200; ++s) {
      const VectorXd z = r.z + N1 * rs.vector(static_cast<int>(N1.cols()), 0.5);
      if (((G * z - h).array() > 0).any()) continue;
      CHECK((L2.A_eq * z - L2.b_eq).norm() >= r.residuals[1] - 1e-9);
    }
  }
}

TEST_CASE("task set validation and infeasibility") {
  TaskSet s;
  s.dim = 2;
  Task a;
  a.label = "a";
  a.priority = 2;
  a.A_eq = MatrixXd::Identity(2, 2);
  a.b_eq = VectorXd::Zero(2);
  s.tasks = {a};
  CHECK_THROWS_AS(solve_hierarchy(s), InvariantError);

  Task box;
  box.label = "box";
  box.priority = 1;
  box.A_in = (MatrixXd(2, 2) << 1, 0, -1, 0).finished();
  box.b_in = Eigen::Vector2d(-1.0, -1.0);  // x <= -1 and x >= 1
  s.tasks = {box};
  CHECK_THROWS_WITH_AS(solve_hierarchy(s), doctest::Contains("box"), SolverError);
}

TEST_CASE("task construction") {
  const auto& m = robot();
  WbcInput in = standing_input();
  in.stance = {true, false, false, true};
  const TaskSet set = build_tasks(m, in);
  const WbcLayout L = wbc_layout(m);
  CHECK(set.levels() == 3);
  CHECK(L.dim() == 42);

  SUBCASE("swing selection picks exactly the swing force components") {
    for (const auto& t : set.tasks)
      if (t.label == "no swing force") {
        CHECK(t.A_eq.rows() == 6);
        for (int r = 0; r < 6; ++r) {
          CHECK(t.A_eq.row(r).sum() == 1.0);
          CHECK(t.A_eq.row(r).cwiseAbs().sum() == 1.0);
        }
        CHECK(t.A_eq(0, L.F() + 3) == 1.0);
        CHECK(t.A_eq(3, L.F() + 6) == 1.0);
      }
  }
  SUBCASE("without uncertainty the dynamics row is the rigid-body equation") {
    for (const auto& t : set.tasks)
      if (t.label == "dynamics")
        CHECK((t.b_eq + model::bias_forces(m, in.q, in.qd)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("pyramid arithmetic") {
    const auto C = friction_pyramid(0.7);
    CHECK(((C * Vector3d(0, 0, 100)).array() <= 0).all());
    CHECK_FALSE(((C * Vector3d(80, 0, 100)).array() <= 0).all());
  }
  SUBCASE("priorities follow the task table") {
    for (const auto& t : set.tasks) {
      if (t.label == "dynamics" || t.label == "friction cone" || t.label == "no swing force" ||
          t.label == "torque limits")
        CHECK(t.priority == 1);
      if (t.label == "acceleration tracking") CHECK(t.priority == 2);
      if (t.label == "no contact motion" || t.label == "foot force tracking") CHECK(t.priority == 3);
    }
  }
}

TEST_CASE("whole-body control on the quadruped") {
  const auto& m = robot();
  test::RandomStates rs(99);

  SUBCASE("consistent references are met at every level") {
    for (int trial = 0; trial < 10; ++trial) {
      const WbcInput in = consistent_input(rs);
      const WbcSolution s = solve_wbc(m, in);
      CHECK(s.residuals[0] <= 1e-9);
      CHECK(s.residuals[1] <= 1e-8);
      CHECK(s.residuals[2] <= 1e-8);
      CHECK((s.F - in.F_ref).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
  SUBCASE("starved torque limits keep priority one and give up tracking") {
    WbcInput in = standing_input();
    in.torque_limit = VectorXd::Constant(12, 0.5);
    const WbcSolution s = solve_wbc(m, in);
    CHECK(dynamics_residual(m, in, s) <= 1e-9);
    CHECK(s.tau.cwiseAbs().maxCoeff() <= 0.5 + 1e-9);
    CHECK(s.residuals[1] > 1e-3);
  }
  SUBCASE("output invariants on perturbed states and gaits") {
    const std::vector<model::StanceFlags> flags = {
        {true, true, true, true}, {true, false, false, true}, {false, true, true, false}};
    double worst_time = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
      WbcInput in = standing_input();
      in.q += rs.vector(18, 0.05);
      in.qd = rs.vector(18, 0.5);
      in.stance = flags[static_cast<size_t>(trial) % flags.size()];
      in.qdd_ref = rs.vector(18, 2.0);
      in.F_ref += rs.vector(12, 5.0);
      in.f_process = rs.vector(18, 5.0);
      const auto t0 = std::chrono::steady_clock::now();
      const WbcSolution s = solve_wbc(m, in);
      worst_time = std::max(worst_time, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      CHECK(dynamics_residual(m, in, s) <= 1e-9);
      const auto C = friction_pyramid(in.mu);
      for (int f = 0; f < 4; ++f) {
        const Vector3d F = s.F.segment<3>(3 * f);
        if (in.stance[static_cast<size_t>(f)]) {
          CHECK(((C * F).array() <= 1e-8).all());
        } else {
          CHECK(F == Vector3d::Zero());
        }
      }
      CHECK((s.tau.cwiseAbs().array() <= m.torque_limits().array() + 1e-9).all());
    }
    MESSAGE("worst WBC solve ms ", worst_time);
  }
  SUBCASE("uncertainty compensation shows up in the contact forces") {
    WbcInput in = standing_input();
    const WbcSolution base = solve_wbc(m, in);
    Vector6d wrench = Vector6d::Zero();
    wrench[2] = -50.0;
    in.f_process = model::base_wrench_to_generalized(m, in.q, wrench);
    const WbcSolution comp = solve_wbc(m, in);
    double dfz = 0.0;
    for (int f = 0; f < 4; ++f) dfz += comp.F[3 * f + 2] - base.F[3 * f + 2];
    CHECK(dfz == doctest::Approx(50.0).epsilon(0.10));
  }
}

TEST_CASE("PD torque law") {
  const VectorXd ts = (VectorXd(3) << 1.0, -2.0, 5.0).finished();
  const VectorXd z = VectorXd::Zero(3), kp = VectorXd::Constant(3, 40.0), kd = VectorXd::Constant(3, 1.0);
  const VectorXd lo = VectorXd::Constant(3, -5.0), hi = VectorXd::Constant(3, 5.0);
  SUBCASE("zero error passes the feedforward") { CHECK(pd_torque(ts, z, z, z, z, kp, kd, lo, hi) == ts); }
  SUBCASE("unit position error") {
    VectorXd qr = z;
    qr[1] = 0.1;
    const VectorXd u = pd_torque(ts, qr, z, z, z, kp, kd, VectorXd::Constant(3, -50.0), VectorXd::Constant(3, 50.0));
    qr[1] = 1.0;
    const VectorXd u1 = pd_torque(ts, qr, z, z, z, kp, kd, VectorXd::Constant(3, -50.0), VectorXd::Constant(3, 50.0));
    CHECK(u[1] == doctest::Approx(-2.0 + 4.0));
    CHECK(u1[1] == doctest::Approx(-2.0 + 40.0));
  }
  SUBCASE("clamps at the limit") {
    VectorXd qr = z;
    qr[2] = 0.3;
    CHECK(pd_torque(ts, qr, z, z, z, kp, kd, lo, hi)[2] == 5.0);
  }
  SUBCASE("gains must be positive") { CHECK_THROWS_AS(pd_torque(ts, z, z, z, z, z, kd, lo, hi), InvariantError); }
}
