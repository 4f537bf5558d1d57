#include <Eigen/Cholesky>

#include "doctest.h"
#include "drc/model/centroidal.hpp"
#include "test_support.hpp"

using namespace drc;
using namespace drc::model;

TEST_CASE("centroidal state round trip through the momentum partition") {
  const RobotModel& m = test::quadruped();
  test::RandomStates rs(31);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd q = rs.configuration(m);
    const VectorXd qd = rs.vector(18, 1.0);
    const CentroidalState x = centroidal_state(m, q, qd);
    CHECK((generalized_velocity(m, x, qd.tail(12)) - qd).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((CentroidalState::from_vector(x.to_vector()).to_vector() - x.to_vector()).isZero());
  }
}

TEST_CASE("centroidal dynamics right-hand side") {
  const RobotModel& m = test::quadruped();
  const StanceFlags all(4, true);
  CentroidalState x;
  x.q = test::standing_q(m);
  CentroidalInput u;
  u.qdj = VectorXd::Zero(12);

  SUBCASE("static equilibrium with symmetric support") {
    // Solve the four vertical forces for zero net moment about the CoM.
    const auto feet = foot_positions(m, x.q);
    const Vector3d c = com_position(m, x.q);
    Eigen::Matrix<double, 3, 4> Amat;
    for (int i = 0; i < 4; ++i) {
      const Vector3d r = feet[static_cast<size_t>(i)] - c;
      Amat.col(i) << 1.0, r.y(), -r.x();
    }
    // Minimum-norm distribution satisfying sum fz = m g and zero moments.
    const Eigen::Vector3d b(m.total_mass() * 9.81, 0.0, 0.0);
    const Eigen::Vector4d fz = Amat.transpose() * (Amat * Amat.transpose()).ldlt().solve(b);
    u.F = VectorXd::Zero(12);
    for (int i = 0; i < 4; ++i) u.F[3 * i + 2] = fz[i];
    const VectorXd xdot = centroidal_rhs(m, x, u, all);
    CHECK(xdot.head<6>().cwiseAbs().maxCoeff() < 1e-10);
    CHECK(xdot.tail(18).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("no forces means free fall") {
    u.F = VectorXd::Zero(12);
    const VectorXd xdot = centroidal_rhs(m, x, u, all);
    CHECK((xdot.head<3>() - m.total_mass() * m.gravity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(xdot.segment<3>(3).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("single foot force produces its moment about the CoM") {
    u.F = VectorXd::Zero(12);
    const Vector3d f(5.0, -3.0, 40.0);
    u.F.segment<3>(6) = f;
    const VectorXd xdot = centroidal_rhs(m, x, u, all);
    const Vector3d r = foot_positions(m, x.q)[2] - com_position(m, x.q);
    CHECK((xdot.segment<3>(3) - r.cross(f)).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("swing foot with nonzero force is rejected") {
    u.F = VectorXd::Ones(12);
    CHECK_THROWS_AS(centroidal_rhs(m, x, u, StanceFlags{true, true, false, true}), InvariantError);
  }

  SUBCASE("momentum maps back to the base velocity") {
    u.F = VectorXd::Zero(12);
    u.qdj = VectorXd::LinSpaced(12, -1.0, 1.0);
    x.h = Vector3d(1.0, 0.5, -0.2);
    x.L = Vector3d(0.05, 0.1, -0.02);
    const VectorXd xdot = centroidal_rhs(m, x, u, all);
    const VectorXd qd = xdot.tail(18);
    const Vector6d hL = centroidal_momentum_matrix(m, x.q) * qd;
    CHECK((hL.head<3>() - x.h).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((hL.tail<3>() - x.L).cwiseAbs().maxCoeff() < 1e-10);
  }
}
