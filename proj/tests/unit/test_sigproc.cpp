#include <cmath>
#include <random>

#include "doctest.h"
#include "drc/sigproc/filters.hpp"

using namespace drc;
using namespace drc::sigproc;

TEST_CASE("saturator") {
  VectorXd f = VectorXd::Zero(18);
  f[2] = 10.0;
  CHECK(saturate(f, 25.0) == f);
  f[2] = 100.0;
  const VectorXd s = saturate(f, 25.0);
  CHECK(s[2] == doctest::Approx(25.0));
  CHECK(s.norm() <= 25.0);
  CHECK(saturate(VectorXd::Zero(6), 25.0).isZero(0.0));
  CHECK_THROWS_AS(saturate(f, 0.0), InvariantError);
}

TEST_CASE("saturator properties on random inputs") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 40.0);
  std::uniform_real_distribution<double> a(1.0, 70.1);
  for (int k = 0; k < 2000; ++k) {
    VectorXd x(18);
    for (int i = 0; i < 18; ++i) x[i] = n(rng);
    const double alpha = a(rng);
    const VectorXd y = saturate(x, alpha);
    CHECK(y.norm() <= alpha);
    CHECK(saturate(y, alpha) == y);
    // Parallel and same direction.
    CHECK(std::abs(y.dot(x) - y.norm() * x.norm()) <= 1e-9 * y.norm() * x.norm());
  }
}

TEST_CASE("moving average") {
  MovingAverage one(1);
  const VectorXd v = VectorXd::LinSpaced(4, -1.0, 2.0);
  CHECK(one.step(v) == v);
  CHECK(one.step(2 * v) == 2 * v);

  MovingAverage five(5);
  for (int k = 0; k < 12; ++k) CHECK((five.step(v) - v).cwiseAbs().maxCoeff() < 1e-15);

  MovingAverage two(2);
  two.step(v);
  for (int k = 0; k < 6; ++k) CHECK(two.step(k % 2 == 0 ? -v : v).isZero(0.0));

  MovingAverage three(3);
  CHECK(three.step(VectorXd::Constant(1, 3.0))[0] == 3.0);
  CHECK(three.step(VectorXd::Constant(1, 6.0))[0] == 4.5);  // partial mean
  CHECK_THROWS_AS(MovingAverage(0), InvariantError);
}

TEST_CASE("first-order low-pass") {
  const VectorXd x = VectorXd::Constant(3, 1.0);
  CHECK((lowpass_step(VectorXd::Zero(3), x, 1e9, 1e-3) - x).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(lowpass_step(x, x, 10.0, 1e-3) == x);

  // Step response reaches 1 - 1/e after one time constant.
  const double fc = 5.0, dt = 1e-4;
  const double tc = 1.0 / (2 * M_PI * fc);
  VectorXd y = VectorXd::Zero(1);
  const int steps = static_cast<int>(std::lround(tc / dt));
  for (int k = 0; k < steps; ++k) y = lowpass_step(y, VectorXd::Ones(1), fc, dt);
  CHECK(y[0] == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(0.02));

  CHECK_THROWS_AS(LowPass(600.0, 1e-3), InvariantError);
}

TEST_CASE("filters have unit DC gain and are linear") {
  FilterChain chain({{FilterKind::Maf, 25.0, 4, 50.0}, {FilterKind::Lowpass, 25.0, 1, 20.0}}, 1e-3);
  FilterChain chain2 = chain;
  const VectorXd c = VectorXd::Constant(5, 3.0);
  VectorXd out;
  for (int k = 0; k < 2000; ++k) out = chain.step(c);
  CHECK((out - c).cwiseAbs().maxCoeff() < 1e-9);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  FilterChain a = chain2, b = chain2, ab = chain2;
  for (int k = 0; k < 50; ++k) {
    VectorXd u(5), v(5);
    for (int i = 0; i < 5; ++i) {
      u[i] = n(rng);
      v[i] = n(rng);
    }
    CHECK((ab.step(2 * u + v) - (2 * a.step(u) + b.step(v))).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("chain applies the saturator last") {
  FilterChain chain({{FilterKind::Saturator, 1.0, 1, 50.0}, {FilterKind::Maf, 25.0, 2, 50.0}}, 1e-3);
  CHECK(chain.stages().back().kind == FilterKind::Saturator);
  chain.step(VectorXd::Constant(1, 10.0));
  // Mean of (10, 0) = 5, then clamped to 1. Saturating first would give 0.5.
  CHECK(chain.step(VectorXd::Zero(1))[0] == doctest::Approx(1.0));
}
