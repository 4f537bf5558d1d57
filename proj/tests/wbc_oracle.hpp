#pragma once

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "drc/wbc/hqp.hpp"
#include "test_support.hpp"

namespace drc::test {

using wbc::Task;
using wbc::TaskSet;

inline VectorXd pinv_solve(const MatrixXd& A, const VectorXd& b) {
  if (A.rows() == 0) return VectorXd::Zero(A.cols());
  Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  svd.setThreshold(1e-10);
  return svd.solve(b);
}

inline MatrixXd null_basis(const MatrixXd& A, int n) {
  if (A.rows() == 0) return MatrixXd::Identity(n, n);
  Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeFullV);
  svd.setThreshold(1e-10);
  return svd.matrixV().rightCols(n - static_cast<int>(svd.rank()));
}

inline MatrixXd vstack(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() + b.rows(), std::max(a.cols(), b.cols()));
  if (a.rows()) out.topRows(a.rows()) = a;
  if (b.rows()) out.bottomRows(b.rows()) = b;
  return out;
}

inline VectorXd vstack(const VectorXd& a, const VectorXd& b) {
  VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

/// Lexicographic optimum by enumerating active inequality subsets level by
/// level. Each level minimizes its equality residual plus the violation of
/// its own inequalities (slack variables v) over the frozen optimum of the
/// levels above; the best feasible face minimizer wins, and its task values
/// and relaxed bounds are frozen for the levels below.
struct LexOracle {
  VectorXd z;
  std::vector<double> residuals;
};

inline VectorXd best_on_faces(const MatrixXd& A, const VectorXd& b, const MatrixXd& E, const VectorXd& e,
                       const MatrixXd& G, const VectorXd& h, bool min_norm) {
  const int n = static_cast<int>(std::max(A.cols(), std::max(E.cols(), G.cols())));
  const int m = static_cast<int>(G.rows());
  double best = std::numeric_limits<double>::infinity();
  VectorXd arg;
  for (int mask = 0; mask < (1 << m); ++mask) {
    MatrixXd C = E;
    VectorXd c = e;
    for (int i = 0; i < m; ++i)
      if (mask & (1 << i)) {
        C = vstack(C, MatrixXd(G.row(i)));
        c = vstack(c, VectorXd::Constant(1, h[i]));
      }
    if (C.cols() == 0) C.resize(0, n);
    const VectorXd zp = pinv_solve(C, c);
    if (C.rows() > 0 && (C * zp - c).norm() > 1e-9 * (1.0 + c.norm())) continue;
    VectorXd cand = zp;
    if (!min_norm) {
      const MatrixXd Z = null_basis(C, n);
      if (Z.cols() > 0) cand += Z * pinv_solve(A * Z, b - A * zp);
    }
    if (m > 0 && ((G * cand - h).array() > 1e-9).any()) continue;
    const double v = min_norm ? cand.squaredNorm() : (A * cand - b).squaredNorm();
    if (v < best - 1e-12) {
      best = v;
      arg = cand;
    }
  }
  if (arg.size() != n) throw std::runtime_error("lexicographic oracle: no feasible face");
  return arg;
}

inline LexOracle lexicographic_oracle(const TaskSet& set) {
  const int n = set.dim;
  MatrixXd E(0, n), G(0, n);
  VectorXd e(0), h(0);
  LexOracle out;
  for (int l = 1; l <= set.levels(); ++l) {
    const Task T = set.level(l);
    const int ne = static_cast<int>(T.A_eq.rows()), mn = static_cast<int>(T.A_in.rows());
    const int mp = static_cast<int>(G.rows());
    MatrixXd A = MatrixXd::Zero(ne + mn, n + mn);
    A.topLeftCorner(ne, n) = T.A_eq;
    A.bottomRightCorner(mn, mn).setIdentity();
    VectorXd b = VectorXd::Zero(ne + mn);
    b.head(ne) = T.b_eq;
    MatrixXd Ga = MatrixXd::Zero(mp + mn, n + mn);
    Ga.topLeftCorner(mp, n) = G;
    Ga.bottomLeftCorner(mn, n) = T.A_in;
    Ga.bottomRightCorner(mn, mn) = -MatrixXd::Identity(mn, mn);
    MatrixXd Ea = MatrixXd::Zero(E.rows(), n + mn);
    Ea.leftCols(n) = E;
    const VectorXd z = best_on_faces(A, b, Ea, e, Ga, vstack(h, T.b_in), false).head(n);
    out.residuals.push_back((T.A_eq * z - T.b_eq).norm());
    E = vstack(E, T.A_eq);
    e = vstack(e, VectorXd(T.A_eq * z));
    G = vstack(G, T.A_in);
    h = vstack(h, VectorXd(T.b_in + (T.A_in * z - T.b_in).cwiseMax(0.0)));
  }
  out.z = best_on_faces(MatrixXd(0, n), VectorXd(0), E, e, G, h, true);
  return out;
}

inline TaskSet random_instance(RandomStates& rs, int n) {
  const VectorXd zf = rs.vector(n, 1.0);
  auto task = [&](int prio, int ne, int ni) {
    Task t;
    t.label = "L" + std::to_string(prio);
    t.priority = prio;
    t.A_eq = MatrixXd::Random(ne, n);
    t.b_eq = rs.vector(ne, 2.0);
    t.A_in = MatrixXd::Random(ni, n);
    t.b_in = t.A_in * zf + (rs.vector(ni, 0.5).array() + 0.5).matrix();
    return t;
  };
  TaskSet s;
  s.dim = n;
  s.tasks = {task(1, 2, 3), task(2, 2, 2), task(3, 3, 0)};
  return s;
}

}  // namespace drc::test
