#include "drc/wbc/hqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/QR>

namespace drc::wbc {

namespace {

double rank_tolerance(double largest) { return 1e-10 * std::max(1.0, largest); }

/// Minimum-norm least-squares solution of A x = b.
VectorXd lstsq(const MatrixXd& A, const VectorXd& b) {
  if (A.rows() == 0 || A.cols() == 0) return VectorXd::Zero(A.cols());
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A.rows(), A.cols());
  cod.setThreshold(1e-10);
  cod.compute(A);
  if (cod.maxPivot() <= 0.0) return VectorXd::Zero(A.cols());
  cod.setThreshold(rank_tolerance(cod.maxPivot()) / cod.maxPivot());
  return cod.solve(b);
}

}  // namespace

MatrixXd nullspace(const MatrixXd& A, int cols) {
  if (A.rows() == 0) return MatrixXd::Identity(cols, cols);
  // Columns of Q beyond the rank of A^T span the nullspace of A.
  Eigen::ColPivHouseholderQR<MatrixXd> qr(A.transpose());
  if (qr.maxPivot() <= 0.0) return MatrixXd::Identity(cols, cols);
  qr.setThreshold(rank_tolerance(qr.maxPivot()) / qr.maxPivot());
  const auto r = qr.rank();
  const MatrixXd Q = qr.householderQ();
  return Q.rightCols(cols - r);
}

LsiResult solve_lsi(const MatrixXd& M, const VectorXd& r, const MatrixXd& G_raw, const VectorXd& h_raw,
                    const VectorXd& y0, int max_activations, double tol) {
  const int k = static_cast<int>(y0.size());
  const int m = static_cast<int>(G_raw.rows());
  // Normalize rows so tolerances are scale free; zero rows are vacuous.
  MatrixXd G(m, k);
  VectorXd h(m);
  std::vector<bool> live(static_cast<size_t>(m), true);
  for (int i = 0; i < m; ++i) {
    const double n = G_raw.row(i).norm();
    if (n < 1e-14) {
      live[static_cast<size_t>(i)] = false;
      G.row(i).setZero();
      h[i] = 0.0;
      continue;
    }
    G.row(i) = G_raw.row(i) / n;
    h[i] = h_raw[i] / n;
  }

  LsiResult out;
  VectorXd y = y0;
  std::vector<int> W;

  auto working_matrix = [&]() {
    MatrixXd GW(static_cast<Eigen::Index>(W.size()), k);
    for (size_t j = 0; j < W.size(); ++j) GW.row(static_cast<Eigen::Index>(j)) = G.row(W[j]);
    return GW;
  };

  // Start with an independent subset of the constraints active at y0.
  {
    MatrixXd Z = MatrixXd::Identity(k, k);
    for (int i = 0; i < m; ++i) {
      if (!live[static_cast<size_t>(i)] || h[i] - G.row(i).dot(y) > tol) continue;
      if (Z.cols() == 0) break;
      if ((Z.transpose() * G.row(i).transpose()).norm() < 1e-8) continue;
      W.push_back(i);
      Z = nullspace(working_matrix(), k);
    }
  }

  const int max_iterations = 20 * std::max(max_activations, 1) + 4 * m;
  for (int it = 0; it < max_iterations; ++it) {
    const MatrixXd GW = working_matrix();
    const MatrixXd Z = nullspace(GW, k);
    const VectorXd res = r - M * y;
    VectorXd p = VectorXd::Zero(k);
    if (Z.cols() > 0) p = Z * lstsq(M * Z, res);

    if (p.norm() <= 1e-10 * (1.0 + y.norm())) {
      if (W.empty()) {
        out.y = y;
        return out;
      }
      const VectorXd grad = M.transpose() * (M * y - r);
      const VectorXd lambda = lstsq(GW.transpose(), -grad);
      const double ltol = 1e-10 * std::max(1.0, grad.norm());
      // Bland's rule: release the lowest-index constraint with a negative multiplier.
      int drop = -1;
      for (size_t j = 0; j < W.size(); ++j)
        if (lambda[static_cast<Eigen::Index>(j)] < -ltol && (drop < 0 || W[j] < W[static_cast<size_t>(drop)]))
          drop = static_cast<int>(j);
      if (drop < 0) {
        out.y = y;
        return out;
      }
      W.erase(W.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    int block = -1;
    const std::set<int> inW(W.begin(), W.end());
    for (int i = 0; i < m; ++i) {
      if (!live[static_cast<size_t>(i)] || inW.count(i)) continue;
      const double gp = G.row(i).dot(p);
      if (gp <= 1e-12 * p.norm()) continue;
      const double slack = std::max(h[i] - G.row(i).dot(y), 0.0);
      const double a = slack / gp;
      if (a < alpha) {
        alpha = a;
        block = i;
      }
    }
    y += alpha * p;
    if (block >= 0) {
      if (++out.activations > max_activations)
        throw SolverError("active-set iteration cap reached (" + std::to_string(max_activations) + " activations)");
      W.push_back(block);
    }
  }
  throw SolverError("active-set iteration did not terminate");
}

int TaskSet::levels() const {
  int l = 0;
  for (const auto& t : tasks) l = std::max(l, t.priority);
  return l;
}

void TaskSet::validate() const {
  if (dim <= 0) throw InvariantError("task set: decision dimension must be positive");
  std::set<int> prio;
  for (const auto& t : tasks) {
    if (t.priority < 1) throw InvariantError("task '" + t.label + "': priority must be >= 1");
    if ((t.A_eq.rows() > 0 && t.A_eq.cols() != dim) || (t.A_in.rows() > 0 && t.A_in.cols() != dim))
      throw InvariantError("task '" + t.label + "': column dimension mismatch");
    if (t.A_eq.rows() != t.b_eq.size() || t.A_in.rows() != t.b_in.size())
      throw InvariantError("task '" + t.label + "': row dimension mismatch");
    if (!t.A_eq.allFinite() || !t.b_eq.allFinite() || !t.A_in.allFinite() || !t.b_in.allFinite())
      throw InvariantError("task '" + t.label + "': non-finite entries");
    prio.insert(t.priority);
  }
  for (int p = 1; p <= levels(); ++p)
    if (!prio.count(p)) throw InvariantError("task set: priorities must be contiguous from 1");
}

Task TaskSet::level(int priority) const {
  Task out;
  out.priority = priority;
  Eigen::Index ne = 0, ni = 0;
  for (const auto& t : tasks)
    if (t.priority == priority) {
      ne += t.A_eq.rows();
      ni += t.A_in.rows();
      out.label += (out.label.empty() ? "" : "+") + t.label;
    }
  out.A_eq.resize(ne, dim);
  out.b_eq.resize(ne);
  out.A_in.resize(ni, dim);
  out.b_in.resize(ni);
  Eigen::Index re = 0, ri = 0;
  for (const auto& t : tasks) {
    if (t.priority != priority) continue;
    if (t.A_eq.rows() > 0) {
      out.A_eq.middleRows(re, t.A_eq.rows()) = t.A_eq;
      out.b_eq.segment(re, t.A_eq.rows()) = t.b_eq;
      re += t.A_eq.rows();
    }
    if (t.A_in.rows() > 0) {
      out.A_in.middleRows(ri, t.A_in.rows()) = t.A_in;
      out.b_in.segment(ri, t.A_in.rows()) = t.b_in;
      ri += t.A_in.rows();
    }
  }
  return out;
}

HierarchyResult solve_hierarchy(const TaskSet& set, const HierarchySettings& s) {
  set.validate();
  const int n = set.dim;
  HierarchyResult out;
  VectorXd z = VectorXd::Zero(n);
  MatrixXd N = MatrixXd::Identity(n, n);
  MatrixXd Gall(0, n);  // inequalities of higher levels, bounds already relaxed
  VectorXd hall(0);

  for (int l = 1; l <= set.levels(); ++l) {
    const Task T = set.level(l);
    const int k = static_cast<int>(N.cols());
    const int mp = static_cast<int>(Gall.rows()), mn = static_cast<int>(T.A_in.rows());

    // Variables (y, v): z = z + N y, and v relaxes this level's inequalities.
    // min |A_eq z - b_eq|^2 + |v|^2  s.t.  G_prev z <= h_prev, G_new z - v <= h_new.
    MatrixXd M = MatrixXd::Zero(T.A_eq.rows() + mn, k + mn);
    VectorXd r = VectorXd::Zero(T.A_eq.rows() + mn);
    M.topLeftCorner(T.A_eq.rows(), k) = T.A_eq * N;
    M.bottomRightCorner(mn, mn).setIdentity();
    r.head(T.A_eq.rows()) = T.b_eq - T.A_eq * z;
    MatrixXd G = MatrixXd::Zero(mp + mn, k + mn);
    VectorXd h(mp + mn);
    G.topLeftCorner(mp, k) = Gall * N;
    h.head(mp) = hall - Gall * z;
    G.bottomLeftCorner(mn, k) = T.A_in * N;
    G.bottomRightCorner(mn, mn) = -MatrixXd::Identity(mn, mn);
    h.tail(mn) = T.b_in - T.A_in * z;
    VectorXd start = VectorXd::Zero(k + mn);
    start.tail(mn) = (-h.tail(mn)).cwiseMax(0.0);

    const LsiResult sol = solve_lsi(M, r, G, h, start, s.max_activations, s.feasibility_tolerance);
    out.activations += sol.activations;
    z += N * sol.y.head(k);
    const VectorXd v = (T.A_in * z - T.b_in).cwiseMax(0.0);
    if (l == 1 && mn > 0) {
      std::string bad;
      Eigen::Index row = 0;
      for (const auto& t : set.tasks) {
        if (t.priority != 1) continue;
        for (Eigen::Index i = 0; i < t.A_in.rows(); ++i, ++row)
          if (v[row] > 1e-7 * std::max(1.0, T.A_in.row(row).norm()) && bad.find(t.label) == std::string::npos)
            bad += (bad.empty() ? "" : ", ") + t.label;
      }
      if (!bad.empty()) throw SolverError("hierarchy: priority-one constraints infeasible (" + bad + ")");
    }
    out.residuals.push_back((T.A_eq * z - T.b_eq).norm());
    if (mn > 0) {
      MatrixXd g(mp + mn, n);
      g << Gall, T.A_in;
      VectorXd hh(mp + mn);
      hh << hall, T.b_in + v;
      Gall = std::move(g);
      hall = std::move(hh);
    }
    if (T.A_eq.rows() > 0 && k > 0) N = N * nullspace(T.A_eq * N, k);
  }

  if (s.min_norm && N.cols() > 0) {
    const MatrixXd G = Gall * N;
    const VectorXd h = (hall - Gall * z).cwiseMax(0.0);
    const LsiResult sol = solve_lsi(N, -z, G, h, VectorXd::Zero(N.cols()), s.max_activations, s.feasibility_tolerance);
    out.activations += sol.activations;
    z += N * sol.y;
  }
  out.z = z;
  return out;
}

}  // namespace drc::wbc
