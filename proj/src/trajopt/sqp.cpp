#include "drc/trajopt/sqp.hpp"

#include <cmath>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace drc::trajopt {

double relaxed_barrier(double h, double w, double delta) {
  if (h >= delta) return -w * std::log(h);
  const double r = (h - 2.0 * delta) / delta;
  return w * (0.5 * r * r - 0.5 - std::log(delta));
}

double relaxed_barrier_d1(double h, double w, double delta) {
  if (h >= delta) return -w / h;
  return w * (h - 2.0 * delta) / (delta * delta);
}

double relaxed_barrier_d2(double h, double w, double delta) {
  if (h >= delta) return w / (h * h);
  return w / (delta * delta);
}

namespace {

using Triplet = Eigen::Triplet<double>;
using Sparse = Eigen::SparseMatrix<double>;

struct Layout {
  int H, nx, nu, nfree = 0;
  std::vector<std::vector<int>> xi, ui;  // free index or -1

  Layout(const OcpFunctions& ocp) : H(ocp.nodes()), nx(ocp.nx()), nu(ocp.nu()) {
    xi.assign(static_cast<size_t>(H), std::vector<int>(static_cast<size_t>(nx), -1));
    ui.assign(static_cast<size_t>(H), std::vector<int>(static_cast<size_t>(nu), -1));
    for (int i = 0; i < H; ++i) {
      if (i > 0)
        for (int k = 0; k < nx; ++k) xi[static_cast<size_t>(i)][static_cast<size_t>(k)] = nfree++;
      const auto mask = ocp.zero_inputs(i);
      for (int k = 0; k < nu; ++k)
        if (!mask[static_cast<size_t>(k)]) ui[static_cast<size_t>(i)][static_cast<size_t>(k)] = nfree++;
    }
  }
};

struct Evaluation {
  std::vector<NodeTerms> terms;
  std::vector<VectorXd> defects;
  double cost = 0.0;
  double defect_l1 = 0.0, eq_l1 = 0.0;
  double defect_max = 0.0, eq_max = 0.0;
  double defect_sq = 0.0, eq_sq = 0.0;

  double violation() const { return std::sqrt(defect_sq + eq_sq); }
};

Evaluation evaluate_all(const OcpFunctions& ocp, const std::vector<VectorXd>& x,
                        const std::vector<VectorXd>& u, bool derivatives, const SqpSettings& s) {
  const int H = ocp.nodes();
  const double dt = ocp.dt();
  const VectorXd off = ocp.offset();
  Evaluation ev;
  ev.terms.resize(static_cast<size_t>(H));
  for (int i = 0; i < H; ++i) {
    const auto ui = static_cast<size_t>(i);
    NodeTerms& t = ev.terms[ui];
    ocp.evaluate(i, x[ui], u[ui], derivatives, t);
    ev.cost += 0.5 * t.res.squaredNorm();
    for (Eigen::Index k = 0; k < t.ineq.size(); ++k)
      ev.cost += relaxed_barrier(t.ineq[k], t.barrier_scale * s.barrier_weight, s.barrier_delta);
    if (t.eq.size() > 0) {
      ev.eq_l1 += t.eq.lpNorm<1>();
      ev.eq_sq += t.eq.squaredNorm();
      ev.eq_max = std::max(ev.eq_max, t.eq.lpNorm<Eigen::Infinity>());
    }
    if (i + 1 < H) {
      VectorXd c = x[ui + 1] - x[ui] - dt * (t.f + off);
      ev.defect_l1 += c.lpNorm<1>();
      ev.defect_sq += c.squaredNorm();
      ev.defect_max = std::max(ev.defect_max, c.lpNorm<Eigen::Infinity>());
      ev.defects.push_back(std::move(c));
    }
  }
  return ev;
}

}  // namespace

SqpResult solve_sqp(const OcpFunctions& ocp, std::vector<VectorXd> x, std::vector<VectorXd> u,
                    const SqpSettings& s) {
  const int H = ocp.nodes(), nx = ocp.nx(), nu = ocp.nu();
  if (H < 2) throw InvariantError("OCP: at least two nodes are required");
  if (static_cast<int>(x.size()) != H || static_cast<int>(u.size()) != H)
    throw InvariantError("OCP: initial guess must hold one state and input per node");
  const Layout lay(ocp);
  const double dt = ocp.dt();
  for (int i = 0; i < H; ++i) {
    const auto mask = ocp.zero_inputs(i);
    for (int k = 0; k < nu; ++k)
      if (mask[static_cast<size_t>(k)]) u[static_cast<size_t>(i)][k] = 0.0;
  }

  SqpResult result;
  Evaluation ev = evaluate_all(ocp, x, u, true, s);

  for (int iter = 0; iter < s.max_iterations; ++iter) {
    // Assemble the Gauss-Newton KKT system.
    std::vector<Triplet> trip;
    VectorXd grad = VectorXd::Zero(lay.nfree);
    std::vector<VectorXd> row_rhs;
    int nrows = 0;
    std::vector<Triplet> arows;

    for (int i = 0; i < H; ++i) {
      const auto ui = static_cast<size_t>(i);
      const NodeTerms& t = ev.terms[ui];
      const int nz = nx + nu;
      std::vector<int> idx(static_cast<size_t>(nz));
      for (int k = 0; k < nx; ++k) idx[static_cast<size_t>(k)] = lay.xi[ui][static_cast<size_t>(k)];
      for (int k = 0; k < nu; ++k) idx[static_cast<size_t>(nx + k)] = lay.ui[ui][static_cast<size_t>(k)];

      MatrixXd Hl = MatrixXd::Zero(nz, nz);
      VectorXd gl = VectorXd::Zero(nz);
      if (t.res.size() > 0) {
        MatrixXd Jr(t.res.size(), nz);
        Jr << t.resx, t.resu;
        Hl.noalias() += Jr.transpose() * Jr;
        gl.noalias() += Jr.transpose() * t.res;
      }
      for (Eigen::Index k = 0; k < t.ineq.size(); ++k) {
        const double bw = t.barrier_scale * s.barrier_weight;
        const double b1 = relaxed_barrier_d1(t.ineq[k], bw, s.barrier_delta);
        const double b2 = relaxed_barrier_d2(t.ineq[k], bw, s.barrier_delta);
        const VectorXd gk = t.inequ.row(k).transpose();
        Hl.bottomRightCorner(nu, nu).noalias() += b2 * gk * gk.transpose();
        if (static_cast<size_t>(k) < t.ineq_hessian.size())
          Hl.bottomRightCorner(nu, nu) += b1 * t.ineq_hessian[static_cast<size_t>(k)];
        gl.tail(nu) += b1 * gk;
      }
      for (int a = 0; a < nz; ++a) {
        const int ia = idx[static_cast<size_t>(a)];
        if (ia < 0) continue;
        grad[ia] += gl[a];
        for (int b = 0; b < nz; ++b) {
          const int ib = idx[static_cast<size_t>(b)];
          if (ib >= 0 && Hl(a, b) != 0.0) trip.emplace_back(ia, ib, Hl(a, b));
        }
      }

      // Dynamics defect rows.
      if (i + 1 < H) {
        for (int r = 0; r < nx; ++r) {
          const int row = nrows + r;
          const int nxt = lay.xi[ui + 1][static_cast<size_t>(r)];
          if (nxt >= 0) arows.emplace_back(row, nxt, 1.0);
          for (int k = 0; k < nx; ++k) {
            const int ix = lay.xi[ui][static_cast<size_t>(k)];
            if (ix < 0) continue;
            const double v = (r == k ? -1.0 : 0.0) - dt * t.fx(r, k);
            if (v != 0.0) arows.emplace_back(row, ix, v);
          }
          for (int k = 0; k < nu; ++k) {
            const int iu = lay.ui[ui][static_cast<size_t>(k)];
            if (iu >= 0 && t.fu(r, k) != 0.0) arows.emplace_back(row, iu, -dt * t.fu(r, k));
          }
        }
        row_rhs.push_back(-ev.defects[ui]);
        nrows += nx;
      }
      // Path equality rows.
      for (Eigen::Index r = 0; r < t.eq.size(); ++r) {
        const int row = nrows + static_cast<int>(r);
        for (int k = 0; k < nx; ++k) {
          const int ix = lay.xi[ui][static_cast<size_t>(k)];
          if (ix >= 0 && t.eqx(r, k) != 0.0) arows.emplace_back(row, ix, t.eqx(r, k));
        }
        for (int k = 0; k < nu; ++k) {
          const int iu = lay.ui[ui][static_cast<size_t>(k)];
          if (iu >= 0 && t.equ(r, k) != 0.0) arows.emplace_back(row, iu, t.equ(r, k));
        }
      }
      if (t.eq.size() > 0) {
        row_rhs.push_back(-t.eq);
        nrows += static_cast<int>(t.eq.size());
      }
    }

    const int n = lay.nfree;
    for (int k = 0; k < n; ++k) trip.emplace_back(k, k, s.hessian_regularization);
    for (const auto& a : arows) {
      trip.emplace_back(n + a.row(), a.col(), a.value());
      trip.emplace_back(a.col(), n + a.row(), a.value());
    }
    for (int r = 0; r < nrows; ++r) trip.emplace_back(n + r, n + r, -s.constraint_regularization);
    Sparse K(n + nrows, n + nrows);
    K.setFromTriplets(trip.begin(), trip.end());
    VectorXd rhs(n + nrows);
    rhs.head(n) = -grad;
    int off = n;
    for (const auto& rr : row_rhs) {
      rhs.segment(off, rr.size()) = rr;
      off += static_cast<int>(rr.size());
    }

    Eigen::SimplicialLDLT<Sparse> ldlt(K);
    if (ldlt.info() != Eigen::Success) throw SolverError("OCP: KKT factorization failed");
    const VectorXd sol = ldlt.solve(rhs);
    if (!sol.allFinite()) throw SolverError("OCP: KKT solve produced non-finite values");
    const VectorXd dw = sol.head(n);

    // Filter line search: accept a step that lowers either the cost or the
    // constraint violation by a margin; once feasible, require Armijo decrease.
    const double viol0 = ev.violation();
    const double slope = grad.dot(dw);

    auto apply = [&](double alpha, std::vector<VectorXd>& xn, std::vector<VectorXd>& un) {
      xn = x;
      un = u;
      for (int i = 0; i < H; ++i) {
        const auto ui = static_cast<size_t>(i);
        for (int k = 0; k < nx; ++k)
          if (lay.xi[ui][static_cast<size_t>(k)] >= 0) xn[ui][k] += alpha * dw[lay.xi[ui][static_cast<size_t>(k)]];
        for (int k = 0; k < nu; ++k)
          if (lay.ui[ui][static_cast<size_t>(k)] >= 0) un[ui][k] += alpha * dw[lay.ui[ui][static_cast<size_t>(k)]];
      }
    };

    double alpha = 1.0;
    bool accepted = false;
    std::vector<VectorXd> xn, un;
    Evaluation evn;
    for (int ls = 0; ls < 25; ++ls, alpha *= 0.5) {
      apply(alpha, xn, un);
      evn = evaluate_all(ocp, xn, un, false, s);
      const double viol = evn.violation();
      if (!std::isfinite(evn.cost) || !std::isfinite(viol) || viol > s.max_violation) continue;
      if (viol < s.min_violation && viol0 < s.min_violation) {
        accepted = evn.cost <= ev.cost + s.armijo * alpha * std::min(slope, 0.0);
      } else {
        accepted = evn.cost < ev.cost - s.filter_margin * viol0 || viol < (1.0 - s.filter_margin) * viol0;
      }
      if (accepted) break;
    }
    result.iterations = iter + 1;
    if (!accepted) break;
    x = std::move(xn);
    u = std::move(un);
    const double step = alpha * dw.lpNorm<Eigen::Infinity>();
    ev = evaluate_all(ocp, x, u, true, s);
    if (step < s.step_tolerance) {
      result.converged = true;
      break;
    }
  }

  result.x = std::move(x);
  result.u = std::move(u);
  result.cost = ev.cost;
  result.defect_norm = ev.defect_max;
  result.equality_norm = ev.eq_max;
  return result;
}

}  // namespace drc::trajopt
