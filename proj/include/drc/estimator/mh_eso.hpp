#pragma once

#include <deque>
#include <memory>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "drc/common.hpp"

namespace drc::estimator {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Weights of the moving-horizon cost. With nz = 3 * block_dim:
/// Gamma is nz x nz (prior), Lambda is N*nz square (process noise) and the
/// output residual weight is Pi * I.
struct MheGains {
  MatrixXd Gamma;
  MatrixXd Lambda;
  double Pi = 0.01;
  int N = 4;
  double ts = 1e-3;

  /// Gamma = gamma I, Lambda = lambda I.
  static MheGains uniform(int block_dim, int N, double gamma, double lambda, double pi,
                          double ts = 1e-3);
};

/// Data-independent matrices of the windowed problem, built once per
/// (gains, omega0, block dimension). Every observer matrix is a 3x3 (or
/// 2x3) scalar pattern Kronecker'd with the identity of size block_dim.
struct MheMatrices {
  int block_dim = 0;
  int N = 0;
  double ts = 0.0;
  double omega0 = 0.0;
  MheGains gains;

  Eigen::Matrix3d a0_bar;  // scalar patterns
  Eigen::Matrix3d a0;
  Eigen::Vector3d l0;

  MatrixXd A0_bar, A0, B0, L0, C_obs, C_meas;
  MatrixXd F_N, H_N;
  MatrixXd M1, M2, M3;
  SparseMatrix F_N_sparse, H_N_sparse, N1;
  std::shared_ptr<Eigen::SparseLU<SparseMatrix>> N1_lu;

  int nz() const { return 3 * block_dim; }
  int ny() const { return 2 * block_dim; }
  /// z -> A0 z without forming the Kronecker product.
  VectorXd apply_a0(const VectorXd& z) const;
  /// u_z = B0 drive + L0 y1.
  VectorXd input(const VectorXd& y1, const VectorXd& drive) const;
};

MheMatrices mhe_matrices(int block_dim, const MheGains& gains, double omega0);

/// One horizon of data: N+1 measurements y(i) = [y1(i); y2(i)], N inputs
/// u_z(i) and the prior zbar for the first state.
struct MheWindow {
  std::vector<VectorXd> y;
  std::vector<VectorXd> uz;
  VectorXd prior;
};

struct MheSolution {
  VectorXd z_start;  // zhat(k-N|k)
  MatrixXd w;        // column i is what(k-N+i|k)
  VectorXd z_now;    // zhat(k|k), propagated through the window
};

/// Solves the stacked normal equations N1 d = N2 with the cached sparse LU.
MheSolution mhe_solve(const MheMatrices& m, const MheWindow& window);

/// Same minimizer through the explicit closed form with M1, M2, M3.
MheSolution mhe_solve_closed_form(const MheMatrices& m, const MheWindow& window);

/// Dense reference: minimizes the windowed cost over all window states and
/// noises subject to the dynamics, through one KKT system. Test use only.
MheSolution mhe_oracle(const MheMatrices& m, const MheWindow& window);

/// Prior of the next window: A0 zhat(k-N|k) + u_z(k-N) + what(k-N|k).
VectorXd mhe_predict(const MheMatrices& m, const MheSolution& previous, const VectorXd& uz_first);

/// Moving-horizon ESO with its ring buffer. Feed one sample per period.
class MhEso {
 public:
  MhEso(int block_dim, const MheGains& gains, double omega0);
  explicit MhEso(MheMatrices matrices);

  /// Appends (y1, y2, drive = f_e + g_e u_hat). Solves once the window
  /// holds N+1 samples; returns whether a solution is available.
  bool step(const VectorXd& y1, const VectorXd& y2, const VectorXd& drive);

  bool warm() const { return solved_; }
  const MheSolution& solution() const { return solution_; }
  const MheMatrices& matrices() const { return m_; }
  /// Disturbance block of zhat(k|k) (or of the delayed zhat(k-N|k)).
  VectorXd x3(bool propagated = true) const;

 private:
  MheMatrices m_;
  std::deque<VectorXd> y_;
  std::deque<VectorXd> uz_;
  VectorXd next_prior_;
  MheSolution solution_;
  bool solved_ = false;
};

}  // namespace drc::estimator
