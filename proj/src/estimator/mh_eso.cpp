#include "drc/estimator/mh_eso.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace drc::estimator {

namespace {

MatrixXd kron_identity(const MatrixXd& a, int n) {
  MatrixXd out = MatrixXd::Zero(a.rows() * n, a.cols() * n);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) out.block(i * n, j * n, n, n).diagonal().setConstant(a(i, j));
  return out;
}

void check_weight(const MatrixXd& w, Eigen::Index dim, const char* name, bool allow_singular) {
  if (w.rows() != dim || w.cols() != dim)
    throw InvariantError(std::string("MHE gains: ") + name + " has the wrong dimension");
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvariantError(std::string("MHE gains: ") + name + " must be symmetric");
  const double lo = Eigen::SelfAdjointEigenSolver<MatrixXd>(w, Eigen::EigenvaluesOnly)
                        .eigenvalues()
                        .minCoeff();
  const double tol = 1e-12 * scale;
  if (allow_singular ? lo < -tol : lo <= tol)
    throw InvariantError(std::string("MHE gains: ") + name +
                         (allow_singular ? " must be positive semidefinite"
                                         : " must be positive definite"));
}

VectorXd stack(const std::vector<VectorXd>& parts, Eigen::Index each) {
  VectorXd out(static_cast<Eigen::Index>(parts.size()) * each);
  for (size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].size() != each) throw InvariantError("MHE window: sample has the wrong dimension");
    out.segment(static_cast<Eigen::Index>(i) * each, each) = parts[i];
  }
  return out;
}

void check_window(const MheMatrices& m, const MheWindow& win) {
  if (static_cast<int>(win.y.size()) != m.N + 1 || static_cast<int>(win.uz.size()) != m.N)
    throw InvariantError("MHE window: expected N+1 measurements and N inputs");
  if (win.prior.size() != m.nz()) throw InvariantError("MHE window: prior has the wrong dimension");
}

MheSolution finish(const MheMatrices& m, const MheWindow& win, const VectorXd& z0,
                   const VectorXd& wstack) {
  MheSolution s;
  s.z_start = z0;
  s.w = Eigen::Map<const MatrixXd>(wstack.data(), m.nz(), m.N);
  VectorXd z = z0;
  for (int i = 0; i < m.N; ++i) z = m.apply_a0(z) + win.uz[static_cast<size_t>(i)] + s.w.col(i);
  s.z_now = z;
  return s;
}

}  // namespace

MheGains MheGains::uniform(int block_dim, int N, double gamma, double lambda, double pi,
                           double ts) {
  MheGains g;
  const int nz = 3 * block_dim;
  g.Gamma = gamma * MatrixXd::Identity(nz, nz);
  g.Lambda = lambda * MatrixXd::Identity(N * nz, N * nz);
  g.Pi = pi;
  g.N = N;
  g.ts = ts;
  return g;
}

VectorXd MheMatrices::apply_a0(const VectorXd& z) const {
  const int n = block_dim;
  VectorXd out(3 * n);
  for (int r = 0; r < 3; ++r)
    out.segment(r * n, n) = a0(r, 0) * z.segment(0, n) + a0(r, 1) * z.segment(n, n) +
                            a0(r, 2) * z.segment(2 * n, n);
  return out;
}

VectorXd MheMatrices::input(const VectorXd& y1, const VectorXd& drive) const {
  const int n = block_dim;
  VectorXd u(3 * n);
  u << l0[0] * y1, ts * drive + l0[1] * y1, l0[2] * y1;
  return u;
}

MheMatrices mhe_matrices(int block_dim, const MheGains& gains, double omega0) {
  if (block_dim < 1) throw InvariantError("MHE: block dimension must be positive");
  if (gains.N < 1) throw InvariantError("MHE gains: horizon N must be at least 1");
  if (!(gains.ts > 0.0)) throw InvariantError("MHE gains: sampling period must be positive");
  if (!(gains.Pi >= 0.0)) throw InvariantError("MHE gains: Pi must be non-negative");
  if (!(omega0 >= 0.0)) throw InvariantError("MHE: omega0 must be non-negative");
  const int nb = block_dim, N = gains.N, nz = 3 * nb;
  check_weight(gains.Gamma, nz, "Gamma", true);
  check_weight(gains.Lambda, N * nz, "Lambda", false);

  MheMatrices m;
  m.block_dim = nb;
  m.N = N;
  m.ts = gains.ts;
  m.omega0 = omega0;
  m.gains = gains;

  const double ts = gains.ts;
  m.a0_bar << 1, ts, 0, 0, 1, ts, 0, 0, 1;
  m.l0 << 3 * omega0 * ts, 3 * omega0 * omega0 * ts, omega0 * omega0 * omega0 * ts;
  const Eigen::RowVector3d c_obs(1, 0, 0);
  m.a0 = m.a0_bar - m.l0 * c_obs;
  Eigen::Matrix<double, 2, 3> c_meas;
  c_meas << 1, 0, 0, 0, 1, 0;

  // Scalar patterns of F_N and H_N.
  std::vector<Eigen::Matrix3d> pow(static_cast<size_t>(N + 1));
  pow[0].setIdentity();
  for (int i = 1; i <= N; ++i) pow[static_cast<size_t>(i)] = m.a0 * pow[static_cast<size_t>(i - 1)];
  MatrixXd f = MatrixXd::Zero(2 * (N + 1), 3);
  MatrixXd h = MatrixXd::Zero(2 * (N + 1), 3 * N);
  for (int i = 0; i <= N; ++i) {
    f.block<2, 3>(2 * i, 0) = c_meas * pow[static_cast<size_t>(i)];
    for (int j = 0; j < i; ++j) h.block<2, 3>(2 * i, 3 * j) = c_meas * pow[static_cast<size_t>(i - 1 - j)];
  }

  m.A0_bar = kron_identity(m.a0_bar, nb);
  m.A0 = kron_identity(m.a0, nb);
  m.B0 = kron_identity(Eigen::Vector3d(0, ts, 0), nb);
  m.L0 = kron_identity(m.l0, nb);
  m.C_obs = kron_identity(c_obs, nb);
  m.C_meas = kron_identity(c_meas, nb);
  m.F_N = kron_identity(f, nb);
  m.H_N = kron_identity(h, nb);
  m.F_N_sparse = m.F_N.sparseView();
  m.H_N_sparse = m.H_N.sparseView();

  const double pi = gains.Pi;
  const MatrixXd FtF = kron_identity(f.transpose() * f, nb);
  const MatrixXd FtH = kron_identity(f.transpose() * h, nb);
  const MatrixXd HtH = kron_identity(h.transpose() * h, nb);

  m.M3 = gains.Lambda + pi * HtH;
  const Eigen::LLT<MatrixXd> m3(m.M3);
  if (m3.info() != Eigen::Success) throw SolverError("MHE: M3 is not positive definite");
  const MatrixXd Y = m3.solve(FtH.transpose());  // M3^-1 H^T F
  m.M1 = pi * FtF - pi * pi * FtH * Y;
  m.M2 = pi * m.F_N.transpose() - pi * pi * Y.transpose() * m.H_N.transpose();

  MatrixXd n1(nz + N * nz, nz + N * nz);
  n1 << gains.Gamma + pi * FtF, pi * FtH, pi * FtH.transpose(), m.M3;
  m.N1 = n1.sparseView();
  m.N1.makeCompressed();
  m.N1_lu = std::make_shared<Eigen::SparseLU<SparseMatrix>>();
  m.N1_lu->analyzePattern(m.N1);
  m.N1_lu->factorize(m.N1);
  if (m.N1_lu->info() != Eigen::Success)
    throw SolverError("MHE: N1 is singular (ill-conditioned gains)");
  return m;
}

MheSolution mhe_solve(const MheMatrices& m, const MheWindow& win) {
  check_window(m, win);
  const double pi = m.gains.Pi;
  const VectorXd y = stack(win.y, m.ny());
  const VectorXd u = stack(win.uz, m.nz());
  const VectorXd r = y - m.H_N_sparse * u;
  VectorXd n2(m.nz() * (m.N + 1));
  n2.head(m.nz()) = pi * (m.F_N_sparse.transpose() * r) + m.gains.Gamma * win.prior;
  n2.tail(m.nz() * m.N) = pi * (m.H_N_sparse.transpose() * r);
  const VectorXd d = m.N1_lu->solve(n2);
  if (m.N1_lu->info() != Eigen::Success) throw SolverError("MHE: sparse solve failed");
  return finish(m, win, d.head(m.nz()), d.tail(m.nz() * m.N));
}

MheSolution mhe_solve_closed_form(const MheMatrices& m, const MheWindow& win) {
  check_window(m, win);
  const double pi = m.gains.Pi;
  const VectorXd y = stack(win.y, m.ny());
  const VectorXd u = stack(win.uz, m.nz());
  const MatrixXd& G = m.gains.Gamma;
  const VectorXd z0 = (G + m.M1).partialPivLu().solve(m.M2 * y + G * win.prior - m.M2 * m.H_N * u);
  const VectorXd w =
      m.M3.llt().solve(pi * m.H_N.transpose() * (y - m.F_N * z0 - m.H_N * u));
  return finish(m, win, z0, w);
}

MheSolution mhe_oracle(const MheMatrices& m, const MheWindow& win) {
  check_window(m, win);
  const int nz = m.nz(), N = m.N;
  if (nz * (2 * N + 1) > 2000) throw InvariantError("MHE oracle: dimensions too large");
  const double pi = m.gains.Pi;
  const int nzs = nz * (N + 1), nw = nz * N, nx = nzs + nw, nc = nz * N;

  MatrixXd H = MatrixXd::Zero(nx, nx);
  VectorXd g = VectorXd::Zero(nx);
  H.topLeftCorner(nz, nz) = m.gains.Gamma;
  g.head(nz) = m.gains.Gamma * win.prior;
  const MatrixXd CtC = m.C_meas.transpose() * m.C_meas;
  for (int i = 0; i <= N; ++i) {
    H.block(i * nz, i * nz, nz, nz) += pi * CtC;
    g.segment(i * nz, nz) += pi * m.C_meas.transpose() * win.y[static_cast<size_t>(i)];
  }
  H.bottomRightCorner(nw, nw) = m.gains.Lambda;

  // z(i+1) - A0 z(i) - w(i) = u_z(i)
  MatrixXd E = MatrixXd::Zero(nc, nx);
  VectorXd e(nc);
  for (int i = 0; i < N; ++i) {
    E.block(i * nz, (i + 1) * nz, nz, nz).setIdentity();
    E.block(i * nz, i * nz, nz, nz) = -m.A0;
    E.block(i * nz, nzs + i * nz, nz, nz) = -MatrixXd::Identity(nz, nz);
    e.segment(i * nz, nz) = win.uz[static_cast<size_t>(i)];
  }

  MatrixXd K = MatrixXd::Zero(nx + nc, nx + nc);
  K.topLeftCorner(nx, nx) = H;
  K.topRightCorner(nx, nc) = E.transpose();
  K.bottomLeftCorner(nc, nx) = E;
  VectorXd rhs(nx + nc);
  rhs << g, e;
  const Eigen::FullPivLU<MatrixXd> lu(K);
  if (!lu.isInvertible()) throw SolverError("MHE oracle: KKT system is singular");
  const VectorXd sol = lu.solve(rhs);
  MheSolution s;
  s.z_start = sol.head(nz);
  s.w = Eigen::Map<const MatrixXd>(sol.data() + nzs, nz, N);
  s.z_now = sol.segment(N * nz, nz);
  return s;
}

VectorXd mhe_predict(const MheMatrices& m, const MheSolution& prev, const VectorXd& uz_first) {
  return m.apply_a0(prev.z_start) + uz_first + prev.w.col(0);
}

MhEso::MhEso(int block_dim, const MheGains& gains, double omega0)
    : MhEso(mhe_matrices(block_dim, gains, omega0)) {}

MhEso::MhEso(MheMatrices matrices) : m_(std::move(matrices)) {}

bool MhEso::step(const VectorXd& y1, const VectorXd& y2, const VectorXd& drive) {
  const int nb = m_.block_dim;
  if (y1.size() != nb || y2.size() != nb || drive.size() != nb)
    throw InvariantError("MH-ESO: sample has the wrong dimension");
  VectorXd y(2 * nb);
  y << y1, y2;
  y_.push_back(y);
  uz_.push_back(m_.input(y1, drive));
  if (static_cast<int>(y_.size()) > m_.N + 1) {
    y_.pop_front();
    uz_.pop_front();
  }
  if (static_cast<int>(y_.size()) < m_.N + 1) return false;

  MheWindow win;
  win.y.assign(y_.begin(), y_.end());
  win.uz.assign(uz_.begin(), uz_.end() - 1);
  if (solved_) {
    win.prior = next_prior_;
  } else {
    win.prior = VectorXd::Zero(3 * nb);
    win.prior.head(2 * nb) = y_.front();
  }
  solution_ = mhe_solve(m_, win);
  next_prior_ = mhe_predict(m_, solution_, win.uz.front());
  solved_ = true;
  return true;
}

VectorXd MhEso::x3(bool propagated) const {
  const int nb = m_.block_dim;
  if (!solved_) return VectorXd::Zero(nb);
  return (propagated ? solution_.z_now : solution_.z_start).tail(nb);
}

}  // namespace drc::estimator
