#pragma once

#include <vector>

#include "drc/model/robot_model.hpp"
#include "drc/sim/gait.hpp"
#include "drc/trajopt/sqp.hpp"

namespace drc::trajopt {

/// User command for the nominal planner.
struct BaseCommand {
  Vector3d position{0.0, 0.0, 0.31};  // desired base position (xy ignored when moving)
  double yaw = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
};

/// Diagonal weights on x = [h, L, q] and u = [F, qdj]; costs are 0.5 w e^2
/// integrated over the horizon (terminal state not time-scaled).
struct OcpWeights {
  VectorXd Q_stage;
  VectorXd Q_terminal;
  VectorXd R;
  double swing_height = 5000.0;
  double mu = 0.7;
  double cone_smoothing = 1.0;  // N, keeps the cone differentiable at f_t = 0

  static OcpWeights defaults(const model::RobotModel& model);
};

struct Trajectory {
  enum class Tag { Nominal, Robust };
  Tag tag = Tag::Nominal;
  std::vector<double> t;
  std::vector<VectorXd> x;  // CentroidalState vectors
  std::vector<VectorXd> u;  // CentroidalInput vectors
  std::vector<model::StanceFlags> stance;
  int iterations = 0;
  bool converged = false;
  double defect_norm = 0.0;
  double equality_norm = 0.0;

  bool empty() const { return t.empty(); }
};

struct OcpProblem {
  const model::RobotModel* model = nullptr;
  double horizon = 1.0;
  int nodes = 50;
  double dt = 1.0 / 49.0;
  double t0 = 0.0;
  Trajectory::Tag tag = Trajectory::Tag::Nominal;
  std::vector<model::StanceFlags> stance;
  std::vector<std::vector<double>> swing_z;  // per node and foot, NaN in stance
  std::vector<VectorXd> x_ref, u_ref;
  OcpWeights weights;
  VectorXd dc;      // constant defect offset, zero for the nominal problem
  VectorXd x_meas;  // pinned initial state
  SqpSettings settings;
};

OcpProblem build_nominal_ocp(const model::RobotModel& model, const BaseCommand& goal,
                             const VectorXd& x_meas, double t0, const sim::GaitConfig& gait,
                             const OcpWeights& weights, double horizon = 1.0, int nodes = 50);

/// References come from the nominal trajectory; every defect carries dc dt.
OcpProblem build_robust_ocp(const model::RobotModel& model, const Trajectory& nominal,
                            const VectorXd& dc, const VectorXd& x_meas, double t0,
                            const sim::GaitConfig& gait, const OcpWeights& weights,
                            double horizon = 1.0, int nodes = 50);

/// Solves the problem; `warm_start` (if non-empty) is resampled onto the
/// new node times. `max_iterations` < 0 keeps the problem's setting.
Trajectory solve_ocp(const OcpProblem& problem, const Trajectory* warm_start = nullptr,
                     int max_iterations = -1);

struct TrajectorySample {
  VectorXd x, u;
  bool clamped = false;
};

/// Piecewise-linear interpolation; outside the knot range the end knot is
/// returned with `clamped` set.
TrajectorySample interpolate(const Trajectory& traj, double t);

/// Finite-difference rate of x over the knot interval containing t.
VectorXd trajectory_rate(const Trajectory& traj, double t);

/// Problem functions of the centroidal OCP, exposed for testing.
class CentroidalOcp : public OcpFunctions {
 public:
  explicit CentroidalOcp(const OcpProblem& p);
  int nodes() const override { return p_.nodes; }
  int nx() const override;
  int nu() const override;
  double dt() const override { return p_.dt; }
  void evaluate(int node, const VectorXd& x, const VectorXd& u, bool derivatives,
                NodeTerms& out) const override;
  VectorXd offset() const override;
  std::vector<bool> zero_inputs(int node) const override;

 private:
  const OcpProblem& p_;
};

}  // namespace drc::trajopt
