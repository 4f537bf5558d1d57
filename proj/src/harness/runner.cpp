#include "drc/harness/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <random>

#include <json.hpp>

#include "drc/estimator/eso.hpp"
#include "drc/estimator/mh_eso.hpp"
#include "drc/model/centroidal.hpp"
#include "drc/sigproc/filters.hpp"
#include "drc/sim/simulator.hpp"
#include "drc/trajopt/centroidal_ocp.hpp"
#include "drc/trajopt/references.hpp"
#include "drc/wbc/wbc.hpp"

namespace drc::harness {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

class CsvWriter {
 public:
  CsvWriter() = default;
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw Error("cannot write '" + path + "'");
    for (size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }
  bool open() const { return out_.is_open(); }
  void row(const std::vector<double>& values) {
    char buf[40];
    for (size_t i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", values[i]);
      if (i) out_ << ',';
      out_ << buf;
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

struct Coordinate {
  std::string name, pos_unit, vel_unit, force_unit;
};

std::vector<Coordinate> coordinates(const model::RobotModel& m) {
  std::vector<Coordinate> c{{"base_x", "m", "m/s", "N"},       {"base_y", "m", "m/s", "N"},
                            {"base_z", "m", "m/s", "N"},       {"yaw", "rad", "rad/s", "N*m"},
                            {"pitch", "rad", "rad/s", "N*m"},  {"roll", "rad", "rad/s", "N*m"}};
  for (int j = 0; j < m.num_joints(); ++j)
    c.push_back({m.body(m.joint_body(j)).name, "rad", "rad/s", "N*m"});
  return c;
}

void append(std::vector<double>& row, const VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v[i]);
}

/// Linear interpolation of per-knot vectors.
VectorXd sample_knots(const std::vector<double>& t, const std::vector<VectorXd>& v, double at) {
  if (at <= t.front()) return v.front();
  if (at >= t.back()) return v.back();
  const auto it = std::upper_bound(t.begin(), t.end(), at);
  const auto i = static_cast<size_t>(it - t.begin()) - 1;
  const double a = (at - t[i]) / (t[i + 1] - t[i]);
  return (1.0 - a) * v[i] + a * v[i + 1];
}

struct Plan {
  trajopt::Trajectory traj;
  trajopt::ReferenceKnots knots;
  bool empty() const { return traj.empty(); }
};

struct CsvSet {
  CsvWriter truth, estimator, mpc, wbc;
};

CsvSet open_csvs(const std::string& dir, const model::RobotModel& m) {
  std::filesystem::create_directories(dir);
  const auto coords = coordinates(m);
  const int nf = m.num_feet();
  auto path = [&](const std::string& f) { return (std::filesystem::path(dir) / f).string(); };
  CsvSet s;

  std::vector<std::string> h{"t[s]"};
  for (const auto& c : coords) h.push_back("q_" + c.name + "[" + c.pos_unit + "]");
  for (const auto& c : coords) h.push_back("qd_" + c.name + "[" + c.vel_unit + "]");
  for (int f = 0; f < nf; ++f)
    for (const char* ax : {"x", "y", "z"}) h.push_back("F_" + m.feet()[static_cast<size_t>(f)].name + "_" + ax + "[N]");
  s.truth = CsvWriter(path("truth.csv"), h);

  h = {"t[s]"};
  for (const auto& c : coords) h.push_back("fhat_" + c.name + "[" + c.force_unit + "]");
  h.push_back("fhat_norm[1]");
  for (const auto& c : coords) h.push_back("fproc_" + c.name + "[" + c.force_unit + "]");
  h.push_back("fproc_norm[1]");
  for (const char* ax : {"hx", "hy", "hz"}) h.push_back(std::string("dc_") + ax + "[N]");
  for (const char* ax : {"Lx", "Ly", "Lz"}) h.push_back(std::string("dc_") + ax + "[N*m]");
  for (const auto& c : coords) h.push_back("dc_" + c.name + "[" + c.vel_unit + "]");
  h.push_back("shadow_fhat_norm[1]");
  s.estimator = CsvWriter(path("estimator.csv"), h);

  s.mpc = CsvWriter(path("mpc.csv"), {"t[s]", "level[1]", "iterations[1]", "converged[1]",
                                      "defect[1]", "equality[1]", "sum_Fz0[N]"});

  h = {"t[s]"};
  for (const auto& f : m.feet()) h.push_back("stance_" + f.name + "[1]");
  for (const auto& c : coords) h.push_back("qm_" + c.name + "[" + c.pos_unit + "]");
  for (const auto& c : coords) h.push_back("qdm_" + c.name + "[" + c.vel_unit + "]");
  for (const auto& c : coords) h.push_back("qdd_" + c.name + "[" + c.vel_unit + "/s]");
  for (int f = 0; f < nf; ++f)
    for (const char* ax : {"x", "y", "z"}) h.push_back("Fd_" + m.feet()[static_cast<size_t>(f)].name + "_" + ax + "[N]");
  for (int j = 0; j < m.num_joints(); ++j) h.push_back("tau_" + coords[static_cast<size_t>(6 + j)].name + "[N*m]");
  for (int j = 0; j < m.num_joints(); ++j) h.push_back("u_" + coords[static_cast<size_t>(6 + j)].name + "[N*m]");
  for (const auto& c : coords) h.push_back("fproc_" + c.name + "[" + c.force_unit + "]");
  h.push_back("dyn_residual[1]");
  for (const char* r : {"res_p1[1]", "res_p2[1]", "res_p3[1]", "activations[1]"}) h.push_back(r);
  for (const auto& c : coords) h.push_back("qref_" + c.name + "[" + c.pos_unit + "]");
  for (const auto& c : coords) h.push_back("qdref_" + c.name + "[" + c.vel_unit + "]");
  s.wbc = CsvWriter(path("wbc.csv"), h);
  return s;
}

void write_metrics_json(const std::string& dir, const ScenarioConfig& c, const RunResult& r) {
  using nlohmann::json;
  auto timing = [](const StageTiming& s) {
    return json{{"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}, {"samples", s.samples}};
  };
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  const MetricsReport& m = r.metrics;
  json j{{"variant", variant_name(c.variant)},
         {"estimator", estimator_name(c.estimator)},
         {"seed", c.seed},
         {"status", r.status == RunStatus::Ok ? "ok" : r.status == RunStatus::SolverFailure ? "solver failure" : "diverged"},
         {"failure", r.failure},
         {"height_rmse_m", m.height_rmse},
         {"roll_rmse_rad", m.roll_rmse},
         {"max_height_error_m", m.max_height_error},
         {"fell", m.fell},
         {"fall_time_s", m.fall_time},
         {"fhat_mean", m.fhat_mean},
         {"fhat_mse", num(m.fhat.mse)},
         {"fhat_var", m.fhat.var},
         {"shadow_estimator", estimator_name(c.shadow_estimator)},
         {"shadow_fhat_mse", num(m.shadow_fhat.mse)},
         {"shadow_fhat_var", m.shadow_fhat.var},
         {"max_fprocess_norm", m.max_fprocess_norm},
         {"max_dynamics_residual", m.max_dynamics_residual},
         {"swing_forces_zero", m.swing_forces_zero},
         {"timing", {{"nominal_mpc", timing(m.nominal_mpc)}, {"robust_mpc", timing(m.robust_mpc)},
                     {"estimator", timing(m.estimator)}, {"wbc", timing(m.wbc)}}}};
  std::ofstream((std::filesystem::path(dir) / "metrics.json").string()) << j.dump(2) << "\n";
}

/// One disturbance estimator fed at its own rate.
class EstimatorUnit {
 public:
  EstimatorUnit(EstimatorKind kind, const ScenarioConfig& c, int nv, double dt)
      : kind_(kind), omega0_(c.omega0), dt_(dt), x3_(VectorXd::Zero(nv)) {
    if (kind == EstimatorKind::MhEso)
      mh_ = std::make_unique<estimator::MhEso>(
          nv, estimator::MheGains::uniform(nv, c.mhe_N, c.mhe_gamma, c.mhe_lambda, c.mhe_pi, dt), c.omega0);
  }
  bool active() const { return kind_ != EstimatorKind::None; }

  /// Returns the generalized uncertainty estimate D(y1) x3.
  VectorXd step(const model::RobotModel& m, const sim::Measurement& y, const VectorXd& drive) {
    if (kind_ == EstimatorKind::Eso) {
      eso_ = started_ ? estimator::eso_step(eso_, y.y1, drive, dt_)
                      : estimator::EsoState::from_measurement(y.y1, y.y2, omega0_);
      x3_ = eso_.x3;
    } else if (mh_->step(y.y1, y.y2, drive)) {
      x3_ = mh_->x3(true);
    }
    started_ = true;
    return estimator::eso_uncertainty(m, y.y1, x3_);
  }

 private:
  EstimatorKind kind_;
  double omega0_, dt_;
  VectorXd x3_;
  estimator::EsoState eso_;
  std::unique_ptr<estimator::MhEso> mh_;
  bool started_ = false;
};

int divider(double rate) { return static_cast<int>(std::lround(1000.0 / rate)); }

}  // namespace

StageTiming summarize_timing(std::vector<double> ms) {
  StageTiming s;
  s.samples = static_cast<int>(ms.size());
  if (ms.empty()) return s;
  std::sort(ms.begin(), ms.end());
  s.median_ms = ms[ms.size() / 2];
  s.p95_ms = ms[std::min(ms.size() - 1, static_cast<size_t>(0.95 * static_cast<double>(ms.size())))];
  return s;
}

NoiseStats noise_stats(const std::vector<double>& noisy, const std::vector<double>& noise_free) {
  NoiseStats s;
  if (noisy.empty()) return s;
  double rho = 0.0;
  for (double y : noisy) rho += y;
  rho /= static_cast<double>(noisy.size());
  for (double y : noisy) s.var += (y - rho) * (y - rho);
  s.var /= static_cast<double>(noisy.size());
  if (noise_free.empty()) {
    s.mse = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double ybar = 0.0;
  for (double y : noise_free) ybar += y;
  ybar /= static_cast<double>(noise_free.size());
  for (double y : noisy) s.mse += (y - ybar) * (y - ybar);
  s.mse /= static_cast<double>(noisy.size());
  return s;
}

double rmse(const std::vector<double>& values, double target) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += (v - target) * (v - target);
  return std::sqrt(s / static_cast<double>(values.size()));
}

MetricsReport compute_metrics(const ScenarioConfig& c, const Traces& tr) {
  MetricsReport m;
  const double dt = 1e-3;
  const auto total = static_cast<size_t>(std::llround(c.duration / dt));
  std::vector<double> height, roll, fhat, shadow;
  double last_h = c.height, last_r = 0.0;
  for (size_t k = 0; k < total; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k < tr.t.size()) {
      last_h = tr.height[k];
      last_r = tr.roll[k];
      m.max_fprocess_norm = std::max(m.max_fprocess_norm, tr.fprocess_norm[k]);
      if (last_h < c.fall_height && !m.fell) {
        m.fell = true;
        m.fall_time = t;
      }
    }
    if (t + 1e-12 < c.warmup) continue;
    height.push_back(last_h);
    roll.push_back(last_r);
    m.max_height_error = std::max(m.max_height_error, std::abs(last_h - c.height));
    if (k < tr.t.size()) {
      fhat.push_back(tr.fhat_norm[k]);
      shadow.push_back(tr.shadow_norm[k]);
    }
  }
  m.height_rmse = rmse(height, c.height);
  m.roll_rmse = rmse(roll, 0.0);
  m.fhat = noise_stats(fhat, {});
  m.shadow_fhat = noise_stats(shadow, {});
  for (double v : fhat) m.fhat_mean += v;
  if (!fhat.empty()) m.fhat_mean /= static_cast<double>(fhat.size());
  return m;
}

RunResult run_scenario(const ScenarioConfig& config) {
  const model::RobotModel m = model::load_model(config.model_file);
  return run_scenario(config, m);
}

RunResult run_scenario(const ScenarioConfig& config_in, const model::RobotModel& m) {
  const ScenarioConfig cfg = config_in.effective();
  cfg.validate(m);
  const bool robust_on = cfg.variant == Variant::TWbDrc;
  const int nv = m.nv(), n = m.num_joints(), nf = m.num_feet();
  const double dt = 1e-3;
  const long ticks = std::lround(cfg.duration / dt);
  const int div_high = divider(cfg.rates.high), div_robust = divider(cfg.rates.robust);
  const int div_est = divider(cfg.rates.estimator), div_low = divider(cfg.rates.low);

  const sim::Simulator simulator(m, cfg.disturbance_spec(m));
  const sim::StandingStart start = sim::standing_start(m, simulator.contact(), m.nominal_posture(), 0.0, cfg.seed);
  sim::WorldState world = start.world;

  trajopt::OcpWeights weights = trajopt::OcpWeights::defaults(m);
  weights.mu = cfg.mu;
  trajopt::BaseCommand goal;
  goal.position = Vector3d(0.0, 0.0, cfg.height);
  if (cfg.gait.kind == sim::GaitKind::Trot) goal.velocity = Eigen::Vector2d(cfg.gait.forward_speed, 0.0);

  // Estimation chain.
  const double est_dt = 1.0 / cfg.rates.estimator;
  EstimatorUnit primary(cfg.estimator, cfg, nv, est_dt), shadow(cfg.shadow_estimator, cfg, nv, est_dt);
  sigproc::FilterChain chain(cfg.filters, est_dt);

  VectorXd fhat = VectorXd::Zero(nv), fshadow = VectorXd::Zero(nv), fproc = VectorXd::Zero(nv), dc = VectorXd::Zero(6 + nv);
  VectorXd u_d = start.tau;
  const VectorXd limit = m.torque_limits();

  Plan nominal, robust;
  std::vector<double> t_nom, t_rob, t_est, t_wbc;

  CsvSet csv;
  if (!cfg.output.empty()) csv = open_csvs(cfg.output, m);

  RunResult result;
  Traces& tr = result.traces;
  double max_dyn = 0.0;
  bool swing_zero = true;
  bool flipped = false;  // trunk rotated into the gimbal guard: counts as a fall

  try {
    for (long k = 0; k < ticks; ++k) {
      const double t = static_cast<double>(k) * dt;
      const sim::Measurement meas = simulator.measure(world);
      const bool noisy_ctrl = cfg.noise_target == NoiseTarget::All;
      const VectorXd& q = noisy_ctrl ? meas.y1 : world.truth.q;
      const VectorXd& qd = noisy_ctrl ? meas.y2 : world.truth.qd;
      const sim::GaitPhase phase = sim::gait_flags(cfg.gait, t, nf);
      const bool log_row = k % cfg.log_every == 0;

      // Nominal MPC.
      if (k % div_high == 0) {
        const auto t0 = Clock::now();
        const VectorXd x_meas = model::centroidal_state(m, q, qd).to_vector();
        const auto p = trajopt::build_nominal_ocp(m, goal, x_meas, t, cfg.gait, weights,
                                                  cfg.mpc_horizon, cfg.mpc_nodes);
        nominal.traj = trajopt::solve_ocp(p, nominal.empty() ? nullptr : &nominal.traj,
                                          nominal.empty() ? -1 : cfg.mpc_iterations);
        if (!robust_on) nominal.knots = trajopt::reconstruct_references(m, nominal.traj);
        t_nom.push_back(elapsed_ms(t0));
        if (csv.mpc.open()) {
          double fz = 0.0;
          for (int f = 0; f < nf; ++f) fz += nominal.traj.u[0][3 * f + 2];
          csv.mpc.row({t, 0.0, double(nominal.traj.iterations), double(nominal.traj.converged),
                       nominal.traj.defect_norm, nominal.traj.equality_norm, fz});
        }
      }

      // Contact forces of the disturbance-free plan. Both the estimator and
      // d_c take these as the known force input: the plan is what the model
      // expects without uncertainty, and feeding back forces that already
      // contain the compensation would make the estimate self-sustaining.
      VectorXd F_nom = trajopt::interpolate(nominal.traj, t).u.head(3 * nf);
      for (int f = 0; f < nf; ++f)
        if (!phase.stance[static_cast<size_t>(f)]) F_nom.segment<3>(3 * f).setZero();

      // Disturbance estimation and processing.
      if ((primary.active() || shadow.active()) && k % div_est == 0) {
        const auto t0 = Clock::now();
        VectorXd u_hat(n + 3 * nf);
        u_hat << u_d, F_nom;
        const VectorXd drive = estimator::eso_drive(m, meas.y1, meas.y2, u_hat);
        if (primary.active()) {
          fhat = primary.step(m, meas, drive);
          fproc = chain.step(fhat);
          t_est.push_back(elapsed_ms(t0));
        }
        // Observes the same stream but never reaches the controller.
        if (shadow.active()) fshadow = shadow.step(m, meas, drive);
      }

      // Robust MPC around the nominal plan.
      if (robust_on && k % div_robust == 0) {
        const auto t0 = Clock::now();
        dc = trajopt::estimate_dc(m, q, qd, u_d, F_nom, fproc, trajopt::trajectory_rate(nominal.traj, t)).dc;
        // The measured state already seeds the robust problem, so a velocity
        // mismatch would be counted twice; by default only momentum rates are kept.
        if (!cfg.dc_velocity) dc.tail(nv).setZero();
        const VectorXd x_meas = model::centroidal_state(m, q, qd).to_vector();
        const auto p = trajopt::build_robust_ocp(m, nominal.traj, dc, x_meas, t, cfg.gait, weights,
                                                 cfg.mpc_horizon, cfg.mpc_nodes);
        robust.traj = trajopt::solve_ocp(p, robust.empty() ? &nominal.traj : &robust.traj, cfg.mpc_iterations);
        robust.knots = trajopt::reconstruct_references(m, robust.traj);
        t_rob.push_back(elapsed_ms(t0));
        if (csv.mpc.open()) {
          double fz = 0.0;
          for (int f = 0; f < nf; ++f) fz += robust.traj.u[0][3 * f + 2];
          csv.mpc.row({t, 1.0, double(robust.traj.iterations), double(robust.traj.converged),
                       robust.traj.defect_norm, robust.traj.equality_norm, fz});
        }
      }

      // Whole-body control and PD.
      if (k % div_low == 0) {
        const auto t0 = Clock::now();
        const Plan& plan = robust_on ? robust : nominal;
        const trajopt::TrajectorySample s = trajopt::interpolate(plan.traj, t);
        wbc::WbcInput in;
        in.q = q;
        in.qd = qd;
        in.stance = phase.stance;
        const VectorXd q_ref = s.x.tail(nv);
        const VectorXd qd_ref = sample_knots(plan.traj.t, plan.knots.qd, t);
        in.qdd_ref = sample_knots(plan.traj.t, plan.knots.qdd, t) + cfg.task_kp * (q_ref - q) +
                     cfg.task_kd * (qd_ref - qd);
        in.F_ref = s.u.head(3 * nf);
        for (int f = 0; f < nf; ++f)
          if (!phase.stance[static_cast<size_t>(f)]) in.F_ref.segment<3>(3 * f).setZero();
        in.f_process = fproc;
        in.mu = cfg.mu;
        const wbc::WbcSolution sol = wbc::solve_wbc(m, in);
        u_d = wbc::pd_torque(sol.tau, q_ref.tail(n), qd_ref.tail(n), q.tail(n), qd.tail(n),
                             VectorXd::Constant(n, cfg.kp), VectorXd::Constant(n, cfg.kd), -limit, limit);
        t_wbc.push_back(elapsed_ms(t0));

        // Priority-one audit of this tick.
        VectorXd rhs = model::bias_forces(m, q, qd) - fproc;
        rhs.tail(n) -= sol.tau;
        const double dyn = (model::mass_matrix(m, q) * sol.qdd + rhs -
                            model::contact_jacobian(m, q, model::StanceFlags(static_cast<size_t>(nf), true)).transpose() * sol.F)
                               .cwiseAbs()
                               .maxCoeff();
        max_dyn = std::max(max_dyn, dyn);
        for (int f = 0; f < nf; ++f)
          if (!phase.stance[static_cast<size_t>(f)] && !sol.F.segment<3>(3 * f).isZero(0.0)) swing_zero = false;

        if (csv.wbc.open() && log_row) {
          std::vector<double> row{t};
          for (bool st : phase.stance) row.push_back(st ? 1.0 : 0.0);
          append(row, q);
          append(row, qd);
          append(row, sol.qdd);
          append(row, sol.F);
          append(row, sol.tau);
          append(row, u_d);
          append(row, fproc);
          row.push_back(dyn);
          for (double r : sol.residuals) row.push_back(r);
          row.push_back(sol.activations);
          append(row, q_ref);
          append(row, qd_ref);
          csv.wbc.row(row);
        }
      }

      // Traces and logs of the state this tick acted on.
      tr.t.push_back(t);
      tr.height.push_back(world.truth.q[2]);
      tr.roll.push_back(world.truth.q[5]);
      tr.fhat_norm.push_back(fhat.norm());
      tr.shadow_norm.push_back(fshadow.norm());
      tr.fprocess_norm.push_back(fproc.norm());
      tr.dc_norm.push_back(dc.norm());
      if (log_row && csv.truth.open()) {
        std::vector<double> row{t};
        append(row, world.truth.q);
        append(row, world.truth.qd);
        for (const auto& f : world.contact_force) append(row, f);
        csv.truth.row(row);
        row = {t};
        append(row, fhat);
        row.push_back(fhat.norm());
        append(row, fproc);
        row.push_back(fproc.norm());
        append(row, dc);
        row.push_back(fshadow.norm());
        csv.estimator.row(row);
      }
      if (world.truth.q[2] < cfg.fall_height) break;

      world = simulator.step(world, u_d, dt);
    }
  } catch (const DivergenceError& e) {
    result.status = RunStatus::Diverged;
    result.failure = e.what();
  } catch (const GimbalLockError& e) {
    result.status = RunStatus::Diverged;
    result.failure = e.what();
    flipped = true;
  } catch (const SolverError& e) {
    result.status = RunStatus::SolverFailure;
    result.failure = e.what();
  }

  result.metrics = compute_metrics(cfg, tr);
  if (flipped && !result.metrics.fell) {
    result.metrics.fell = true;
    result.metrics.fall_time = tr.t.empty() ? 0.0 : tr.t.back();
  }
  result.metrics.max_dynamics_residual = max_dyn;
  result.metrics.swing_forces_zero = swing_zero;
  result.metrics.nominal_mpc = summarize_timing(t_nom);
  result.metrics.robust_mpc = summarize_timing(t_rob);
  result.metrics.estimator = summarize_timing(t_est);
  result.metrics.wbc = summarize_timing(t_wbc);
  if (!cfg.output.empty()) {
    csv = CsvSet{};  // flush and close before the summary
    write_metrics_json(cfg.output, cfg, result);
  }
  return result;
}

NoiseComparison compare_noise(const ScenarioConfig& config, const model::RobotModel& model) {
  NoiseComparison out;
  ScenarioConfig noisy = config, clean = config;
  clean.noise = {};
  if (!config.output.empty()) {
    noisy.output = (std::filesystem::path(config.output) / "noisy").string();
    clean.output = (std::filesystem::path(config.output) / "clean").string();
  }
  out.clean = run_scenario(clean, model);
  out.noisy = run_scenario(noisy, model);
  const ScenarioConfig eff = config.effective();
  auto window = [&](const Traces& tr, const std::vector<double>& y) {
    std::vector<double> v;
    for (size_t k = 0; k < tr.t.size(); ++k)
      if (tr.t[k] + 1e-12 >= eff.warmup) v.push_back(y[k]);
    return v;
  };
  out.noisy.metrics.fhat = noise_stats(window(out.noisy.traces, out.noisy.traces.fhat_norm),
                                       window(out.clean.traces, out.clean.traces.fhat_norm));
  if (eff.shadow_estimator != EstimatorKind::None)
    out.noisy.metrics.shadow_fhat = noise_stats(window(out.noisy.traces, out.noisy.traces.shadow_norm),
                                                window(out.clean.traces, out.clean.traces.shadow_norm));
  if (!noisy.output.empty()) write_metrics_json(noisy.output, eff, out.noisy);
  return out;
}

WbcLogCheck check_wbc_log(const std::string& dir, const model::RobotModel& m, double mu) {
  std::ifstream in((std::filesystem::path(dir) / "wbc.csv").string());
  if (!in) throw Error("cannot open wbc.csv in '" + dir + "'");
  const int nv = m.nv(), n = m.num_joints(), nf = m.num_feet();
  std::string line;
  std::getline(in, line);
  WbcLogCheck c;
  const auto C = wbc::friction_pyramid(mu);
  const VectorXd limit = m.torque_limits();
  const model::StanceFlags all(static_cast<size_t>(nf), true);
  while (std::getline(in, line)) {
    std::vector<double> v;
    size_t pos = 0;
    while (pos <= line.size()) {
      const size_t comma = line.find(',', pos);
      v.push_back(std::stod(line.substr(pos, comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    size_t i = 1;
    auto take = [&](int len) {
      VectorXd x = Eigen::Map<const VectorXd>(v.data() + i, len);
      i += static_cast<size_t>(len);
      return x;
    };
    const VectorXd stance = take(nf), q = take(nv), qd = take(nv), qdd = take(nv), F = take(3 * nf),
                   tau = take(n);
    take(n);  // PD output
    const VectorXd fproc = take(nv);
    VectorXd r = model::mass_matrix(m, q) * qdd + model::bias_forces(m, q, qd) - fproc -
                 model::contact_jacobian(m, q, all).transpose() * F;
    r.tail(n) -= tau;
    c.max_dynamics_residual = std::max(c.max_dynamics_residual, r.cwiseAbs().maxCoeff());
    for (int f = 0; f < nf; ++f) {
      const Vector3d ff = F.segment<3>(3 * f);
      if (stance[f] > 0.5)
        c.max_friction_violation = std::max(c.max_friction_violation, (C * ff).maxCoeff());
      else if (!ff.isZero(0.0))
        c.swing_forces_zero = false;
    }
    c.max_torque_violation =
        std::max(c.max_torque_violation, (tau.cwiseAbs() - limit).maxCoeff());
    ++c.rows;
  }
  return c;
}

std::vector<BenchRow> bench_mhe(int block_dim, const std::vector<int>& Ns, int steps, int repeats) {
  std::vector<BenchRow> rows;
  for (int N : Ns) {
    estimator::MhEso mh(block_dim, estimator::MheGains::uniform(block_dim, N, 10.0, 1.0, 0.01), 200.0);
    std::mt19937_64 rng(static_cast<std::uint64_t>(N));
    std::normal_distribution<double> noise(0.0, 0.03);
    auto sample = [&]() {
      VectorXd v(block_dim);
      for (int i = 0; i < block_dim; ++i) v[i] = noise(rng);
      return v;
    };
    // Warm the window and caches before timing.
    for (int k = 0; k <= N + 5; ++k) mh.step(sample(), sample(), sample());
    std::vector<double> medians, all;
    for (int r = 0; r < repeats; ++r) {
      std::vector<double> ms;
      for (int k = 0; k < steps; ++k) {
        const VectorXd y1 = sample(), y2 = sample(), drive = sample();
        const auto t0 = Clock::now();
        mh.step(y1, y2, drive);
        ms.push_back(elapsed_ms(t0));
      }
      all.insert(all.end(), ms.begin(), ms.end());
      medians.push_back(summarize_timing(ms).median_ms);
    }
    BenchRow row;
    row.N = N;
    row.timing = summarize_timing(all);
    const auto [lo, hi] = std::minmax_element(medians.begin(), medians.end());
    row.spread = row.timing.median_ms > 0.0 ? (*hi - *lo) / row.timing.median_ms : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace drc::harness
