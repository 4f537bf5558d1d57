#pragma once

#include <string>
#include <vector>

#include "drc/harness/scenario.hpp"
#include "drc/model/robot_model.hpp"

namespace drc::harness {

struct StageTiming {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  int samples = 0;
};

StageTiming summarize_timing(std::vector<double> ms);

/// Noise statistics of the estimate norm over the metrics window.
struct NoiseStats {
  double mse = 0.0;  // mean (y_i - mean(noise-free))^2
  double var = 0.0;  // mean (y_i - mean(y))^2
};

/// `noise_free` may be empty, in which case mse is NaN.
NoiseStats noise_stats(const std::vector<double>& noisy, const std::vector<double>& noise_free);

double rmse(const std::vector<double>& values, double target);

struct MetricsReport {
  double height_rmse = 0.0;      // base height vs the commanded height
  double roll_rmse = 0.0;
  double max_height_error = 0.0;
  NoiseStats fhat;               // mse is NaN until paired
  NoiseStats shadow_fhat;        // same for the shadow estimator, if any
  double fhat_mean = 0.0;
  double max_fprocess_norm = 0.0;
  double max_dynamics_residual = 0.0;
  bool swing_forces_zero = true;
  bool fell = false;
  double fall_time = -1.0;
  StageTiming nominal_mpc, robust_mpc, estimator, wbc;
};

/// Per-tick scalar traces kept in memory (every tick, independent of CSV
/// decimation).
struct Traces {
  std::vector<double> t, height, roll, fhat_norm, fprocess_norm, dc_norm, shadow_norm;
};

enum class RunStatus { Ok, SolverFailure, Diverged };

struct RunResult {
  RunStatus status = RunStatus::Ok;
  std::string failure;
  MetricsReport metrics;
  Traces traces;
  int exit_code() const { return status == RunStatus::Ok ? 0 : status == RunStatus::SolverFailure ? 2 : 3; }
};

/// Runs one deterministic single-threaded episode. CSVs (truth, estimator,
/// mpc, wbc) and metrics.json go to config.output when it is non-empty.
RunResult run_scenario(const ScenarioConfig& config);
RunResult run_scenario(const ScenarioConfig& config, const model::RobotModel& model);

/// Metrics of a trace set over t >= config.warmup. After a fall or a failure
/// the remaining window is padded with the last height and roll.
MetricsReport compute_metrics(const ScenarioConfig& config, const Traces& traces);

/// Noisy run plus the same scenario without noise; fills fhat.mse.
struct NoiseComparison {
  RunResult noisy, clean;
};
NoiseComparison compare_noise(const ScenarioConfig& config, const model::RobotModel& model);

/// Recomputes the priority-one residuals of every row of wbc.csv.
struct WbcLogCheck {
  int rows = 0;
  double max_dynamics_residual = 0.0;
  double max_friction_violation = 0.0;
  double max_torque_violation = 0.0;
  bool swing_forces_zero = true;
};
WbcLogCheck check_wbc_log(const std::string& dir, const model::RobotModel& model, double mu);

/// Median mhe_step wall time per window length.
struct BenchRow {
  int N = 0;
  StageTiming timing;
  double spread = 0.0;  // (max - min) / median over repeated medians
};
std::vector<BenchRow> bench_mhe(int block_dim, const std::vector<int>& Ns, int steps, int repeats = 3);

}  // namespace drc::harness
