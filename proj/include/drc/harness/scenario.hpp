#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drc/estimator/mh_eso.hpp"
#include "drc/sigproc/filters.hpp"
#include "drc/sim/gait.hpp"
#include "drc/sim/simulator.hpp"

namespace drc::harness {

enum class Variant { TWbDrc, StandardWbc };
enum class EstimatorKind { Eso, MhEso, None };
/// Which feedback paths see the measurement noise.
enum class NoiseTarget { All, Estimator };

Variant parse_variant(const std::string& s);
std::string variant_name(Variant v);
EstimatorKind parse_estimator(const std::string& s);
std::string estimator_name(EstimatorKind e);

/// Loop rates in Hz. Physics always runs at 1 kHz.
struct Rates {
  double high = 20.0;
  double robust = 20.0;
  double estimator = 1000.0;
  double low = 1000.0;
};

/// Actuator fault on a joint given by index or by the name of the body it drives.
struct FaultEntry {
  std::string joint;
  double scale = 1.0;
  sim::Interval when;
};

struct ScenarioConfig {
  std::string model_file = "quadruped.model";
  sim::GaitConfig gait;
  double duration = 10.0;
  Variant variant = Variant::TWbDrc;
  EstimatorKind estimator = EstimatorKind::MhEso;
  /// Second estimator on the same measurements, logged but never fed back.
  EstimatorKind shadow_estimator = EstimatorKind::None;
  std::vector<sigproc::FilterConfig> filters{{sigproc::FilterKind::Lowpass, 25.0, 1, 3.0},
                                             {sigproc::FilterKind::Saturator, 25.0, 1, 50.0}};
  Rates rates;
  int mhe_N = 4;
  double mhe_gamma = 10.0;
  double mhe_lambda = 1.0;
  double mhe_pi = 0.01;
  double omega0 = 200.0;
  std::optional<sim::PayloadSpec> payload;
  std::vector<sim::WrenchSpec> wrenches;
  std::vector<FaultEntry> faults;
  sim::NoiseSpec noise;
  NoiseTarget noise_target = NoiseTarget::All;
  std::uint64_t seed = 0;
  std::string output;

  double height = 0.31;
  double kp = 40.0;
  double kd = 1.0;
  double mu = 0.7;
  double task_kp = 400.0;      // feedback added to the WBC acceleration task
  double task_kd = 60.0;
  int mpc_iterations = 3;      // SQP iterations per MPC tick after the first solve
  double mpc_horizon = 1.0;
  int mpc_nodes = 50;
  double warmup = 1.0;         // metrics ignore t < warmup
  double fall_height = 0.15;
  int log_every = 1;           // CSV row decimation
  bool dc_velocity = false;    // keep the velocity block of d_c in the robust OCP

  /// Saturator bound of the chain (infinity when there is none).
  double alpha() const;
  /// Applies the variant rules: standard-WB-C runs without an estimator.
  ScenarioConfig effective() const;
  void validate(const model::RobotModel& model) const;
  /// Disturbances with fault joints resolved against the model.
  sim::DisturbanceSpec disturbance_spec(const model::RobotModel& model) const;
};

/// Parses a `legged-drc-scenario v1` text. Relative model paths are resolved
/// against `base_dir`.
ScenarioConfig parse_scenario(std::string_view text, const std::string& base_dir = "");
ScenarioConfig load_scenario(const std::string& path);

/// Applies one `key value...` line as it would appear in a scenario file.
void apply_setting(ScenarioConfig& config, const std::string& line, int line_no = 0);

/// Canonical text form; parse_scenario(to_text(c)) reproduces c.
std::string to_text(const ScenarioConfig& config);

}  // namespace drc::harness
