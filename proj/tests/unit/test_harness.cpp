#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "drc/harness/runner.hpp"
#include "drc/harness/scenario.hpp"
#include "test_support.hpp"

using namespace drc;
using namespace drc::harness;
using drc::test::quadruped;

namespace {

std::string scenario(const std::string& name) { return test::fixture("scenarios/" + name); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("drc_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

/// Column of a CSV file by header name.
std::vector<double> column(const std::filesystem::path& file, const std::string& name) {
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  std::stringstream hs(line);
  for (std::string h; std::getline(hs, h, ',');) header.push_back(h);
  const auto it = std::find(header.begin(), header.end(), name);
  REQUIRE(it != header.end());
  const auto idx = static_cast<size_t>(it - header.begin());
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (size_t i = 0; i <= idx; ++i) std::getline(ls, cell, ',');
    out.push_back(std::stod(cell));
  }
  return out;
}

}  // namespace

TEST_CASE("scenario text round-trips through to_text") {
  const ScenarioConfig a = load_scenario(scenario("trot_payload.scn"));
  CHECK(a.gait.kind == sim::GaitKind::TrotInPlace);
  REQUIRE(a.payload.has_value());
  CHECK(a.payload->mass == doctest::Approx(2.4));
  CHECK(std::filesystem::path(a.model_file).is_absolute() == std::filesystem::path(scenario("")).is_absolute());

  const std::string text = to_text(a);
  const ScenarioConfig b = parse_scenario(text);
  CHECK(to_text(b) == text);
  CHECK(b.filters.size() == a.filters.size());
  CHECK(b.alpha() == a.alpha());
}

TEST_CASE("every fixture scenario parses and validates") {
  for (const auto& e : std::filesystem::directory_iterator(scenario(""))) {
    CAPTURE(e.path().string());
    const ScenarioConfig c = load_scenario(e.path().string());
    CHECK_NOTHROW(c.validate(quadruped()));
  }
}

TEST_CASE("scenario parse errors carry the line number") {
  CHECK_THROWS_AS(parse_scenario("gait stand\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("legged-drc-scenario v2\n"), ParseError);
  try {
    parse_scenario("legged-drc-scenario v1\n# comment\nwobble 3\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_scenario("legged-drc-scenario v1\nvariant pid\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("legged-drc-scenario v1\nrates 20 20 1000\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("legged-drc-scenario v1\nfilters saturator:-1\n"), ParseError);
}

TEST_CASE("config validation rejects rates and windows that do not fit") {
  const auto& m = quadruped();
  ScenarioConfig c;
  c.rates.high = 30.0;  // 1000 / 30 is not an integer
  CHECK_THROWS_AS(c.validate(m), InvariantError);
  c = {};
  c.rates.high = 20.0;
  c.rates.robust = 40.0;  // robust must divide the high rate
  CHECK_THROWS_AS(c.validate(m), InvariantError);
  c = {};
  c.payload = sim::PayloadSpec{1.0, Vector3d::Zero(), {0.0, 20.0}};
  CHECK_THROWS_AS(c.validate(m), InvariantError);
  c = {};
  c.faults.push_back({"no_such_joint", 0.5, {1.0, 2.0}});
  CHECK_THROWS_AS(c.validate(m), InvariantError);
  c = {};
  c.faults.push_back({"FL_calf", 0.5, {1.0, 2.0}});
  CHECK_NOTHROW(c.validate(m));
  CHECK(c.disturbance_spec(m).faults.front().joint == 2);
}

TEST_CASE("standard-WB-C forces the estimator off") {
  ScenarioConfig c;
  c.variant = Variant::StandardWbc;
  c.estimator = EstimatorKind::Eso;
  CHECK(c.effective().estimator == EstimatorKind::None);
  c.variant = Variant::TWbDrc;
  CHECK(c.effective().estimator == EstimatorKind::Eso);
}

TEST_CASE("noise statistics follow their definitions") {
  const std::vector<double> clean{2.0, 2.5, 1.5, 2.0};
  const NoiseStats self = noise_stats(clean, clean);
  CHECK(self.var == doctest::Approx(0.125));
  // A series against its own mean: MSE equals Var.
  CHECK(self.mse == doctest::Approx(self.var));

  const std::vector<double> flat(10, 3.0);
  const NoiseStats same = noise_stats(flat, flat);
  CHECK(same.mse == 0.0);
  CHECK(same.var == 0.0);

  const NoiseStats pair = noise_stats({1.0, 3.0}, {2.0, 2.0});
  CHECK(pair.var == doctest::Approx(1.0));
  CHECK(pair.mse == doctest::Approx(1.0));

  CHECK(std::isnan(noise_stats({1.0, 3.0}, {}).mse));
  CHECK(rmse({0.30, 0.32}, 0.31) == doctest::Approx(0.01));
}

TEST_CASE("timing summary picks median and 95th percentile") {
  std::vector<double> ms;
  for (int i = 100; i >= 1; --i) ms.push_back(i);
  const StageTiming s = summarize_timing(ms);
  CHECK(s.samples == 100);
  CHECK(s.median_ms == 51.0);
  CHECK(s.p95_ms == 96.0);
  CHECK(summarize_timing({}).samples == 0);
}

TEST_CASE("metrics pad the window after a fall") {
  ScenarioConfig c;
  c.duration = 2.0;
  c.warmup = 1.0;
  Traces tr;
  for (int k = 0; k < 1500; ++k) {
    tr.t.push_back(k * 1e-3);
    tr.height.push_back(k < 1400 ? 0.31 : 0.10);
    tr.roll.push_back(0.0);
    tr.fhat_norm.push_back(1.0);
    tr.shadow_norm.push_back(0.0);
    tr.fprocess_norm.push_back(1.0);
    tr.dc_norm.push_back(0.0);
  }
  const MetricsReport m = compute_metrics(c, tr);
  CHECK(m.fell);
  CHECK(m.fall_time == doctest::Approx(1.4));
  // 400 ticks at 0.31, then 600 ticks held at the last height 0.10.
  CHECK(m.height_rmse == doctest::Approx(std::sqrt(0.6 * 0.21 * 0.21)));
  CHECK(m.max_height_error == doctest::Approx(0.21));
}

TEST_CASE("exit codes map run status") {
  RunResult r;
  CHECK(r.exit_code() == 0);
  r.status = RunStatus::SolverFailure;
  CHECK(r.exit_code() == 2);
  r.status = RunStatus::Diverged;
  CHECK(r.exit_code() == 3);
}

TEST_CASE("standard-WB-C logs no compensation and no offsets") {
  ScenarioConfig c = load_scenario(scenario("trot_payload.scn"));
  c.variant = Variant::StandardWbc;
  c.estimator = EstimatorKind::MhEso;
  c.duration = 1.0;
  c.warmup = 0.5;
  c.payload->when = {0.0, 1.0};
  const auto dir = scratch("bypass");
  c.output = dir.string();
  const RunResult r = run_scenario(c, quadruped());
  REQUIRE(r.status == RunStatus::Ok);
  for (double v : r.traces.fprocess_norm) CHECK(v == 0.0);
  for (double v : r.traces.dc_norm) CHECK(v == 0.0);
  for (double v : column(dir / "estimator.csv", "fproc_norm[1]")) CHECK(v == 0.0);
  for (double v : column(dir / "estimator.csv", "dc_hz[N]")) CHECK(v == 0.0);
  CHECK(r.metrics.estimator.samples == 0);
  CHECK(r.metrics.robust_mpc.samples == 0);
}

TEST_CASE("logged WBC solutions satisfy priority one offline") {
  ScenarioConfig c = load_scenario(scenario("knee_fault.scn"));
  c.duration = 1.2;
  c.warmup = 0.5;
  c.faults.front().when = {0.6, 1.2};
  const auto dir = scratch("wbc_log");
  c.output = dir.string();
  const RunResult r = run_scenario(c, quadruped());
  REQUIRE(r.status == RunStatus::Ok);
  const WbcLogCheck chk = check_wbc_log(dir.string(), quadruped(), c.mu);
  CHECK(chk.rows == 1200);
  CHECK(chk.max_dynamics_residual <= 1e-9);
  CHECK(chk.max_friction_violation <= 1e-9);
  CHECK(chk.max_torque_violation <= 1e-9);
  CHECK(chk.swing_forces_zero);
  CHECK(r.metrics.max_dynamics_residual <= 1e-9);
  for (double v : r.traces.fprocess_norm) CHECK(v <= c.alpha() * (1.0 + 1e-12));
  CHECK(std::filesystem::exists(dir / "metrics.json"));
  CHECK(std::filesystem::exists(dir / "mpc.csv"));
}

TEST_CASE("identical config and seed give identical CSV bytes") {
  ScenarioConfig c = load_scenario(scenario("stand_payload_noise.scn"));
  c.duration = 0.4;
  c.warmup = 0.1;
  c.payload->when = {0.0, 0.4};
  c.seed = 7;
  const auto a = scratch("det_a"), b = scratch("det_b");
  c.output = a.string();
  run_scenario(c, quadruped());
  c.output = b.string();
  run_scenario(c, quadruped());
  for (const char* f : {"truth.csv", "estimator.csv", "mpc.csv", "wbc.csv"}) {
    CAPTURE(f);
    const std::string x = slurp(a / f);
    CHECK(!x.empty());
    CHECK(x == slurp(b / f));
  }
  // A different seed changes the noisy estimate.
  c.seed = 8;
  const auto d = scratch("det_c");
  c.output = d.string();
  run_scenario(c, quadruped());
  CHECK(slurp(a / "estimator.csv") != slurp(d / "estimator.csv"));
}

TEST_CASE("quiet stance under standard-WB-C holds the height for 10 s") {
  ScenarioConfig c = load_scenario(scenario("stand.scn"));
  c.variant = Variant::StandardWbc;
  const RunResult r = run_scenario(c, quadruped());
  REQUIRE(r.status == RunStatus::Ok);
  CHECK_FALSE(r.metrics.fell);
  CHECK(r.metrics.height_rmse <= 5e-3);
}

TEST_CASE("bench_mhe reports one row per window length") {
  const auto rows = bench_mhe(2, {1, 3}, 50, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].N == 1);
  CHECK(rows[1].N == 3);
  for (const auto& r : rows) {
    CHECK(r.timing.samples == 100);
    CHECK(r.timing.median_ms > 0.0);
  }
}
