// Command-line front end of the scenario runner.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "drc/harness/runner.hpp"
#include "drc/harness/scenario.hpp"
#include "drc/model/robot_model.hpp"

namespace {

using namespace drc;
using namespace drc::harness;

struct CommonArgs {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string out;
  std::string variant;
  std::string estimator;
  std::string shadow;
  double duration = -1.0;
  std::vector<std::string> settings;
};

void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("scenario", a.scenario, "scenario file (legged-drc-scenario v1)")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", a.seed, "noise seed")->required();
  app->add_option("--out", a.out, "output directory")->required();
  app->add_option("--variant", a.variant, "t-wb-drc or standard-wb-c")->required();
  app->add_option("--estimator", a.estimator, "eso, mh-eso or none");
  app->add_option("--shadow", a.shadow, "estimator run alongside on the same data, never fed back");
  app->add_option("--duration", a.duration, "episode length in seconds");
  app->add_option("--set", a.settings, "extra 'key value...' line applied after the file (repeatable)");
}

ScenarioConfig build_config(const CommonArgs& a) {
  ScenarioConfig c = load_scenario(a.scenario);
  for (const auto& s : a.settings) apply_setting(c, s);
  c.variant = parse_variant(a.variant);
  if (!a.estimator.empty()) c.estimator = parse_estimator(a.estimator);
  if (!a.shadow.empty()) c.shadow_estimator = parse_estimator(a.shadow);
  if (a.duration > 0.0) c.duration = a.duration;
  c.seed = a.seed;
  c.output = a.out;
  return c;
}

void print_report(const ScenarioConfig& c, const RunResult& r) {
  const MetricsReport& m = r.metrics;
  std::printf("variant %s  estimator %s  seed %llu\n", variant_name(c.variant).c_str(),
              estimator_name(c.effective().estimator).c_str(), static_cast<unsigned long long>(c.seed));
  if (!r.failure.empty()) std::printf("failure: %s\n", r.failure.c_str());
  std::printf("height rmse %.6g m  roll rmse %.6g rad  max height error %.6g m\n", m.height_rmse,
              m.roll_rmse, m.max_height_error);
  std::printf("fell %s", m.fell ? "yes" : "no");
  if (m.fell) std::printf(" at %.3f s", m.fall_time);
  std::printf("\n|fhat| mean %.6g  var %.6g  mse %.6g  max |fproc| %.6g\n", m.fhat_mean, m.fhat.var,
              m.fhat.mse, m.max_fprocess_norm);
  auto stage = [](const char* name, const StageTiming& s) {
    if (s.samples) std::printf("  %-12s median %.4f ms  p95 %.4f ms  (%d)\n", name, s.median_ms, s.p95_ms, s.samples);
  };
  std::printf("timing\n");
  stage("nominal mpc", m.nominal_mpc);
  stage("robust mpc", m.robust_mpc);
  stage("estimator", m.estimator);
  stage("wbc", m.wbc);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) out.push_back(part);
  return out;
}

int run_sweep(const CommonArgs& a, const std::vector<std::string>& grid) {
  // Each grid entry is key=v1,v2,...; values may hold spaces for multi-token keys.
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& g : grid) {
    const auto eq = g.find('=');
    if (eq == std::string::npos) throw Error("grid entry '" + g + "' must look like key=v1,v2");
    axes.emplace_back(g.substr(0, eq), split(g.substr(eq + 1), ','));
  }
  const ScenarioConfig base = build_config(a);
  const model::RobotModel model = model::load_model(base.model_file);
  std::filesystem::create_directories(a.out);
  std::ofstream summary((std::filesystem::path(a.out) / "sweep.csv").string());
  summary << "run";
  for (const auto& ax : axes) summary << "," << ax.first;
  summary << ",exit_code,fell,height_rmse[m],roll_rmse[rad],fhat_mean[1]\n";

  std::vector<size_t> idx(axes.size(), 0);
  int worst = 0, run = 0;
  while (true) {
    ScenarioConfig c = base;
    std::string label = "run" + std::to_string(run);
    for (size_t i = 0; i < axes.size(); ++i) apply_setting(c, axes[i].first + " " + axes[i].second[idx[i]]);
    c.output = (std::filesystem::path(a.out) / label).string();
    const RunResult r = run_scenario(c, model);
    worst = std::max(worst, r.exit_code());
    summary << label;
    for (size_t i = 0; i < axes.size(); ++i) summary << "," << axes[i].second[idx[i]];
    char buf[160];
    std::snprintf(buf, sizeof buf, ",%d,%d,%.17g,%.17g,%.17g\n", r.exit_code(), r.metrics.fell ? 1 : 0,
                  r.metrics.height_rmse, r.metrics.roll_rmse, r.metrics.fhat_mean);
    summary << buf;
    std::printf("%s: exit %d  height rmse %.6g m\n", label.c_str(), r.exit_code(), r.metrics.height_rmse);
    ++run;
    size_t i = 0;
    for (; i < axes.size(); ++i) {
      if (++idx[i] < axes[i].second.size()) break;
      idx[i] = 0;
    }
    if (i == axes.size()) break;
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-level whole-body disturbance-rejection control runner"};
  app.require_subcommand(1);

  CommonArgs run_args, noise_args, sweep_args;
  auto* run = app.add_subcommand("run", "run one episode and write CSV logs plus metrics.json");
  add_common(run, run_args);

  auto* noise = app.add_subcommand("compare-noise", "noisy run plus its noise-free twin, then MSE and Var of |fhat|");
  add_common(noise, noise_args);

  auto* sweep = app.add_subcommand("sweep", "run a cartesian grid of scenario settings");
  add_common(sweep, sweep_args);
  std::vector<std::string> grid;
  sweep->add_option("--grid", grid, "key=v1,v2,... (repeatable)")->required();

  auto* bench = app.add_subcommand("bench-mhe", "median moving-horizon ESO step time per window length");
  int dims = 12, steps = 2000, repeats = 3;
  std::vector<int> Ns{1, 2, 4, 6, 8, 10, 12, 14};
  std::string bench_out;
  bench->add_option("--dims", dims, "block dimension");
  bench->add_option("--N", Ns, "window lengths");
  bench->add_option("--steps", steps, "timed steps per repeat");
  bench->add_option("--repeats", repeats, "repeats per window length");
  bench->add_option("--out", bench_out, "optional CSV file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const ScenarioConfig c = build_config(run_args);
      const RunResult r = run_scenario(c);
      print_report(c, r);
      return r.exit_code();
    }
    if (noise->parsed()) {
      ScenarioConfig c = build_config(noise_args);
      const model::RobotModel model = model::load_model(c.model_file);
      const NoiseComparison cmp = compare_noise(c, model);
      print_report(c, cmp.noisy);
      std::printf("paired: mse %.9g  var %.9g\n", cmp.noisy.metrics.fhat.mse, cmp.noisy.metrics.fhat.var);
      if (c.shadow_estimator != EstimatorKind::None)
        std::printf("shadow %s: mse %.9g  var %.9g\n", estimator_name(c.shadow_estimator).c_str(),
                    cmp.noisy.metrics.shadow_fhat.mse, cmp.noisy.metrics.shadow_fhat.var);
      return std::max(cmp.noisy.exit_code(), cmp.clean.exit_code());
    }
    if (sweep->parsed()) return run_sweep(sweep_args, grid);
    if (bench->parsed()) {
      const auto rows = bench_mhe(dims, Ns, steps, repeats);
      std::ofstream csv;
      if (!bench_out.empty()) {
        csv.open(bench_out);
        csv << "N[1],median[ms],p95[ms],spread[1]\n";
      }
      std::printf("%4s %12s %12s %8s\n", "N", "median ms", "p95 ms", "spread");
      for (const auto& r : rows) {
        std::printf("%4d %12.6f %12.6f %8.3f\n", r.N, r.timing.median_ms, r.timing.p95_ms, r.spread);
        if (csv.is_open()) {
          char buf[128];
          std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.N, r.timing.median_ms, r.timing.p95_ms, r.spread);
          csv << buf;
        }
      }
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
