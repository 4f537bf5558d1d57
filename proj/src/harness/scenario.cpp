#include "drc/harness/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace drc::harness {

Variant parse_variant(const std::string& s) {
  if (s == "t-wb-drc") return Variant::TWbDrc;
  if (s == "standard-wb-c") return Variant::StandardWbc;
  throw InvariantError("unknown variant '" + s + "' (expected t-wb-drc or standard-wb-c)");
}

std::string variant_name(Variant v) { return v == Variant::TWbDrc ? "t-wb-drc" : "standard-wb-c"; }

EstimatorKind parse_estimator(const std::string& s) {
  if (s == "eso") return EstimatorKind::Eso;
  if (s == "mh-eso") return EstimatorKind::MhEso;
  if (s == "none") return EstimatorKind::None;
  throw InvariantError("unknown estimator '" + s + "' (expected eso, mh-eso or none)");
}

std::string estimator_name(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::Eso: return "eso";
    case EstimatorKind::MhEso: return "mh-eso";
    case EstimatorKind::None: return "none";
  }
  return "none";
}

double ScenarioConfig::alpha() const {
  double a = std::numeric_limits<double>::infinity();
  for (const auto& f : filters)
    if (f.kind == sigproc::FilterKind::Saturator) a = std::min(a, f.alpha);
  return a;
}

ScenarioConfig ScenarioConfig::effective() const {
  ScenarioConfig c = *this;
  if (c.variant == Variant::StandardWbc) c.estimator = EstimatorKind::None;
  return c;
}

namespace {

bool divides(double rate, double base) {
  const double k = base / rate;
  return rate > 0.0 && k >= 1.0 - 1e-9 && std::abs(k - std::round(k)) < 1e-9;
}

int joint_index(const model::RobotModel& m, const std::string& name) {
  try {
    size_t pos = 0;
    const int j = std::stoi(name, &pos);
    if (pos == name.size()) {
      if (j < 0 || j >= m.num_joints())
        throw InvariantError("fault: joint index " + name + " out of range");
      return j;
    }
  } catch (const std::invalid_argument&) {
  } catch (const std::out_of_range&) {
  }
  const int b = m.find_body(name);
  for (int j = 0; j < m.num_joints(); ++j)
    if (m.joint_body(j) == b) return j;
  throw InvariantError("fault: unknown joint '" + name + "'");
}

}  // namespace

void ScenarioConfig::validate(const model::RobotModel& model) const {
  if (!(duration > 0.0)) throw InvariantError("duration must be positive");
  gait.validate();
  for (double r : {rates.high, rates.robust, rates.estimator, rates.low})
    if (!divides(r, 1000.0)) throw InvariantError("rates must divide the 1000 Hz physics rate");
  if (!divides(rates.robust, rates.high))
    throw InvariantError("rates: the robust rate must divide the high-level rate");
  for (const auto& f : filters) f.validate(1.0 / rates.estimator);
  if (mhe_N < 1) throw InvariantError("mhe_N must be at least 1");
  if (!(mhe_gamma >= 0.0) || !(mhe_lambda > 0.0) || !(mhe_pi > 0.0))
    throw InvariantError("mhe gains: gamma must be non-negative, lambda and pi positive");
  if (!(omega0 > 0.0)) throw InvariantError("omega0 must be positive");
  if (!(height > 0.0)) throw InvariantError("height must be positive");
  if (!(kp > 0.0) || !(kd > 0.0)) throw InvariantError("kp and kd must be positive");
  if (!(mu >= 0.0)) throw InvariantError("mu must be non-negative");
  if (!(task_kp >= 0.0) || !(task_kd >= 0.0)) throw InvariantError("task_kp and task_kd must be non-negative");
  if (mpc_iterations < 1) throw InvariantError("mpc_iterations must be at least 1");
  if (!(mpc_horizon > 0.0) || mpc_nodes < 2) throw InvariantError("mpc horizon/nodes invalid");
  if (!(warmup >= 0.0) || warmup >= duration) throw InvariantError("warmup must lie in [0, duration)");
  if (log_every < 1) throw InvariantError("log_every must be at least 1");
  disturbance_spec(model).validate(model, duration);
}

sim::DisturbanceSpec ScenarioConfig::disturbance_spec(const model::RobotModel& model) const {
  sim::DisturbanceSpec d;
  d.payload = payload;
  d.wrenches = wrenches;
  for (const auto& f : faults) d.faults.push_back({joint_index(model, f.joint), f.scale, f.when});
  d.noise = noise;
  return d;
}

namespace {

std::vector<std::string> tokens_of(const std::string& line) {
  std::string raw = line;
  if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
  std::istringstream ls(raw);
  std::vector<std::string> t;
  for (std::string tok; ls >> tok;) t.push_back(tok);
  return t;
}

double number(const std::string& s, int line) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, "expected a number, got '" + s + "'");
  }
}

int integer(const std::string& s, int line) {
  const double v = number(s, line);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ParseError(line, "expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

void expect(const std::vector<std::string>& t, size_t n, int line, const std::string& usage) {
  if (t.size() != n) throw ParseError(line, "'" + t[0] + "' expects: " + usage);
}

sigproc::FilterConfig parse_filter(const std::string& tok, int line) {
  const auto colon = tok.find(':');
  const std::string kind = tok.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : tok.substr(colon + 1);
  sigproc::FilterConfig f;
  if (kind == "saturator") {
    f.kind = sigproc::FilterKind::Saturator;
    if (!arg.empty()) f.alpha = number(arg, line);
  } else if (kind == "maf") {
    f.kind = sigproc::FilterKind::Maf;
    if (!arg.empty()) f.window = integer(arg, line);
  } else if (kind == "lowpass") {
    f.kind = sigproc::FilterKind::Lowpass;
    if (!arg.empty()) f.cutoff_hz = number(arg, line);
  } else {
    throw ParseError(line, "unknown filter '" + kind + "' (expected saturator, maf or lowpass)");
  }
  f.validate(1e-3);  // the finest estimator step; the actual rate is checked in validate()
  return f;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void apply_setting(ScenarioConfig& c, const std::string& line, int n) {
  const auto t = tokens_of(line);
  if (t.empty()) return;
  const std::string& key = t[0];
  auto num = [&](size_t i) { return number(t[i], n); };
  auto one = [&](const std::string& usage) { expect(t, 2, n, usage); };
  try {
    if (key == "model") {
      one("path");
      c.model_file = t[1];
    } else if (key == "gait") {
      one("stand | trot-in-place | trot");
      c.gait.kind = sim::parse_gait(t[1]);
    } else if (key == "period") {
      one("seconds");
      c.gait.period = num(1);
    } else if (key == "duty") {
      one("fraction");
      c.gait.duty = num(1);
    } else if (key == "gait_start") {
      one("seconds");
      c.gait.start_time = num(1);
    } else if (key == "apex") {
      one("metres");
      c.gait.apex = num(1);
    } else if (key == "forward_speed") {
      one("m/s");
      c.gait.forward_speed = num(1);
    } else if (key == "duration") {
      one("seconds");
      c.duration = num(1);
    } else if (key == "variant") {
      one("t-wb-drc | standard-wb-c");
      c.variant = parse_variant(t[1]);
    } else if (key == "estimator") {
      one("eso | mh-eso | none");
      c.estimator = parse_estimator(t[1]);
    } else if (key == "shadow_estimator") {
      one("eso|mh-eso|none");
      c.shadow_estimator = parse_estimator(t[1]);
    } else if (key == "filters") {
      if (t.size() < 2) throw ParseError(n, "'filters' expects: none | kind[:param]...");
      c.filters.clear();
      if (!(t.size() == 2 && t[1] == "none"))
        for (size_t i = 1; i < t.size(); ++i) c.filters.push_back(parse_filter(t[i], n));
    } else if (key == "rates") {
      expect(t, 5, n, "high robust estimator low (Hz)");
      c.rates = {num(1), num(2), num(3), num(4)};
    } else if (key == "mhe_N") {
      one("window length");
      c.mhe_N = integer(t[1], n);
    } else if (key == "mhe_gamma") {
      one("value");
      c.mhe_gamma = num(1);
    } else if (key == "mhe_lambda") {
      one("value");
      c.mhe_lambda = num(1);
    } else if (key == "mhe_pi") {
      one("value");
      c.mhe_pi = num(1);
    } else if (key == "omega0") {
      one("rad/s");
      c.omega0 = num(1);
    } else if (key == "payload") {
      if (t.size() == 2 && t[1] == "none") {
        c.payload.reset();
      } else {
        expect(t, 7, n, "mass ox oy oz start end | none");
        c.payload = sim::PayloadSpec{num(1), Vector3d(num(2), num(3), num(4)), {num(5), num(6)}};
      }
    } else if (key == "wrench") {
      if (t.size() == 2 && t[1] == "none") {
        c.wrenches.clear();
      } else {
        expect(t, 9, n, "fx fy fz tx ty tz start end | none");
        sim::WrenchSpec w;
        for (int i = 0; i < 6; ++i) w.wrench[i] = num(static_cast<size_t>(i + 1));
        w.when = {num(7), num(8)};
        c.wrenches.push_back(w);
      }
    } else if (key == "fault") {
      if (t.size() == 2 && t[1] == "none") {
        c.faults.clear();
      } else {
        expect(t, 5, n, "joint scale start end | none");
        c.faults.push_back({t[1], num(2), {num(3), num(4)}});
      }
    } else if (key == "noise") {
      expect(t, 3, n, "position velocity");
      c.noise.position = num(1);
      c.noise.velocity = num(2);
    } else if (key == "noise_mode") {
      one("variance | sigma");
      if (t[1] != "variance" && t[1] != "sigma") throw ParseError(n, "noise_mode expects variance or sigma");
      c.noise.as_sigma = t[1] == "sigma";
    } else if (key == "noise_target") {
      one("all | estimator");
      if (t[1] != "all" && t[1] != "estimator") throw ParseError(n, "noise_target expects all or estimator");
      c.noise_target = t[1] == "all" ? NoiseTarget::All : NoiseTarget::Estimator;
    } else if (key == "seed") {
      one("integer");
      try {
        size_t pos = 0;
        c.seed = std::stoull(t[1], &pos);
        if (pos != t[1].size()) throw std::invalid_argument(t[1]);
      } catch (const std::exception&) {
        throw ParseError(n, "seed expects a non-negative integer");
      }
    } else if (key == "output") {
      one("directory");
      c.output = t[1];
    } else if (key == "height") {
      one("metres");
      c.height = num(1);
    } else if (key == "kp") {
      one("gain");
      c.kp = num(1);
    } else if (key == "kd") {
      one("gain");
      c.kd = num(1);
    } else if (key == "mu") {
      one("friction coefficient");
      c.mu = num(1);
    } else if (key == "mpc_iterations") {
      one("count");
      c.mpc_iterations = integer(t[1], n);
    } else if (key == "mpc_horizon") {
      one("seconds");
      c.mpc_horizon = num(1);
    } else if (key == "mpc_nodes") {
      one("count");
      c.mpc_nodes = integer(t[1], n);
    } else if (key == "warmup") {
      one("seconds");
      c.warmup = num(1);
    } else if (key == "fall_height") {
      one("metres");
      c.fall_height = num(1);
    } else if (key == "log_every") {
      one("ticks");
      c.log_every = integer(t[1], n);
    } else if (key == "task_kp") {
      one("gain");
      c.task_kp = num(1);
    } else if (key == "task_kd") {
      one("gain");
      c.task_kd = num(1);
    } else if (key == "dc_velocity") {
      one("on|off");
      if (t[1] != "on" && t[1] != "off") throw ParseError(n, "dc_velocity expects on or off");
      c.dc_velocity = t[1] == "on";
    } else {
      throw ParseError(n, "unknown key '" + key + "'");
    }
  } catch (const ParseError&) {
    throw;
  } catch (const InvariantError& e) {
    throw ParseError(n, e.what());
  }
}

ScenarioConfig parse_scenario(std::string_view text, const std::string& base_dir) {
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  bool header = false;
  ScenarioConfig c;
  while (std::getline(in, raw)) {
    ++line;
    const auto t = tokens_of(raw);
    if (t.empty()) continue;
    if (!header) {
      if (t.size() != 2 || t[0] != "legged-drc-scenario")
        throw ParseError(line, "missing header 'legged-drc-scenario v1'");
      if (t[1] != "v1") throw ParseError(line, "unsupported scenario version '" + t[1] + "'");
      header = true;
      continue;
    }
    apply_setting(c, raw, line);
  }
  if (!header) throw ParseError(line, "missing header 'legged-drc-scenario v1'");
  if (!base_dir.empty() && std::filesystem::path(c.model_file).is_relative())
    c.model_file = (std::filesystem::path(base_dir) / c.model_file).lexically_normal().string();
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open scenario file '" + path + "'");
  std::stringstream buffer;
  buffer << f.rdbuf();
  return parse_scenario(buffer.str(), std::filesystem::path(path).parent_path().string());
}

std::string to_text(const ScenarioConfig& c) {
  std::ostringstream o;
  o << "legged-drc-scenario v1\n";
  o << "model " << c.model_file << "\n";
  o << "gait " << sim::gait_name(c.gait.kind) << "\n";
  o << "period " << fmt(c.gait.period) << "\n";
  o << "duty " << fmt(c.gait.duty) << "\n";
  o << "gait_start " << fmt(c.gait.start_time) << "\n";
  o << "apex " << fmt(c.gait.apex) << "\n";
  o << "forward_speed " << fmt(c.gait.forward_speed) << "\n";
  o << "duration " << fmt(c.duration) << "\n";
  o << "variant " << variant_name(c.variant) << "\n";
  o << "estimator " << estimator_name(c.estimator) << "\n";
  o << "shadow_estimator " << estimator_name(c.shadow_estimator) << "\n";
  o << "filters";
  if (c.filters.empty()) o << " none";
  for (const auto& f : c.filters) {
    switch (f.kind) {
      case sigproc::FilterKind::Saturator: o << " saturator:" << fmt(f.alpha); break;
      case sigproc::FilterKind::Maf: o << " maf:" << f.window; break;
      case sigproc::FilterKind::Lowpass: o << " lowpass:" << fmt(f.cutoff_hz); break;
      case sigproc::FilterKind::None: break;
    }
  }
  o << "\n";
  o << "rates " << fmt(c.rates.high) << " " << fmt(c.rates.robust) << " " << fmt(c.rates.estimator)
    << " " << fmt(c.rates.low) << "\n";
  o << "mhe_N " << c.mhe_N << "\n";
  o << "mhe_gamma " << fmt(c.mhe_gamma) << "\n";
  o << "mhe_lambda " << fmt(c.mhe_lambda) << "\n";
  o << "mhe_pi " << fmt(c.mhe_pi) << "\n";
  o << "omega0 " << fmt(c.omega0) << "\n";
  if (c.payload) {
    const auto& p = *c.payload;
    o << "payload " << fmt(p.mass) << " " << fmt(p.offset.x()) << " " << fmt(p.offset.y()) << " "
      << fmt(p.offset.z()) << " " << fmt(p.when.start) << " " << fmt(p.when.end) << "\n";
  }
  for (const auto& w : c.wrenches) {
    o << "wrench";
    for (int i = 0; i < 6; ++i) o << " " << fmt(w.wrench[i]);
    o << " " << fmt(w.when.start) << " " << fmt(w.when.end) << "\n";
  }
  for (const auto& f : c.faults)
    o << "fault " << f.joint << " " << fmt(f.scale) << " " << fmt(f.when.start) << " "
      << fmt(f.when.end) << "\n";
  o << "noise " << fmt(c.noise.position) << " " << fmt(c.noise.velocity) << "\n";
  o << "noise_mode " << (c.noise.as_sigma ? "sigma" : "variance") << "\n";
  o << "noise_target " << (c.noise_target == NoiseTarget::All ? "all" : "estimator") << "\n";
  o << "seed " << c.seed << "\n";
  if (!c.output.empty()) o << "output " << c.output << "\n";
  o << "height " << fmt(c.height) << "\n";
  o << "kp " << fmt(c.kp) << "\n";
  o << "kd " << fmt(c.kd) << "\n";
  o << "mu " << fmt(c.mu) << "\n";
  o << "task_kp " << fmt(c.task_kp) << "\n";
  o << "task_kd " << fmt(c.task_kd) << "\n";
  o << "mpc_iterations " << c.mpc_iterations << "\n";
  o << "mpc_horizon " << fmt(c.mpc_horizon) << "\n";
  o << "mpc_nodes " << c.mpc_nodes << "\n";
  o << "warmup " << fmt(c.warmup) << "\n";
  o << "fall_height " << fmt(c.fall_height) << "\n";
  o << "log_every " << c.log_every << "\n";
  o << "dc_velocity " << (c.dc_velocity ? "on" : "off") << "\n";
  return o.str();
}

}  // namespace drc::harness
