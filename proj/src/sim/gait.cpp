#include "drc/sim/gait.hpp"

#include <cmath>

namespace drc::sim {

GaitKind parse_gait(const std::string& name) {
  if (name == "stand") return GaitKind::Stand;
  if (name == "trot-in-place") return GaitKind::TrotInPlace;
  if (name == "trot") return GaitKind::Trot;
  throw InvariantError("unknown gait '" + name + "' (expected stand, trot-in-place or trot)");
}

std::string gait_name(GaitKind kind) {
  switch (kind) {
    case GaitKind::Stand: return "stand";
    case GaitKind::TrotInPlace: return "trot-in-place";
    case GaitKind::Trot: return "trot";
  }
  return "stand";
}

void GaitConfig::validate() const {
  if (!(period > 0.0)) throw InvariantError("gait: period must be positive");
  if (!(duty > 0.5 && duty < 1.0)) throw InvariantError("gait: duty must lie in (0.5, 1)");
  if (!(apex >= 0.0)) throw InvariantError("gait: apex must be non-negative");
}

GaitPhase gait_flags(const GaitConfig& gait, double t, int num_feet) {
  GaitPhase out{model::StanceFlags(static_cast<size_t>(num_feet), true),
                std::vector<double>(static_cast<size_t>(num_feet), -1.0)};
  if (gait.kind == GaitKind::Stand || t < gait.start_time || num_feet != 4) return out;
  const double d = gait.duty;
  const double offsets[4] = {d - 0.5, d, d, d - 0.5};
  const double tau = (t - gait.start_time) / gait.period;
  for (size_t i = 0; i < 4; ++i) {
    double c = tau + offsets[i];
    c -= std::floor(c);
    if (c >= d) {
      out.stance[i] = false;
      out.swing_phase[i] = (c - d) / (1.0 - d);
    }
  }
  return out;
}

double swing_height(double phase, double apex) {
  if (phase <= 0.0 || phase >= 1.0) return 0.0;
  // Two cubic segments meeting at the apex with zero slope.
  const double s = phase < 0.5 ? 2.0 * phase : 2.0 * (1.0 - phase);
  return apex * (3.0 * s * s - 2.0 * s * s * s);
}

}  // namespace drc::sim
