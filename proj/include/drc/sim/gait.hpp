#pragma once

#include <string>
#include <vector>

#include "drc/model/robot_model.hpp"

namespace drc::sim {

enum class GaitKind { Stand, TrotInPlace, Trot };

GaitKind parse_gait(const std::string& name);
std::string gait_name(GaitKind kind);

/// Periodic gait. Feet are ordered FL, FR, RL, RR. Foot i is in stance while
/// its cycle variable c_i = frac((t - start_time) / period + offset_i) is
/// below `duty`. Diagonal pairs run half a cycle apart and the offsets are
/// chosen so that at start_time FR and RL just lift off while FL and RR are
/// in stance. Before start_time every foot is in stance.
struct GaitConfig {
  GaitKind kind = GaitKind::Stand;
  double period = 0.7;
  double duty = 0.6;
  double start_time = 0.0;
  double apex = 0.05;        // swing apex height, m
  double forward_speed = 0.0; // trot only, m/s

  void validate() const;
};

struct GaitPhase {
  model::StanceFlags stance;
  std::vector<double> swing_phase;  // in [0, 1) for swing feet, -1 for stance
};

GaitPhase gait_flags(const GaitConfig& gait, double t, int num_feet = 4);

/// Cubic swing-height profile: zero height and velocity at lift-off and
/// touch-down, `apex` at mid-swing.
double swing_height(double phase, double apex);

}  // namespace drc::sim
