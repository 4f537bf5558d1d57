#pragma once

#include <deque>
#include <vector>

#include "drc/common.hpp"

namespace drc::sigproc {

enum class FilterKind { None, Saturator, Maf, Lowpass };

struct FilterConfig {
  FilterKind kind = FilterKind::None;
  double alpha = 25.0;     // saturator bound
  int window = 1;          // moving-average length
  double cutoff_hz = 50.0; // first-order low-pass cutoff

  void validate(double dt) const;
};

/// Norm clamp: alpha x / |x| when |x| > alpha, x otherwise.
VectorXd saturate(const VectorXd& x, double alpha);

/// One first-order low-pass update y + beta (x - y), beta = 1 - exp(-2 pi fc dt).
VectorXd lowpass_step(const VectorXd& prev, const VectorXd& x, double cutoff_hz, double dt);

/// Mean of the last `window` samples (partial mean while filling).
class MovingAverage {
 public:
  explicit MovingAverage(int window);
  VectorXd step(const VectorXd& x);

 private:
  int window_;
  std::deque<VectorXd> buffer_;
};

class LowPass {
 public:
  LowPass(double cutoff_hz, double dt);
  /// The first sample initializes the state.
  VectorXd step(const VectorXd& x);

 private:
  double cutoff_hz_, dt_;
  VectorXd y_;
};

/// Filters applied in order, with every saturator moved to the end so the
/// bound holds on the final output.
class FilterChain {
 public:
  FilterChain() = default;
  FilterChain(std::vector<FilterConfig> stages, double dt);
  VectorXd step(const VectorXd& x);
  const std::vector<FilterConfig>& stages() const { return stages_; }

 private:
  std::vector<FilterConfig> stages_;
  std::vector<MovingAverage> maf_;
  std::vector<LowPass> lowpass_;
};

}  // namespace drc::sigproc
