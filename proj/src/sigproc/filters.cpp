#include "drc/sigproc/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace drc::sigproc {

void FilterConfig::validate(double dt) const {
  switch (kind) {
    case FilterKind::Saturator:
      if (!(alpha > 0.0)) throw InvariantError("saturator: alpha must be positive");
      break;
    case FilterKind::Maf:
      if (window < 1) throw InvariantError("moving average: window must be at least 1");
      break;
    case FilterKind::Lowpass:
      if (!(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 / dt))
        throw InvariantError("low-pass: cutoff must lie in (0, Nyquist)");
      break;
    case FilterKind::None:
      break;
  }
}

VectorXd saturate(const VectorXd& x, double alpha) {
  if (!(alpha > 0.0)) throw InvariantError("saturator: alpha must be positive");
  const double norm = x.norm();
  if (norm <= alpha) return x;
  VectorXd y = (alpha / norm) * x;
  // Rounding can leave the norm an ulp above alpha; shrink until it is not.
  double shrink = 1.0;
  while (y.norm() > alpha) {
    shrink *= 1.0 - 4.0 * std::numeric_limits<double>::epsilon();
    y = (shrink * alpha / norm) * x;
  }
  return y;
}

VectorXd lowpass_step(const VectorXd& prev, const VectorXd& x, double cutoff_hz, double dt) {
  const double beta = 1.0 - std::exp(-2.0 * M_PI * cutoff_hz * dt);
  return prev + beta * (x - prev);
}

MovingAverage::MovingAverage(int window) : window_(window) {
  if (window < 1) throw InvariantError("moving average: window must be at least 1");
}

VectorXd MovingAverage::step(const VectorXd& x) {
  buffer_.push_back(x);
  if (static_cast<int>(buffer_.size()) > window_) buffer_.pop_front();
  VectorXd sum = VectorXd::Zero(x.size());
  for (const auto& v : buffer_) sum += v;
  return sum / static_cast<double>(buffer_.size());
}

LowPass::LowPass(double cutoff_hz, double dt) : cutoff_hz_(cutoff_hz), dt_(dt) {
  FilterConfig{FilterKind::Lowpass, 1.0, 1, cutoff_hz}.validate(dt);
}

VectorXd LowPass::step(const VectorXd& x) {
  y_ = y_.size() == 0 ? x : lowpass_step(y_, x, cutoff_hz_, dt_);
  return y_;
}

FilterChain::FilterChain(std::vector<FilterConfig> stages, double dt) : stages_(std::move(stages)) {
  std::stable_partition(stages_.begin(), stages_.end(),
                        [](const FilterConfig& c) { return c.kind != FilterKind::Saturator; });
  for (const auto& c : stages_) {
    c.validate(dt);
    if (c.kind == FilterKind::Maf) maf_.emplace_back(c.window);
    if (c.kind == FilterKind::Lowpass) lowpass_.emplace_back(c.cutoff_hz, dt);
  }
}

VectorXd FilterChain::step(const VectorXd& x) {
  VectorXd y = x;
  size_t im = 0, il = 0;
  for (const auto& c : stages_) {
    switch (c.kind) {
      case FilterKind::Saturator: y = saturate(y, c.alpha); break;
      case FilterKind::Maf: y = maf_[im++].step(y); break;
      case FilterKind::Lowpass: y = lowpass_[il++].step(y); break;
      case FilterKind::None: break;
    }
  }
  return y;
}

}  // namespace drc::sigproc
