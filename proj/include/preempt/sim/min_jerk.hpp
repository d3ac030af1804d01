#pragma once

#include <vector>

#include "preempt/core/types.hpp"

namespace preempt::sim {

/// s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5.
inline constexpr double min_jerk_profile(double tau) {
  const double t3 = tau * tau * tau;
  return t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}

// Peak of ds/dtau, reached at tau = 1/2.
inline constexpr double kMinJerkPeakSpeed = 1.875;

/// T+1 samples of the minimum-jerk path from p0 to p1 over T frames.
inline std::vector<Point> min_jerk(Point p0, Point p1, int frames) {
  if (frames < 2) throw std::invalid_argument("min_jerk needs at least 2 frames, got " + std::to_string(frames));
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(frames) + 1);
  for (int t = 0; t <= frames; ++t) {
    const double s = min_jerk_profile(static_cast<double>(t) / frames);
    out.push_back(p0 + (p1 - p0) * s);
  }
  out.back() = p1;
  return out;
}

}  // namespace preempt::sim
