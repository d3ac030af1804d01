#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace preempt::stats {

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
inline double quantile_sorted(const std::vector<double>& s, double q) {
  if (s.empty()) throw std::invalid_argument("quantile of empty sample");
  const double h = (static_cast<double>(s.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

/// Percentile bootstrap confidence interval of the mean.
inline std::pair<double, double> bootstrap_ci_mean(const std::vector<double>& diffs, std::size_t n_resamples = 10000,
                                                   double alpha = 0.05, std::uint64_t seed = 0) {
  if (diffs.size() < 2) throw std::invalid_argument("bootstrap needs at least two samples");
  if (n_resamples == 0 || !(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("bad bootstrap settings");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, diffs.size() - 1);
  std::vector<double> means(n_resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i) s += diffs[pick(rng)];
    m = s / static_cast<double>(diffs.size());
  }
  std::sort(means.begin(), means.end());
  return {quantile_sorted(means, alpha / 2.0), quantile_sorted(means, 1.0 - alpha / 2.0)};
}

}  // namespace preempt::stats
