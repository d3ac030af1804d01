#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace preempt::stats {

struct HolmResult {
  double adjusted = 1.0;
  bool reject = false;
};

/// Holm step-down adjustment, reported in input order.
inline std::vector<HolmResult> holm_bonferroni(const std::vector<double>& p, double alpha = 0.05) {
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("holm: p-values must lie in [0, 1]");
  const std::size_t m = p.size();
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<HolmResult> out(m);
  double running = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - j) * p[idx[j]]));
    out[idx[j]].adjusted = running;
    out[idx[j]].reject = running < alpha;
  }
  return out;
}

}  // namespace preempt::stats
