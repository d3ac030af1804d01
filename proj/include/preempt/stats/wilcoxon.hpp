#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace preempt::stats {

struct TestResult {
  double w = 0.0;  // min(W+, W-)
  double z = 0.0;  // non-negative normal-approximation statistic
  double p = 1.0;  // two-sided
  std::size_t n_effective = 0;
  double r = 0.0;  // z / sqrt(N), N = number of pairs
  bool exact = false;
  bool all_zero = false;
};

inline constexpr std::size_t kExactWilcoxonMax = 20;

/// Midranks of |d| (1-based), ties share the mean rank.
inline std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Two-sided signed-rank test of paired samples. Zero differences are
/// dropped. Exact null distribution (counted over all 2^n sign patterns by
/// dynamic programming on doubled ranks) when n <= 20, otherwise the
/// tie-corrected normal approximation with continuity correction.
inline TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("wilcoxon: samples must have equal length");
  if (x.size() < 2) throw std::invalid_argument("wilcoxon: need at least two pairs");
  TestResult res;
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] - y[i] != 0.0) d.push_back(x[i] - y[i]);
  res.n_effective = d.size();
  if (d.empty()) {
    res.all_zero = true;
    return res;
  }
  const std::size_t n = d.size();
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(d[i]);
  const auto ranks = midranks(mag);
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < n; ++i) (d[i] > 0 ? w_plus : w_minus) += ranks[i];
  res.w = std::min(w_plus, w_minus);

  const double nn = static_cast<double>(n);
  const double mu = nn * (nn + 1.0) / 4.0;
  double tie_term = 0.0;
  {
    auto sorted = mag;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
  }
  const double sigma = std::sqrt(nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0);
  const double diff = res.w - mu;
  const double cc = diff < 0 ? 0.5 : 0.0;
  res.z = sigma > 0 ? std::abs((diff + cc) / sigma) : 0.0;
  res.r = res.z / std::sqrt(static_cast<double>(x.size()));

  if (n <= kExactWilcoxonMax) {
    // Doubled midranks are integers.
    std::vector<std::size_t> r2(n);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r2[i] = static_cast<std::size_t>(std::llround(2.0 * ranks[i]));
      total += r2[i];
    }
    std::vector<double> count(total + 1, 0.0);
    count[0] = 1.0;
    std::size_t reach = 0;
    for (auto v : r2) {
      for (std::size_t s = reach + 1; s-- > 0;)
        if (count[s] != 0.0) count[s + v] += count[s];
      reach += v;
    }
    const auto w2 = static_cast<std::size_t>(std::llround(2.0 * res.w));
    double le = 0.0;
    for (std::size_t s = 0; s <= w2 && s <= total; ++s) le += count[s];
    res.p = std::min(1.0, 2.0 * le / std::ldexp(1.0, static_cast<int>(n)));
    res.exact = true;
  } else {
    res.p = std::min(1.0, std::erfc(res.z / std::sqrt(2.0)));
  }
  return res;
}

inline TestResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y) {
  return wilcoxon_signed_rank(std::span<const double>(x), std::span<const double>(y));
}

}  // namespace preempt::stats
