#pragma once

#include <functional>
#include <vector>

#include "preempt/sim/dataset.hpp"
#include "preempt/stats/metrics.hpp"
#include "preempt/stats/prf.hpp"

namespace preempt::sim {

/// Micro-averaged placement-anticipation P/R/F1 of a forecaster over
/// logged trials, each replayed through a fresh engine.
inline stats::PRF evaluate_anticipation(const std::vector<const TrialLog*>& trials,
                                        const forecast::ForecastModel& model, EngineConfig ecfg = {}) {
  ecfg.record_anticipations = true;
  stats::PRF total;
  total.finalize();
  for (const auto* t : trials) {
    const auto r = replay_trial(*t, model, ecfg);
    total += stats::anticipation_prf(r.anticipations, r.placements);
  }
  return total;
}

struct CalibrationConfig {
  int trials = 200;  // no-feedback trials per evaluation
  double target = 2.70;
  double lo = 0.0, hi = 1.0;
  int iterations = 12;
  std::uint64_t seed = 0;
};

/// Mean no-feedback edit distance at `p_err`. Trial seeds do not depend on
/// p_err, so successive evaluations share their random numbers.
inline double no_feedback_edit_distance(const AgentConfig& base, double p_err, int n, std::uint64_t seed,
                                        std::size_t k = 42) {
  AgentConfig a = base;
  a.p_err = p_err;
  const auto model = forecast::ForecastModel::linear(k);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    auto spec = random_trial(act::kAllConditions[0], a, derive_seed(seed, "calibrate/" + std::to_string(i)), k);
    spec.record_frames = false;
    sum += stats::trial_metrics(run_trial(spec, model)).edit_distance;
  }
  return sum / n;
}

struct CalibrationStep {
  double p_err = 0.0;
  double edit_distance = 0.0;
};

/// Bisection on p_err for the target mean edit distance.
inline std::vector<CalibrationStep> calibrate_p_err(const AgentConfig& base, const CalibrationConfig& cfg,
                                                    const std::function<void(const CalibrationStep&)>& progress = {}) {
  std::vector<CalibrationStep> steps;
  double lo = cfg.lo, hi = cfg.hi;
  for (int it = 0; it < cfg.iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const CalibrationStep s{mid, no_feedback_edit_distance(base, mid, cfg.trials, cfg.seed)};
    steps.push_back(s);
    if (progress) progress(s);
    (s.edit_distance < cfg.target ? lo : hi) = mid;
  }
  return steps;
}

}  // namespace preempt::sim
