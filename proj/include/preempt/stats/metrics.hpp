#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "preempt/sim/trial_log.hpp"
#include "preempt/stats/edit_distance.hpp"
#include "preempt/track/scene.hpp"

namespace preempt::stats {

struct TrialMetrics {
  bool success = false;
  int edit_distance = 0;
  int feedback_count = 0;
  double efficiency = 0.0;  // correct placements per minute
  double total_time = 0.0;  // seconds

  friend bool operator==(const TrialMetrics&, const TrialMetrics&) = default;
};

/// Metrics recomputed from a complete log. Success requires every
/// placement event to be correct and all seven blocks placed; a wrong
/// placement fails the trial even if later undone.
inline TrialMetrics trial_metrics(const sim::TrialLog& log, bool exclude_removed = false) {
  if (!log.completed) throw DataError("trial log is truncated (trial did not complete)");
  if (log.end_frame < log.start_frame) throw DataError("trial log has end before start");
  TrialMetrics m;
  const auto records = sim::placement_records(log);
  const auto colors = track::placed_colors(records, log.removals, exclude_removed);
  m.edit_distance = static_cast<int>(edit_distance(colors, log.target));
  const auto correct = std::count_if(log.placements.begin(), log.placements.end(),
                                     [](const track::PlacementEvent& p) { return p.correct; });
  m.success = static_cast<std::size_t>(correct) == log.placements.size() &&
              static_cast<std::size_t>(correct) == log.target.size();
  m.feedback_count = static_cast<int>(log.feedback.size());
  m.total_time = static_cast<double>(log.end_frame - log.start_frame + 1) / kFps;
  m.efficiency = 60.0 * static_cast<double>(correct) / m.total_time;
  return m;
}

}  // namespace preempt::stats
