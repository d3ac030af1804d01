#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "preempt/act/policy.hpp"
#include "preempt/forecast/model.hpp"
#include "preempt/sim/workspace.hpp"
#include "preempt/track/scene.hpp"

namespace preempt::sim {

inline constexpr int kLogVersion = 1;

struct BlockRecord {
  BlockId id;
  Color color = Color::Red;
  BBox bbox;
  track::BlockState state = track::BlockState::Resting;
  bool present = true;
  friend bool operator==(const BlockRecord&, const BlockRecord&) = default;
};

struct FrameRecord {
  std::int64_t t = 0;
  std::vector<Point> keypoints;
  std::vector<BlockRecord> blocks;
  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;

  std::vector<track::BlockObservation> observations() const {
    std::vector<track::BlockObservation> o;
    o.reserve(blocks.size());
    for (const auto& b : blocks) o.push_back({b.id, b.bbox, b.present});
    return o;
  }
};

/// Everything needed to recompute a trial's metrics and to replay it.
struct TrialLog {
  int version = kLogVersion;
  std::size_t keypoints = 42;
  act::FeedbackCondition condition;
  std::string forecaster = "none";
  std::uint64_t seed = 0;
  double p_err = 0.0;
  Layout layout;
  std::vector<Color> target;
  std::vector<FrameRecord> frames;  // empty in study logs
  std::vector<track::PlacementEvent> placements;
  std::vector<track::RemovalRecord> removals;
  std::vector<act::FeedbackEvent> feedback;
  std::vector<forecast::Anticipation> anticipations;  // first per (block, step)
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  bool completed = false;

  friend bool operator==(const TrialLog&, const TrialLog&) = default;
};

/// Rebuilds the tracker's placement sequence from the log.
inline std::vector<track::PlacementRecord> placement_records(const TrialLog& log) {
  std::vector<track::PlacementRecord> out;
  for (const auto& p : log.placements) out.push_back({p.color, p.block, p.frame});
  return out;
}

/// Pose frames of a logged trial, velocities by backward difference
/// (zero at the first frame and after a gap).
inline std::vector<PoseFrame> pose_frames(const TrialLog& log) {
  std::vector<PoseFrame> out;
  out.reserve(log.frames.size());
  for (const auto& f : log.frames) {
    const PoseFrame* prev = (!out.empty() && out.back().t + 1 == f.t) ? &out.back() : nullptr;
    out.push_back(make_frame(f.t, f.keypoints, prev));
  }
  return out;
}

}  // namespace preempt::sim
