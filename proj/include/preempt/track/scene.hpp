#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "preempt/core/hand.hpp"
#include "preempt/core/types.hpp"

namespace preempt::track {

enum class BlockState : std::uint8_t { Resting, Candidate, Placed };

inline constexpr std::string_view state_name(BlockState s) {
  switch (s) {
    case BlockState::Resting: return "resting";
    case BlockState::Candidate: return "candidate";
    case BlockState::Placed: return "placed";
  }
  return "?";
}

inline BlockState state_from_name(std::string_view s) {
  if (s == "resting") return BlockState::Resting;
  if (s == "candidate") return BlockState::Candidate;
  if (s == "placed") return BlockState::Placed;
  throw DataError("unknown block state: " + std::string(s));
}

struct Block {
  BlockId id;
  Color color = Color::Red;
  BBox bbox;
  BlockState state = BlockState::Resting;
  std::optional<std::int64_t> last_touch;

  friend bool operator==(const Block&, const Block&) = default;
};

/// Axis-aligned rectangle on the base plate in which placements count.
struct AssemblyRegion {
  Point center{360.0, 360.0};
  double width = 95.0;
  double height = 60.0;

  friend bool operator==(const AssemblyRegion&, const AssemblyRegion&) = default;

  bool contains(Point p) const {
    return std::abs(p.x - center.x) <= width / 2 && std::abs(p.y - center.y) <= height / 2;
  }
  void validate() const {
    if (width <= 0 || height <= 0 || center.x - width / 2 < 0 || center.y - height / 2 < 0 ||
        center.x + width / 2 >= kCropSize || center.y + height / 2 >= kCropSize)
      throw ConfigError("assembly region must lie inside the 720x720 crop");
  }
};

struct PlacementRecord {
  Color color = Color::Red;
  BlockId block;
  std::int64_t frame = 0;
  friend bool operator==(const PlacementRecord&, const PlacementRecord&) = default;
};

struct RemovalRecord {
  BlockId block;
  std::int64_t frame = 0;
  friend bool operator==(const RemovalRecord&, const RemovalRecord&) = default;
};

struct PlacementEvent {
  BlockId block;
  Color color = Color::Red;
  std::int64_t frame = 0;
  bool correct = false;
  friend bool operator==(const PlacementEvent&, const PlacementEvent&) = default;
};

struct BlockObservation {
  BlockId id;
  BBox bbox;
  bool present = true;
};

struct TrackerConfig {
  std::int64_t candidate_timeout = 30;  // frames
};

/// Symbolic task state. Values are snapshots: update_scene never mutates
/// its input.
struct SceneState {
  std::vector<Block> blocks;
  AssemblyRegion region;
  std::optional<BlockId> last_interacted;
  std::vector<PlacementRecord> placed_sequence;  // every placement, append-only
  std::vector<RemovalRecord> removals;
  std::vector<Color> target;
  int next_required_index = 0;
  std::optional<std::int64_t> last_frame;

  friend bool operator==(const SceneState&, const SceneState&) = default;

  const Block& block(BlockId id) const {
    for (const auto& b : blocks)
      if (b.id == id) return b;
    throw DataError("unknown block id " + std::to_string(id.value));
  }
  Block& block(BlockId id) { return const_cast<Block&>(std::as_const(*this).block(id)); }

  std::optional<Color> required_color() const {
    if (next_required_index >= static_cast<int>(target.size())) return std::nullopt;
    return target[static_cast<std::size_t>(next_required_index)];
  }
  std::size_t placed_count() const {
    return static_cast<std::size_t>(std::count_if(
        blocks.begin(), blocks.end(), [](const Block& b) { return b.state == BlockState::Placed; }));
  }
  bool complete() const { return placed_count() == blocks.size(); }
};

inline void validate_target(const std::vector<Color>& target) {
  if (target.size() != kNumColors) throw DataError("target must list all 7 colors");
  std::array<bool, kNumColors> seen{};
  for (Color c : target) {
    if (seen[static_cast<std::size_t>(color_index(c))]) throw DataError("target repeats a color");
    seen[static_cast<std::size_t>(color_index(c))] = true;
  }
}

/// Initial scene: every block resting at its observed position.
inline SceneState make_scene(std::vector<Block> blocks, std::vector<Color> target,
                             AssemblyRegion region = {}) {
  validate_target(target);
  region.validate();
  if (blocks.size() != kNumColors) throw DataError("scene needs exactly 7 blocks");
  for (const auto& b : blocks)
    if (b.bbox.w <= 0 || b.bbox.h <= 0) throw DataError("block bbox must have positive size");
  SceneState s;
  s.blocks = std::move(blocks);
  s.region = region;
  s.target = std::move(target);
  return s;
}

/// Returns the block whose box contains a fingertip. Ties go to the
/// smallest fingertip-to-center distance, then to the lower color index.
inline std::optional<BlockId> detect_touch(const PoseFrame& frame, std::span<const Block> blocks) {
  const auto tips = hand::fingertip_indices(frame.size());
  std::optional<BlockId> best;
  double best_dist = std::numeric_limits<double>::infinity();
  int best_color = kNumColors;
  for (const auto& b : blocks) {
    double d = std::numeric_limits<double>::infinity();
    for (auto i : tips) {
      const Point p = frame.keypoints[i];
      if (b.bbox.contains(p)) d = std::min(d, distance(p, b.bbox.center()));
    }
    if (!std::isfinite(d)) continue;
    if (d < best_dist || (d == best_dist && color_index(b.color) < best_color)) {
      best = b.id;
      best_dist = d;
      best_color = color_index(b.color);
    }
  }
  return best;
}

inline bool any_tip_inside(const PoseFrame& frame, const BBox& box) {
  for (auto i : hand::fingertip_indices(frame.size()))
    if (box.contains(frame.keypoints[i])) return true;
  return false;
}

/// Advances the state machine by one frame.
///
/// Transition order within a frame: box update, removals (Placed blocks
/// whose center left the region), touch, at most one release-placement,
/// candidate timeouts. Touches on Placed blocks are ignored because the
/// hand necessarily overlaps the stack while placing on top of it.
inline std::pair<SceneState, std::optional<PlacementEvent>> update_scene(
    const SceneState& state, const PoseFrame& frame, std::span<const BlockObservation> boxes,
    const TrackerConfig& cfg = {}) {
  validate_frame(frame);
  if (state.last_frame && frame.t <= *state.last_frame)
    throw DataError("non-monotonic frame index " + std::to_string(frame.t) + " after " +
                    std::to_string(*state.last_frame));

  SceneState next = state;
  next.last_frame = frame.t;
  const std::int64_t t = frame.t;

  for (auto& b : next.blocks) {
    auto it = std::find_if(boxes.begin(), boxes.end(),
                           [&](const BlockObservation& o) { return o.id == b.id; });
    if (it == boxes.end())
      throw DataError("frame " + std::to_string(t) + ": missing box for block " +
                      std::to_string(b.id.value));
    if (it->present) {
      if (!(it->bbox.w > 0 && it->bbox.h > 0))
        throw DataError("frame " + std::to_string(t) + ": degenerate box");
      b.bbox = it->bbox;
    }
  }

  for (auto& b : next.blocks) {
    if (b.state == BlockState::Placed && !next.region.contains(b.bbox.center())) {
      b.state = BlockState::Resting;
      next.removals.push_back({b.id, t});
    }
  }

  std::vector<Block> touchable;
  for (const auto& b : next.blocks)
    if (b.state != BlockState::Placed) touchable.push_back(b);
  const auto touched = detect_touch(frame, touchable);
  if (touched) {
    auto& b = next.block(*touched);
    next.last_interacted = b.id;
    b.last_touch = t;
    if (b.state == BlockState::Resting) b.state = BlockState::Candidate;
  }

  std::optional<PlacementEvent> event;
  for (auto& b : next.blocks) {
    if (b.state != BlockState::Candidate) continue;
    if (!next.region.contains(b.bbox.center()) || any_tip_inside(frame, b.bbox)) continue;
    b.state = BlockState::Placed;
    const auto required = next.required_color();
    event = PlacementEvent{b.id, b.color, t, required && *required == b.color};
    next.placed_sequence.push_back({b.color, b.id, t});
    if (event->correct) ++next.next_required_index;
    if (next.last_interacted == b.id) next.last_interacted.reset();
    break;
  }

  for (auto& b : next.blocks) {
    if (b.state != BlockState::Candidate || next.region.contains(b.bbox.center())) continue;
    if (touched == b.id) continue;
    if (b.last_touch && t - *b.last_touch >= cfg.candidate_timeout) {
      b.state = BlockState::Resting;
      if (next.last_interacted == b.id) next.last_interacted.reset();
    }
  }
  return {std::move(next), event};
}

/// Colors of every placement event, optionally dropping placements whose
/// block was later removed from the region.
inline std::vector<Color> placed_colors(const std::vector<PlacementRecord>& placed,
                                        const std::vector<RemovalRecord>& removals,
                                        bool exclude_removed) {
  std::vector<Color> out;
  for (const auto& p : placed) {
    if (exclude_removed) {
      const bool removed = std::any_of(removals.begin(), removals.end(), [&](const RemovalRecord& r) {
        return r.block == p.block && r.frame > p.frame;
      });
      if (removed) continue;
    }
    out.push_back(p.color);
  }
  return out;
}

}  // namespace preempt::track
