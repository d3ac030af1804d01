#pragma once

#include <algorithm>
#include <cmath>
#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "preempt/act/policy.hpp"
#include "preempt/core/hand.hpp"
#include "preempt/sim/min_jerk.hpp"
#include "preempt/sim/workspace.hpp"
#include "preempt/track/scene.hpp"

namespace preempt::sim {

// No-feedback edit distance of this p_err is 2.70 (see `preempt calibrate`).
inline constexpr double kCalibratedPErr = 0.27;

struct AgentConfig {
  double p_err = kCalibratedPErr;
  double comply_prob = 0.9;
  int response_latency = 4;  // frames
  int reach_min = 12;
  int reach_max = 22;
  int carry_min = 5;
  int carry_max = 9;
  int undo_duration = 15;
  double hesitate_prob = 0.3;
  double jitter_sigma = 1.5;

  friend bool operator==(const AgentConfig&, const AgentConfig&) = default;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(p_err) || !prob(comply_prob) || !prob(hesitate_prob)) throw ConfigError("agent probabilities must lie in [0, 1]");
    if (response_latency < 0 || undo_duration < 2 || reach_min < 2 || reach_max < reach_min || carry_min < 2 ||
        carry_max < carry_min || jitter_sigma < 0)
      throw ConfigError("agent durations must be >= 2 frames with min <= max; latency >= 0");
  }
};

/// One planned frame of the right hand. While `carry` is set the block's
/// center is pinned at tip - carry_offset.
struct PlannedFrame {
  Point tip;
  std::optional<BlockId> carry;
  Point carry_offset;
  std::optional<BlockId> arrives_in_region;  // last carry frame before a release in the region
};

/// Block centers indexed by block id.
struct WorldView {
  std::array<Point, kNumColors> centers{};
};

// Distance from a block center at which a hesitating hand hovers.
inline constexpr double kHoverGap = 60.0;

// Fingertip offsets relative to the index tip; used to keep the whole
// hand clear of obstacles during free moves.
inline std::vector<Point> fingertip_offsets() {
  std::vector<Point> o;
  for (auto i : hand::kTipLandmarks) o.push_back(hand::kRightHandTemplate[i] - hand::kRightHandTemplate[hand::kIndexTip]);
  return o;
}

/// Erring block-sequencing agent. Plans frames ahead, reacts to feedback
/// after a latency, and exposes its plan for oracle anticipation.
class Agent {
 public:
  Agent(AgentConfig cfg, Layout layout, std::vector<Color> target, std::uint64_t seed)
      : cfg_(cfg), layout_(layout), target_(std::move(target)), rng_(seed), offsets_(fingertip_offsets()) {
    cfg_.validate();
    tip_ = hand::index_tip_for_wrist(kRightHome);
    for (std::size_t i = 0; i < layout_.slots.size(); ++i) end_.centers[i] = layout_.slots[i];
  }

  Point home_tip() const { return hand::index_tip_for_wrist(kRightHome); }
  const std::deque<PlannedFrame>& plan() const { return queue_; }
  bool has_pending_reaction() const { return !reactions_.empty(); }

  /// Keeps at least `ahead` frames queued, drawing new steps as needed.
  void ensure_planned(std::size_t ahead) {
    while (queue_.size() < ahead) {
      if (!plan_step()) {
        // Nothing left to place: hold still.
        queue_.push_back({tip_, std::nullopt, {}, std::nullopt});
      }
    }
  }

  /// Rest at the current position for a number of frames.
  void idle(int frames) { append_hold(frames); }

  PlannedFrame pop() {
    PlannedFrame f = queue_.front();
    queue_.pop_front();
    current_ = f;
    return f;
  }

  void on_feedback(const act::FeedbackEvent& e) {
    reactions_.push_back({e.frame + cfg_.response_latency, e});
  }

  /// Executes reactions due at frame t. Returns true if the plan changed.
  bool react(std::int64_t t, const WorldView& world, const track::SceneState& state) {
    bool changed = false;
    while (!reactions_.empty() && reactions_.front().due <= t) {
      const auto ev = reactions_.front().event;
      reactions_.pop_front();
      changed |= respond(ev, world, state);
    }
    return changed;
  }

 private:
  struct Reaction {
    std::int64_t due;
    act::FeedbackEvent event;
  };

  double u01() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t slot_of(Color c) const { return layout_.slot_of(c); }

  /// Next color to place: the first target color not on the plate, or
  /// with probability p_err some other remaining color.
  std::optional<Color> intention() {
    std::vector<Color> remaining;
    for (Color c : target_)
      if (!in_region_end(slot_of(c))) remaining.push_back(c);
    if (remaining.empty()) return std::nullopt;
    if (forced_) {
      const Color f = *forced_;
      forced_.reset();
      if (std::find(remaining.begin(), remaining.end(), f) != remaining.end()) return f;
    }
    if (remaining.size() > 1 && u01() < cfg_.p_err)
      return remaining[1 + static_cast<std::size_t>(uniform_int(0, static_cast<int>(remaining.size()) - 2))];
    return remaining.front();
  }

  // Plate occupancy as it will be at the end of the current plan.
  bool in_region_end(std::size_t s) const { return region_.contains(end_.centers[s]); }

  // ---- path planning ----

  bool clear(Point a, Point b, bool avoid_region, std::size_t skip1, std::size_t skip2) const {
    const double len = distance(a, b);
    const int n = std::max(2, static_cast<int>(len / 4.0));
    const BBox reg{region_.center.x, region_.center.y, region_.width + 12.0, region_.height + 12.0};
    for (int i = 0; i <= n; ++i) {
      const Point p = a + (b - a) * (static_cast<double>(i) / n);
      for (const auto& o : offsets_) {
        const Point q = p + o;
        if (avoid_region && reg.contains(q)) return false;
        for (std::size_t s = 0; s < end_.centers.size(); ++s) {
          if (s == skip1 || s == skip2 || in_region_end(s)) continue;
          const BBox bb{end_.centers[s].x, end_.centers[s].y, kBlockSize + 8.0, kBlockSize + 8.0};
          if (bb.contains(q)) return false;
        }
      }
    }
    return true;
  }

  /// Shortest collision-free polyline with at most one via point.
  std::vector<Point> route(Point a, Point b, bool avoid_region, std::size_t skip1, std::size_t skip2) const {
    if (clear(a, b, avoid_region, skip1, skip2)) return {b};
    std::optional<Point> best;
    double best_len = std::numeric_limits<double>::infinity();
    for (double r : {125.0, 150.0, 175.0}) {
      for (int k = 0; k < 24; ++k) {
        const double ang = k * 15.0 * std::numbers::pi / 180.0;
        const Point v{kPlateCenter.x + r * std::cos(ang), kPlateCenter.y + r * std::sin(ang)};
        const double len = distance(a, v) + distance(v, b);
        if (len >= best_len) continue;
        if (clear(a, v, avoid_region, skip1, skip2) && clear(v, b, avoid_region, skip1, skip2)) {
          best = v;
          best_len = len;
        }
      }
    }
    if (best) return {*best, b};
    return {b};
  }

  void append_move(Point to, int frames, std::optional<BlockId> carry = {}, Point offset = {}) {
    const auto pts = min_jerk(tip_, to, std::max(frames, 2));
    for (std::size_t i = 1; i < pts.size(); ++i) queue_.push_back({pts[i], carry, offset, std::nullopt});
    tip_ = to;
  }

  void append_route(Point to, int frames, bool avoid_region, std::size_t skip1, std::size_t skip2,
                    std::optional<BlockId> carry = {}, Point offset = {}) {
    const auto legs = route(tip_, to, avoid_region, skip1, skip2);
    double total = 0.0;
    Point p = tip_;
    for (const auto& q : legs) {
      total += distance(p, q);
      p = q;
    }
    for (const auto& q : legs) {
      const double share = total > 0 ? distance(tip_, q) / total : 1.0;
      append_move(q, std::max(3, static_cast<int>(std::lround(frames * share))), carry, offset);
    }
  }

  void append_hold(int frames, std::optional<BlockId> carry = {}, Point offset = {}) {
    for (int i = 0; i < frames; ++i) queue_.push_back({tip_, carry, offset, std::nullopt});
  }

  /// Reach, grasp, carry to `dest`, release. Marks the arrival frame when
  /// the destination is in the region.
  void append_pick_and_place(std::size_t slot, Point dest, int carry_frames, bool avoid_region_on_reach) {
    const BlockId id{static_cast<int>(slot)};
    const Point grasp = end_.centers[slot] + Point{uniform(-5, 5), uniform(-5, 5)};
    append_route(grasp, uniform_int(cfg_.reach_min, cfg_.reach_max), avoid_region_on_reach, slot, slot);
    append_hold(uniform_int(1, 2));
    const Point offset = grasp - end_.centers[slot];
    append_route(dest + offset, carry_frames, false, slot, slot, id, offset);
    if (region_.contains(dest)) queue_.back().arrives_in_region = id;
    end_.centers[slot] = dest;
    // Release: pull the hand back off the block.
    const Point away = region_.contains(dest) ? Point{0, 70} : (kPlateCenter - dest) * (55.0 / distance(kPlateCenter, dest));
    append_move(tip_ + away, uniform_int(3, 5));
  }

  Point placement_point() { return kPlateCenter + Point{uniform(-8, 8), uniform(-6, 6)}; }

  /// Plans one placement step. False when every color is on the plate.
  bool plan_step() {
    const auto c = intention();
    if (!c) return false;
    const std::size_t slot = slot_of(*c);
    if (u01() < cfg_.hesitate_prob) {
      std::vector<std::size_t> others;
      for (std::size_t s = 0; s < end_.centers.size(); ++s)
        if (s != slot && !in_region_end(s)) others.push_back(s);
      if (!others.empty()) {
        const std::size_t d = others[static_cast<std::size_t>(uniform_int(0, static_cast<int>(others.size()) - 1))];
        // Hover short of the block on the plate side without touching it.
        const Point c = end_.centers[d];
        const Point dir = (kPlateCenter - c) * (1.0 / std::max(1.0, distance(kPlateCenter, c)));
        Point hover = c + dir * kHoverGap;
        for (double gap = kHoverGap; gap < 2.0 * kHoverGap && !clear(hover, hover, true, kNone, kNone); gap += 10.0)
          hover = c + dir * gap;
        append_route(hover, uniform_int(cfg_.reach_min, cfg_.reach_max), true, kNone, kNone);
        append_hold(uniform_int(2, 4));
      }
    }
    append_pick_and_place(slot, placement_point(), uniform_int(cfg_.carry_min, cfg_.carry_max), true);
    return true;
  }

  /// Replaces the remaining plan, starting from the frame just executed.
  void restart_from_current(const WorldView& world) {
    queue_.clear();
    tip_ = current_ ? current_->tip : home_tip();
    end_.centers = world.centers;
  }

  /// Puts a held or placed block back in its slot.
  void append_return(std::size_t slot, bool holding, int carry_frames) {
    const BlockId id{static_cast<int>(slot)};
    if (!holding) {
      const Point grasp = end_.centers[slot] + Point{uniform(-3, 3), uniform(-3, 3)};
      append_route(grasp, uniform_int(cfg_.reach_min, cfg_.reach_max), false, slot, slot);
      append_hold(uniform_int(1, 2));
    }
    const Point offset = holding ? current_->carry_offset : tip_ - end_.centers[slot];
    const Point dest = layout_.slots[slot];
    append_route(dest + offset, carry_frames, false, slot, slot, id, offset);
    end_.centers[slot] = dest;
    const Point away = (kPlateCenter - dest) * (55.0 / distance(kPlateCenter, dest));
    append_move(tip_ + away, uniform_int(4, 6));
  }

  bool respond(const act::FeedbackEvent& ev, const WorldView& world, const track::SceneState& state) {
    const std::size_t offending = slot_of(ev.offending);
    const std::size_t expected = slot_of(ev.expected);
    const std::optional<BlockId> held = current_ ? current_->carry : std::nullopt;

    if (ev.kind == act::FeedbackKind::Predictive) {
      if (u01() >= cfg_.comply_prob) return false;
      // Already doing the right thing.
      if (held && static_cast<std::size_t>(held->value) == expected) return false;
    }

    restart_from_current(world);
    if (held && state.block(*held).state != track::BlockState::Placed)
      append_return(static_cast<std::size_t>(held->value), true, uniform_int(cfg_.carry_min, cfg_.carry_max));
    // Undo a wrong placement that still stands.
    if (state.block(BlockId{static_cast<int>(offending)}).state == track::BlockState::Placed && offending != expected &&
        region_.contains(end_.centers[offending]))
      append_return(offending, false, cfg_.undo_duration);
    // The expected block itself may be sitting on the plate out of order.
    if (state.block(BlockId{static_cast<int>(expected)}).state == track::BlockState::Placed &&
        region_.contains(end_.centers[expected]))
      append_return(expected, false, cfg_.undo_duration);
    forced_ = ev.expected;
    return true;
  }

  AgentConfig cfg_;
  Layout layout_;
  std::vector<Color> target_;
  std::mt19937_64 rng_;
  std::vector<Point> offsets_;
  track::AssemblyRegion region_;

  std::deque<PlannedFrame> queue_;
  std::optional<PlannedFrame> current_;
  Point tip_;
  WorldView end_;                // block positions at the end of the plan
  std::optional<Color> forced_;
  std::deque<Reaction> reactions_;
};

}  // namespace preempt::sim
