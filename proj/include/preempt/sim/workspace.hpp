#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "preempt/core/hand.hpp"
#include "preempt/core/types.hpp"
#include "preempt/track/scene.hpp"

namespace preempt::sim {

inline constexpr double kBlockSize = 44.0;
inline constexpr Point kPlateCenter{360.0, 360.0};
inline constexpr double kSlotRadius = 210.0;
inline constexpr Point kRightHome{500.0, 640.0};  // wrist
inline constexpr Point kLeftIdle{210.0, 650.0};   // wrist

/// Seven resting slots on the far half-circle around the plate. Block id i
/// always starts in slot i; the color at each slot varies per trial.
struct Layout {
  std::array<Point, kNumColors> slots{};
  std::array<Color, kNumColors> colors = kAllColors;

  friend bool operator==(const Layout&, const Layout&) = default;

  std::size_t slot_of(Color c) const {
    return static_cast<std::size_t>(std::find(colors.begin(), colors.end(), c) - colors.begin());
  }
};

inline std::array<Point, kNumColors> default_slots() {
  std::array<Point, kNumColors> s{};
  for (int i = 0; i < kNumColors; ++i) {
    const double a = (180.0 + 30.0 * i) * std::numbers::pi / 180.0;
    s[static_cast<std::size_t>(i)] = {kPlateCenter.x + kSlotRadius * std::cos(a),
                                      kPlateCenter.y + kSlotRadius * std::sin(a)};
  }
  return s;
}

inline Layout random_layout(std::mt19937_64& rng) {
  Layout l;
  l.slots = default_slots();
  std::shuffle(l.colors.begin(), l.colors.end(), rng);
  return l;
}

inline std::vector<Color> random_target(std::mt19937_64& rng) {
  std::vector<Color> t(kAllColors.begin(), kAllColors.end());
  std::shuffle(t.begin(), t.end(), rng);
  return t;
}

inline BBox block_box(Point center) { return {center.x, center.y, kBlockSize, kBlockSize}; }

inline std::vector<track::Block> initial_blocks(const Layout& l) {
  std::vector<track::Block> b;
  for (std::size_t i = 0; i < l.slots.size(); ++i)
    b.push_back({BlockId{static_cast<int>(i)}, l.colors[i], block_box(l.slots[i]), track::BlockState::Resting, {}});
  return b;
}

/// Full pose for K keypoints. The right hand follows `right_wrist`, the
/// left (mirrored template) follows `left_wrist`; K=1 is the right index
/// tip alone. Each emitted point gets isotropic Gaussian jitter.
inline std::vector<Point> synth_pose(Point right_wrist, Point left_wrist, std::size_t k, double sigma,
                                     std::mt19937_64& rng) {
  if (!is_supported_keypoint_count(k)) throw DataError("unsupported keypoint count " + std::to_string(k));
  std::normal_distribution<double> n(0.0, 1.0);
  auto jitter = [&] { return sigma > 0 ? Point{sigma * n(rng), sigma * n(rng)} : Point{}; };
  std::vector<Point> out;
  out.reserve(k);
  if (k == 1) {
    out.push_back(hand::index_tip_for_wrist(right_wrist) + jitter());
    return out;
  }
  for (const auto& o : hand::kRightHandTemplate) out.push_back(right_wrist + o + jitter());
  if (k == 42)
    for (const auto& o : hand::kRightHandTemplate) out.push_back(left_wrist + Point{-o.x, o.y} + jitter());
  return out;
}

/// Pose frames along a wrist path, left hand idle. Velocities by backward
/// difference.
inline std::vector<PoseFrame> synth_hand(const std::vector<Point>& wrists, std::size_t k, double sigma,
                                         std::uint64_t seed, std::int64_t t0 = 0) {
  std::mt19937_64 rng(seed);
  std::vector<PoseFrame> frames;
  frames.reserve(wrists.size());
  for (std::size_t i = 0; i < wrists.size(); ++i) {
    auto kp = synth_pose(wrists[i], kLeftIdle, k, sigma, rng);
    frames.push_back(make_frame(t0 + static_cast<std::int64_t>(i), std::move(kp), frames.empty() ? nullptr : &frames.back()));
  }
  return frames;
}

inline double quantize(double v) { return std::round(v * 100.0) / 100.0; }
inline Point quantize(Point p) { return {quantize(p.x), quantize(p.y)}; }

}  // namespace preempt::sim
