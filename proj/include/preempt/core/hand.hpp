#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "preempt/core/types.hpp"

namespace preempt::hand {

// 21-landmark hand numbering: 0 wrist, then four joints per finger from
// base to tip (thumb 1-4, index 5-8, middle 9-12, ring 13-16, pinky 17-20).
inline constexpr std::size_t kLandmarksPerHand = 21;
inline constexpr std::array<std::size_t, 5> kTipLandmarks = {4, 8, 12, 16, 20};
inline constexpr std::size_t kIndexTip = 8;

/// Keypoint indices treated as fingertips for a session with K keypoints.
inline std::vector<std::size_t> fingertip_indices(std::size_t k) {
  if (k == 1) return {0};
  if (k != 21 && k != 42) throw DataError("unsupported keypoint count " + std::to_string(k));
  std::vector<std::size_t> tips;
  for (std::size_t h = 0; h < k / kLandmarksPerHand; ++h)
    for (auto tip : kTipLandmarks) tips.push_back(h * kLandmarksPerHand + tip);
  return tips;
}

/// Index of the keypoint used as the single "pointer" fingertip (the
/// index-finger tip of the first hand).
inline std::size_t primary_tip(std::size_t k) { return k == 1 ? 0 : kIndexTip; }

/// Undirected skeleton edges: wrist to every finger base and chains
/// along each finger. No edges between hands.
inline std::vector<std::pair<std::size_t, std::size_t>> skeleton_edges(std::size_t k) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  if (k == 1) return edges;
  for (std::size_t h = 0; h < k / kLandmarksPerHand; ++h) {
    const std::size_t o = h * kLandmarksPerHand;
    for (std::size_t finger = 0; finger < 5; ++finger) {
      const std::size_t base = 1 + 4 * finger;
      edges.emplace_back(o, o + base);
      for (std::size_t j = 0; j < 3; ++j) edges.emplace_back(o + base + j, o + base + j + 1);
    }
  }
  return edges;
}

/// Rigid right-hand template, wrist-relative offsets in pixels with the
/// fingers pointing up the image (negative y).
inline constexpr std::array<Point, kLandmarksPerHand> kRightHandTemplate = {{
    {0, 0},                                                  // wrist
    {-18, -10}, {-30, -25}, {-38, -40}, {-42, -52},          // thumb
    {-15, -45}, {-18, -65}, {-19, -80}, {-19, -92},          // index
    {0, -48},   {0, -70},   {0, -85},   {0, -97},            // middle
    {14, -45},  {16, -64},  {17, -77},  {18, -87},           // ring
    {26, -38},  {31, -52},  {34, -62},  {36, -71},           // pinky
}};

/// Wrist position that puts the template's index tip at `tip`.
inline Point wrist_for_index_tip(Point tip) { return tip - kRightHandTemplate[kIndexTip]; }
inline Point index_tip_for_wrist(Point wrist) { return wrist + kRightHandTemplate[kIndexTip]; }

}  // namespace preempt::hand
