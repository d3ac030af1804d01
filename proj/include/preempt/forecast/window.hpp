#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "preempt/core/types.hpp"
#include "preempt/nn/tensor.hpp"
#include "preempt/track/scene.hpp"

namespace preempt::forecast {

// Model-space units: positions divided by the crop size; velocities in
// crop widths per second.
inline constexpr double kPositionScale = 1.0 / kCropSize;
inline constexpr double kVelocityScale = static_cast<double>(kFps) / kCropSize;
inline constexpr std::size_t kFeaturesPerKeypoint = 4;  // x, y, vx, vy

/// Consecutive pose frames with constant K.
struct PoseWindow {
  std::vector<PoseFrame> frames;

  std::size_t length() const { return frames.size(); }
  std::size_t keypoints() const { return frames.empty() ? 0 : frames.front().size(); }
  const PoseFrame& last() const { return frames.back(); }

  void validate(std::size_t expected_length) const {
    if (frames.size() != expected_length)
      throw DataError("pose window has " + std::to_string(frames.size()) + " frames, expected " +
                      std::to_string(expected_length));
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (frames[i].size() != keypoints()) throw DataError("pose window mixes keypoint counts");
      if (i > 0 && frames[i].t != frames[i - 1].t + 1) throw DataError("pose window frames not contiguous");
    }
  }

  /// [T x K x 4] model-space features.
  nn::Tensor to_tensor() const {
    const std::size_t t_len = frames.size(), k = keypoints();
    nn::Tensor out({t_len, k, kFeaturesPerKeypoint});
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t i = 0; i < k; ++i) {
        double* d = out.ptr() + (t * k + i) * kFeaturesPerKeypoint;
        d[0] = frames[t].keypoints[i].x * kPositionScale;
        d[1] = frames[t].keypoints[i].y * kPositionScale;
        d[2] = frames[t].velocities[i].x * kVelocityScale;
        d[3] = frames[t].velocities[i].y * kVelocityScale;
      }
    return out;
  }

  /// [T x K x 2] model-space positions.
  nn::Tensor positions_tensor() const {
    const std::size_t t_len = frames.size(), k = keypoints();
    nn::Tensor out({t_len, k, 2});
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t i = 0; i < k; ++i) {
        out[(t * k + i) * 2] = frames[t].keypoints[i].x * kPositionScale;
        out[(t * k + i) * 2 + 1] = frames[t].keypoints[i].y * kPositionScale;
      }
    return out;
  }
};

/// Builds future frames t0+1..t0+n from predicted pixel positions,
/// velocities by backward difference starting from `anchor`.
inline PoseWindow window_from_positions(const PoseFrame& anchor, const std::vector<std::vector<Point>>& positions) {
  PoseWindow w;
  const PoseFrame* prev = &anchor;
  for (std::size_t j = 0; j < positions.size(); ++j) {
    w.frames.push_back(make_frame(anchor.t + static_cast<std::int64_t>(j) + 1, positions[j], prev));
    prev = &w.frames.back();
  }
  return w;
}

/// Seven color-ordered slots of (present, cx, cy, w, h), coordinates in
/// [0, 1]. Absent slots are all zero.
struct SceneEncoding {
  static constexpr std::size_t kSlotWidth = 5;
  static constexpr std::size_t kLength = kNumColors * kSlotWidth;
  std::array<double, kLength> values{};

  nn::Tensor to_tensor() const { return nn::Tensor({kLength}, std::vector<double>(values.begin(), values.end())); }

  /// Same encoding with slot i moved to slot perm[i].
  SceneEncoding permuted(const std::array<int, kNumColors>& perm) const {
    SceneEncoding out;
    for (std::size_t i = 0; i < kNumColors; ++i)
      for (std::size_t j = 0; j < kSlotWidth; ++j)
        out.values[static_cast<std::size_t>(perm[i]) * kSlotWidth + j] = values[i * kSlotWidth + j];
    return out;
  }
};

inline SceneEncoding encode_scene(const std::vector<track::Block>& blocks) {
  SceneEncoding e;
  for (const auto& b : blocks) {
    const std::size_t s = static_cast<std::size_t>(color_index(b.color)) * SceneEncoding::kSlotWidth;
    e.values[s] = 1.0;
    e.values[s + 1] = b.bbox.cx * kPositionScale;
    e.values[s + 2] = b.bbox.cy * kPositionScale;
    e.values[s + 3] = b.bbox.w * kPositionScale;
    e.values[s + 4] = b.bbox.h * kPositionScale;
  }
  return e;
}

inline SceneEncoding encode_scene(const track::SceneState& s) { return encode_scene(s.blocks); }

}  // namespace preempt::forecast
