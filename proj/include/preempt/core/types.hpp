#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace preempt {

// Workspace constants for the overhead 720x720 crop streamed at 15 FPS.
inline constexpr double kCropSize = 720.0;
inline constexpr int kFps = 15;
inline constexpr int kHistoryFrames = 15;
inline constexpr int kHorizonFrames = 15;
inline constexpr int kNumColors = 7;

// Error hierarchy. The CLI maps each to an exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct ProtocolError : Error {
  using Error::Error;
};

enum class Color : std::uint8_t { Red = 0, Orange, Yellow, Blue, Lime, Cyan, Pink };

inline constexpr std::array<Color, kNumColors> kAllColors = {
    Color::Red, Color::Orange, Color::Yellow, Color::Blue, Color::Lime, Color::Cyan, Color::Pink};

inline constexpr int color_index(Color c) { return static_cast<int>(c); }

inline Color color_from_index(int i) {
  if (i < 0 || i >= kNumColors) throw DataError("color index out of range: " + std::to_string(i));
  return static_cast<Color>(i);
}

inline constexpr std::string_view color_name(Color c) {
  constexpr std::array<std::string_view, kNumColors> names = {"Red",  "Orange", "Yellow", "Blue",
                                                              "Lime", "Cyan",   "Pink"};
  return names[static_cast<std::size_t>(c)];
}

inline Color color_from_name(std::string_view name) {
  for (Color c : kAllColors)
    if (color_name(c) == name) return c;
  throw DataError("unknown color name: " + std::string(name));
}

/// Stable block identifier. Distinct from Color so that a layout may
/// assign any color to any physical block.
struct BlockId {
  int value = -1;
  friend constexpr bool operator==(BlockId, BlockId) = default;
  friend constexpr auto operator<=>(BlockId, BlockId) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend constexpr bool operator==(const Point&, const Point&) = default;
  constexpr Point operator+(Point o) const { return {x + o.x, y + o.y}; }
  constexpr Point operator-(Point o) const { return {x - o.x, y - o.y}; }
  constexpr Point operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(Point a, Point b) { return (a - b).norm(); }

/// Axis-aligned box stored as center and size, in pixels.
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend constexpr bool operator==(const BBox&, const BBox&) = default;
  constexpr Point center() const { return {cx, cy}; }
  constexpr bool contains(Point p) const {
    return p.x >= cx - w / 2 && p.x <= cx + w / 2 && p.y >= cy - h / 2 && p.y <= cy + h / 2;
  }
};

/// One streamed pose observation. Keypoints and velocities share the
/// same length K, which is fixed for a whole session.
struct PoseFrame {
  std::int64_t t = 0;
  std::vector<Point> keypoints;
  std::vector<Point> velocities;

  std::size_t size() const { return keypoints.size(); }
  friend bool operator==(const PoseFrame&, const PoseFrame&) = default;
};

inline bool is_supported_keypoint_count(std::size_t k) { return k == 1 || k == 21 || k == 42; }

inline void validate_frame(const PoseFrame& f) {
  if (f.keypoints.size() != f.velocities.size())
    throw DataError("frame " + std::to_string(f.t) + ": keypoint/velocity length mismatch");
  if (!is_supported_keypoint_count(f.keypoints.size()))
    throw DataError("frame " + std::to_string(f.t) + ": unsupported keypoint count " +
                    std::to_string(f.keypoints.size()));
  for (std::size_t i = 0; i < f.keypoints.size(); ++i) {
    const auto& p = f.keypoints[i];
    const auto& v = f.velocities[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(v.x) || !std::isfinite(v.y))
      throw DataError("frame " + std::to_string(f.t) + ": non-finite keypoint " + std::to_string(i));
  }
}

/// Builds a frame whose velocities are the backward difference against
/// `previous` (zero when there is none).
inline PoseFrame make_frame(std::int64_t t, std::vector<Point> keypoints, const PoseFrame* previous) {
  PoseFrame f;
  f.t = t;
  f.velocities.resize(keypoints.size());
  if (previous && previous->keypoints.size() == keypoints.size())
    for (std::size_t i = 0; i < keypoints.size(); ++i)
      f.velocities[i] = keypoints[i] - previous->keypoints[i];
  f.keypoints = std::move(keypoints);
  return f;
}

}  // namespace preempt
