#pragma once

#include <cstddef>
#include <vector>

#include "preempt/core/hand.hpp"
#include "preempt/forecast/window.hpp"
#include "preempt/nn/graph.hpp"

namespace preempt::forecast {

inline constexpr double kPoseWeight = 0.1;     // beta
inline constexpr double kSmoothWeight = 0.05;  // lambda

struct LossBreakdown {
  double l_tip = 0.0;
  double l_pose = 0.0;
  double l_smooth = 0.0;
  double total = 0.0;
};

inline double combine(double l_tip, double l_pose, double l_smooth) {
  return l_tip + kPoseWeight * l_pose + kSmoothWeight * l_smooth;
}

/// w_t = t / sum(1..H), t = 1..H.
inline std::vector<double> horizon_weights(std::size_t horizon) {
  std::vector<double> w(horizon);
  const double denom = static_cast<double>(horizon * (horizon + 1)) / 2.0;
  for (std::size_t t = 0; t < horizon; ++t) w[t] = static_cast<double>(t + 1) / denom;
  return w;
}

/// Loss between two future windows, in normalized (crop = 1) units.
/// l_smooth compares the H-1 within-window velocity sequences.
inline LossBreakdown loss(const PoseWindow& pred, const PoseWindow& truth) {
  if (pred.length() != truth.length() || pred.keypoints() != truth.keypoints() || pred.length() < 2)
    throw std::invalid_argument("loss: shape mismatch between prediction and truth");
  const std::size_t h = pred.length(), k = pred.keypoints();
  const auto tips = hand::fingertip_indices(k);
  const auto w = horizon_weights(h);
  auto sq = [](Point a, Point b) {
    const Point d = (a - b) * kPositionScale;
    return d.x * d.x + d.y * d.y;
  };
  LossBreakdown out;
  for (std::size_t t = 0; t < h; ++t) {
    double tip = 0.0;
    for (auto i : tips) tip += sq(pred.frames[t].keypoints[i], truth.frames[t].keypoints[i]);
    out.l_tip += w[t] * tip / static_cast<double>(2 * tips.size());
    for (std::size_t i = 0; i < k; ++i) out.l_pose += sq(pred.frames[t].keypoints[i], truth.frames[t].keypoints[i]);
    if (t == 0) continue;
    for (std::size_t i = 0; i < k; ++i) {
      const Point vp = pred.frames[t].keypoints[i] - pred.frames[t - 1].keypoints[i];
      const Point vt = truth.frames[t].keypoints[i] - truth.frames[t - 1].keypoints[i];
      out.l_smooth += sq(vp, vt);
    }
  }
  out.l_pose /= static_cast<double>(h * k * 2);
  out.l_smooth /= static_cast<double>((h - 1) * k * 2);
  out.total = combine(out.l_tip, out.l_pose, out.l_smooth);
  return out;
}

struct LossVars {
  nn::Var total;
  LossBreakdown values;
};

/// Batch-mean composite loss on graph values. `pred` is a [B x H x K x 2]
/// node, `truth` a constant tensor of the same shape.
inline LossVars loss_graph(nn::Graph& g, nn::Var pred, const nn::Tensor& truth) {
  const auto& pv = g.value(pred);
  if (pv.shape() != truth.shape() || pv.rank() != 4 || pv.dim(3) != 2)
    throw std::invalid_argument("loss_graph: expected matching [B x H x K x 2] tensors");
  const std::size_t b = pv.dim(0), h = pv.dim(1), k = pv.dim(2);
  const auto tips = hand::fingertip_indices(k);
  const auto wt = horizon_weights(h);
  const double bd = static_cast<double>(b);

  nn::Tensor w_tip(pv.shape());
  for (std::size_t s = 0; s < b; ++s)
    for (std::size_t t = 0; t < h; ++t)
      for (auto i : tips)
        for (std::size_t c = 0; c < 2; ++c)
          w_tip[((s * h + t) * k + i) * 2 + c] = wt[t] / (static_cast<double>(2 * tips.size()) * bd);
  nn::Tensor w_pose(pv.shape(), 1.0 / (static_cast<double>(h * k * 2) * bd));

  auto y = g.constant(truth);
  auto l_tip = nn::weighted_sq_error(pred, y, w_tip);
  auto l_pose = nn::weighted_sq_error(pred, y, w_pose);
  auto dp = nn::time_diff(pred);
  auto dy = nn::time_diff(y);
  nn::Tensor w_smooth(g.value(dp).shape(), 1.0 / (static_cast<double>((h - 1) * k * 2) * bd));
  auto l_smooth = nn::weighted_sq_error(dp, dy, w_smooth);

  auto total = nn::add(nn::add(l_tip, nn::scale(l_pose, kPoseWeight)), nn::scale(l_smooth, kSmoothWeight));
  LossBreakdown v{g.value(l_tip)[0], g.value(l_pose)[0], g.value(l_smooth)[0], g.value(total)[0]};
  return {total, v};
}

}  // namespace preempt::forecast
