#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "preempt/forecast/model.hpp"
#include "preempt/track/scene.hpp"

namespace preempt::stats {

inline constexpr std::int64_t kMatchWindow = kHorizonFrames;

struct PRF {
  std::size_t tp = 0, fp = 0, fn = 0;
  double recall = 0.0, precision = 0.0, f1 = 0.0;
  bool undefined = false;  // some ratio was 0/0 and reported as 0

  PRF& operator+=(const PRF& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return finalize();
  }

  PRF& finalize() {
    undefined = false;
    auto ratio = [&](double a, double b) {
      if (b == 0.0) {
        undefined = true;
        return 0.0;
      }
      return a / b;
    };
    recall = ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
    precision = ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
    f1 = ratio(2.0 * precision * recall, precision + recall);
    return *this;
  }
};

/// Event-level matching: a placement is hit when an anticipation of the
/// same block predicts a frame in [P - 15, P]. Placements are visited in
/// time order and take the earliest free anticipation.
inline PRF anticipation_prf(const std::vector<forecast::Anticipation>& anticipations,
                            const std::vector<track::PlacementEvent>& placements) {
  std::vector<std::size_t> order(anticipations.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return anticipations[a].frame < anticipations[b].frame; });
  auto pl = placements;
  std::stable_sort(pl.begin(), pl.end(), [](const auto& a, const auto& b) { return a.frame < b.frame; });

  std::vector<bool> used(anticipations.size(), false);
  PRF r;
  for (const auto& p : pl) {
    bool hit = false;
    for (auto i : order) {
      const auto& a = anticipations[i];
      if (used[i] || a.block != p.block || a.frame < p.frame - kMatchWindow || a.frame > p.frame) continue;
      used[i] = true;
      hit = true;
      break;
    }
    (hit ? r.tp : r.fn)++;
  }
  r.fp = anticipations.size() - r.tp;
  return r.finalize();
}

}  // namespace preempt::stats
