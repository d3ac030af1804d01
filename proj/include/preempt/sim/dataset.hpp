#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "preempt/core/rng.hpp"
#include "preempt/forecast/train.hpp"
#include "preempt/sim/trial.hpp"

namespace preempt::sim {

struct DataConfig {
  int train = 288;
  int val = 17;
  int test = 19;
  std::size_t keypoints = 42;
  int window_stride = 4;  // frames between consecutive training windows
  AgentConfig agent;
  std::uint64_t seed = 0;

  int total() const { return train + val + test; }
};

enum class Split { Train, Val, Test };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

struct Dataset {
  std::vector<TrialLog> trials;
  std::vector<Split> split;  // parallel to trials

  std::vector<const TrialLog*> of(Split s) const {
    std::vector<const TrialLog*> out;
    for (std::size_t i = 0; i < trials.size(); ++i)
      if (split[i] == s) out.push_back(&trials[i]);
    return out;
  }
};

inline std::uint64_t data_trial_seed(std::uint64_t seed, int i) {
  return derive_seed(seed, "data/trial/" + std::to_string(i));
}

/// Split label of each trial index: a seeded shuffle, first `train` to
/// training, next `val` to validation, rest to test.
inline std::vector<Split> assign_splits(const DataConfig& cfg) {
  std::vector<int> idx(static_cast<std::size_t>(cfg.total()));
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = substream(cfg.seed, "data/split");
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<Split> out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto i = static_cast<std::size_t>(idx[k]);
    out[i] = k < static_cast<std::size_t>(cfg.train)                  ? Split::Train
             : k < static_cast<std::size_t>(cfg.train + cfg.val) ? Split::Val
                                                                      : Split::Test;
  }
  return out;
}

/// One no-feedback trial of the forecasting corpus.
inline TrialLog generate_data_trial(const DataConfig& cfg, int i) {
  const auto spec = random_trial(act::kAllConditions[0], cfg.agent, data_trial_seed(cfg.seed, i), cfg.keypoints);
  return run_trial(spec, forecast::ForecastModel::linear(cfg.keypoints));
}

inline Dataset generate_dataset(const DataConfig& cfg) {
  if (cfg.train < 1 || cfg.val < 1 || cfg.test < 1) throw ConfigError("every split needs at least one trial");
  Dataset d;
  d.split = assign_splits(cfg);
  for (int i = 0; i < cfg.total(); ++i) d.trials.push_back(generate_data_trial(cfg, i));
  return d;
}

/// Sliding 30-frame windows (15 observed, 15 future) over a logged trial.
/// The scene encoding is taken at the last observed frame.
inline std::vector<forecast::Sample> trial_windows(const TrialLog& log, int stride, int offset = 0) {
  if (stride < 1) throw ConfigError("window stride must be >= 1");
  const auto poses = pose_frames(log);
  const std::size_t h = kHistoryFrames, f = kHorizonFrames;
  std::vector<forecast::Sample> out;
  for (std::size_t s = static_cast<std::size_t>(offset); s + h + f <= poses.size(); s += static_cast<std::size_t>(stride)) {
    if (poses[s + h + f - 1].t - poses[s].t != static_cast<std::int64_t>(h + f - 1)) continue;
    forecast::PoseWindow hist, fut;
    hist.frames.assign(poses.begin() + static_cast<std::ptrdiff_t>(s), poses.begin() + static_cast<std::ptrdiff_t>(s + h));
    fut.frames.assign(poses.begin() + static_cast<std::ptrdiff_t>(s + h),
                      poses.begin() + static_cast<std::ptrdiff_t>(s + h + f));
    std::vector<track::Block> blocks;
    for (const auto& b : log.frames[s + h - 1].blocks) blocks.push_back({b.id, b.color, b.bbox, b.state, {}});
    out.push_back(forecast::make_sample(hist, forecast::encode_scene(blocks), fut));
  }
  return out;
}

inline std::vector<forecast::Sample> split_windows(const Dataset& d, Split s, int stride) {
  std::vector<forecast::Sample> out;
  int i = 0;
  for (const auto* t : d.of(s)) {
    auto w = trial_windows(*t, stride, i++ % stride);
    for (auto& x : w) out.push_back(std::move(x));
  }
  return out;
}

}  // namespace preempt::sim
