#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "preempt/core/rng.hpp"
#include "preempt/sim/trial.hpp"

namespace preempt::sim {

struct StudyConfig {
  int participants = 20;
  int rounds = 2;
  double p_err_jitter = 0.1;  // per-participant p_err ~ U[p_err - j, p_err + j]
  AgentConfig agent;
  std::size_t keypoints = 42;
  std::uint64_t seed = 0;

  void validate() const {
    if (participants < 2 || rounds < 1) throw ConfigError("study needs >= 2 participants and >= 1 round");
    if (p_err_jitter < 0) throw ConfigError("p_err jitter must be >= 0");
    agent.validate();
  }
};

struct StudyTrial {
  int participant = 0;
  int round = 0;
  int order = 0;  // position within the round
  TrialLog log;
  friend bool operator==(const StudyTrial&, const StudyTrial&) = default;
};

struct StudyLog {
  StudyConfig config;
  std::string forecaster;
  std::vector<StudyTrial> trials;  // ordered by (participant, round, condition index)
};

inline AgentConfig participant_agent(const StudyConfig& cfg, int p) {
  AgentConfig a = cfg.agent;
  auto rng = substream(cfg.seed, "study/participant/" + std::to_string(p));
  const double j = std::uniform_real_distribution<double>(-cfg.p_err_jitter, cfg.p_err_jitter)(rng);
  a.p_err = std::clamp(a.p_err + j, 0.0, 1.0);
  return a;
}

inline std::uint64_t study_trial_seed(const StudyConfig& cfg, int p, int r, int c) {
  return derive_seed(cfg.seed, "study/p" + std::to_string(p) + "/r" + std::to_string(r) + "/c" + std::to_string(c));
}

/// Condition index for each position of a round.
inline std::array<int, 7> condition_order(const StudyConfig& cfg, int p, int r) {
  std::array<int, 7> o{};
  std::iota(o.begin(), o.end(), 0);
  auto rng = substream(cfg.seed, "study/order/p" + std::to_string(p) + "/r" + std::to_string(r));
  std::shuffle(o.begin(), o.end(), rng);
  return o;
}

/// Every participant does every condition once per round, in a shuffled
/// order, with a fresh target and color-to-slot assignment per trial.
inline StudyLog run_study(const StudyConfig& cfg, const forecast::ForecastModel& model,
                          const std::function<void(const StudyTrial&)>& progress = {}) {
  cfg.validate();
  StudyLog study;
  study.config = cfg;
  study.forecaster = std::string(forecast::variant_name(model.variant()));
  for (int p = 0; p < cfg.participants; ++p) {
    const AgentConfig agent = participant_agent(cfg, p);
    for (int r = 0; r < cfg.rounds; ++r) {
      const auto order = condition_order(cfg, p, r);
      std::vector<StudyTrial> round;
      for (int pos = 0; pos < 7; ++pos) {
        const int c = order[static_cast<std::size_t>(pos)];
        auto spec = random_trial(act::kAllConditions[static_cast<std::size_t>(c)], agent,
                                 study_trial_seed(cfg, p, r, c), cfg.keypoints);
        spec.record_frames = false;
        StudyTrial t{p, r, pos, run_trial(spec, model)};
        if (progress) progress(t);
        round.push_back(std::move(t));
      }
      std::sort(round.begin(), round.end(), [](const StudyTrial& a, const StudyTrial& b) {
        return act::condition_index(a.log.condition) < act::condition_index(b.log.condition);
      });
      for (auto& t : round) study.trials.push_back(std::move(t));
    }
  }
  return study;
}

}  // namespace preempt::sim
