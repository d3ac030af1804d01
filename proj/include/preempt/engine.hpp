#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "preempt/act/policy.hpp"
#include "preempt/forecast/model.hpp"
#include "preempt/track/scene.hpp"

namespace preempt {

struct EngineConfig {
  act::FeedbackCondition condition;
  track::TrackerConfig tracker;
  act::PolicyConfig policy;
  bool emit_forecast = false;        // forecast every frame once the history is full
  bool record_anticipations = false; // anticipate even when timing is not predictive
};

struct StepResult {
  std::int64_t t = 0;
  std::optional<track::PlacementEvent> placement;
  std::optional<forecast::Anticipation> anticipation;
  std::optional<act::FeedbackEvent> feedback;
  std::optional<forecast::PoseWindow> forecast;
};

/// Replaces the forecaster's anticipation (oracle experiments).
using AnticipationOverride =
    std::function<std::optional<forecast::Anticipation>(const track::SceneState&, std::int64_t t)>;

/// Per-session Track -> Forecast -> Act loop. Not shareable; one engine
/// per session.
class Engine {
 public:
  Engine(forecast::ForecastModel model, track::SceneState initial, EngineConfig cfg)
      : model_(std::move(model)), state_(std::move(initial)), cfg_(cfg) {
    if (!model_.loaded()) throw ConfigError("engine needs a loaded forecaster");
  }

  void set_anticipation_override(AnticipationOverride f) { override_ = std::move(f); }

  StepResult step(const PoseFrame& frame, std::span<const track::BlockObservation> boxes) {
    if (frame.size() != model_.keypoints())
      throw DataError("frame " + std::to_string(frame.t) + " has K=" + std::to_string(frame.size()) +
                      ", session expects " + std::to_string(model_.keypoints()));
    auto [next, placement] = track::update_scene(state_, frame, boxes, cfg_.tracker);
    state_ = std::move(next);

    if (!history_.frames.empty() && history_.last().t + 1 != frame.t) history_.frames.clear();
    history_.frames.push_back(frame);
    if (history_.frames.size() > static_cast<std::size_t>(kHistoryFrames))
      history_.frames.erase(history_.frames.begin());
    const bool full = history_.frames.size() == static_cast<std::size_t>(kHistoryFrames);

    StepResult r;
    r.t = frame.t;
    r.placement = placement;
    const bool want_anticipation =
        cfg_.condition.timing == act::Timing::Predictive || cfg_.record_anticipations;

    if (full && cfg_.emit_forecast) r.forecast = model_.forecast(history_, forecast::encode_scene(state_));
    if (want_anticipation) {
      if (override_) {
        r.anticipation = override_(state_, frame.t);
      } else if (model_.variant() == forecast::Variant::InstantPlacement) {
        r.anticipation = forecast::instant_placement_predict(state_);
      } else if (full && state_.last_interacted) {
        if (!r.forecast) r.forecast = model_.forecast(history_, forecast::encode_scene(state_));
        r.anticipation = forecast::anticipate_from_forecast(state_, *r.forecast);
      }
    }
    r.feedback = act::decide(cfg_.condition, state_, r.anticipation, r.placement, policy_, cfg_.policy);
    return r;
  }

  const track::SceneState& state() const { return state_; }
  const forecast::ForecastModel& model() const { return model_; }
  const EngineConfig& config() const { return cfg_; }

 private:
  forecast::ForecastModel model_;
  track::SceneState state_;
  EngineConfig cfg_;
  act::PolicyState policy_;
  forecast::PoseWindow history_;
  AnticipationOverride override_;
};

}  // namespace preempt
