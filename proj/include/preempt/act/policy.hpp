#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "preempt/core/types.hpp"
#include "preempt/forecast/model.hpp"
#include "preempt/track/scene.hpp"

namespace preempt::act {

enum class Timing : std::uint8_t { None, Reactive, Predictive };
enum class Modality : std::uint8_t { Audio, Visual, AudioVisual };
enum class FeedbackKind : std::uint8_t { Predictive, Reactive };

inline constexpr std::string_view timing_name(Timing t) {
  switch (t) {
    case Timing::None: return "none";
    case Timing::Reactive: return "reactive";
    case Timing::Predictive: return "predictive";
  }
  return "?";
}

inline constexpr std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::Audio: return "audio";
    case Modality::Visual: return "visual";
    case Modality::AudioVisual: return "audiovisual";
  }
  return "?";
}

inline Modality modality_from_name(std::string_view s) {
  for (auto m : {Modality::Audio, Modality::Visual, Modality::AudioVisual})
    if (modality_name(m) == s) return m;
  throw DataError("unknown modality: " + std::string(s));
}

inline constexpr std::string_view kind_name(FeedbackKind k) {
  return k == FeedbackKind::Predictive ? "predictive" : "reactive";
}

inline FeedbackKind kind_from_name(std::string_view s) {
  if (s == "predictive") return FeedbackKind::Predictive;
  if (s == "reactive") return FeedbackKind::Reactive;
  throw DataError("unknown feedback kind: " + std::string(s));
}

/// Study condition. Modality is carried as metadata and is Audio
/// (ignored) when timing is None.
struct FeedbackCondition {
  Timing timing = Timing::None;
  Modality modality = Modality::Audio;

  friend bool operator==(const FeedbackCondition&, const FeedbackCondition&) = default;

  std::string name() const {
    if (timing == Timing::None) return "none";
    return std::string(timing_name(timing)) + "-" + std::string(modality_name(modality));
  }
};

inline constexpr std::array<FeedbackCondition, 7> kAllConditions = {{
    {Timing::None, Modality::Audio},
    {Timing::Reactive, Modality::Audio},
    {Timing::Reactive, Modality::Visual},
    {Timing::Reactive, Modality::AudioVisual},
    {Timing::Predictive, Modality::Audio},
    {Timing::Predictive, Modality::Visual},
    {Timing::Predictive, Modality::AudioVisual},
}};

inline FeedbackCondition condition_from_name(std::string_view s) {
  for (const auto& c : kAllConditions)
    if (c.name() == s) return c;
  throw ConfigError("unknown feedback condition: " + std::string(s));
}

inline int condition_index(const FeedbackCondition& c) {
  for (std::size_t i = 0; i < kAllConditions.size(); ++i)
    if (kAllConditions[i] == c) return static_cast<int>(i);
  return -1;
}

struct FeedbackEvent {
  std::int64_t frame = 0;
  FeedbackKind kind = FeedbackKind::Predictive;
  Modality modality = Modality::Audio;
  Color expected = Color::Red;
  Color offending = Color::Red;
  BlockId trigger_block;

  friend bool operator==(const FeedbackEvent&, const FeedbackEvent&) = default;
};

struct PolicyConfig {
  std::int64_t cooldown_frames = 15;
};

/// Per-session re-alert bookkeeping for predictive timing.
struct PolicyState {
  std::optional<std::int64_t> last_event_frame;
  // (block, next_required_index) of the last predictive alert; cleared as
  // soon as either the last-touched block or the step moves on.
  std::optional<std::pair<BlockId, int>> alerted;

  friend bool operator==(const PolicyState&, const PolicyState&) = default;
};

/// Act stage for one frame. Reactive emission depends only on the
/// placement event; the cooldown and dedup apply to predictive alerts.
inline std::optional<FeedbackEvent> decide(const FeedbackCondition& cond, const track::SceneState& state,
                                           const std::optional<forecast::Anticipation>& anticipation,
                                           const std::optional<track::PlacementEvent>& placement,
                                           PolicyState& ps, const PolicyConfig& cfg = {}) {
  switch (cond.timing) {
    case Timing::None: return std::nullopt;

    case Timing::Reactive: {
      if (!placement || placement->correct) return std::nullopt;
      // The index has not advanced on a wrong placement, so the state's
      // required color is the one the user should have placed.
      const auto required = state.required_color();
      if (!required) return std::nullopt;
      return FeedbackEvent{placement->frame, FeedbackKind::Reactive, cond.modality, *required, placement->color,
                           placement->block};
    }

    case Timing::Predictive: {
      if (ps.alerted) {
        const bool same = state.last_interacted == ps.alerted->first &&
                          state.next_required_index == ps.alerted->second;
        if (!same) ps.alerted.reset();
      }
      if (!anticipation) return std::nullopt;
      const auto required = state.required_color();
      if (!required) return std::nullopt;
      const auto& blk = state.block(anticipation->block);
      if (blk.color == *required) return std::nullopt;
      const std::int64_t now = state.last_frame.value_or(0);
      if (ps.last_event_frame && now - *ps.last_event_frame < cfg.cooldown_frames) return std::nullopt;
      const std::pair<BlockId, int> key{anticipation->block, state.next_required_index};
      if (ps.alerted == key) return std::nullopt;
      ps.last_event_frame = now;
      ps.alerted = key;
      return FeedbackEvent{now, FeedbackKind::Predictive, cond.modality, *required, blk.color, anticipation->block};
    }
  }
  return std::nullopt;
}

}  // namespace preempt::act
