#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "preempt/core/hand.hpp"
#include "preempt/forecast/stgcn.hpp"
#include "preempt/forecast/window.hpp"
#include "preempt/nn/checkpoint.hpp"
#include "preempt/track/scene.hpp"

namespace preempt::forecast {

enum class Variant { LinearExtrapolation, InstantPlacement, VanillaSTGCN, SceneAwareSTGCN };

inline constexpr std::array<Variant, 4> kAllVariants = {Variant::LinearExtrapolation, Variant::InstantPlacement,
                                                        Variant::VanillaSTGCN, Variant::SceneAwareSTGCN};

inline constexpr std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::LinearExtrapolation: return "linear";
    case Variant::InstantPlacement: return "instant";
    case Variant::VanillaSTGCN: return "vanilla";
    case Variant::SceneAwareSTGCN: return "scene-aware";
  }
  return "?";
}

inline constexpr std::string_view variant_label(Variant v) {
  switch (v) {
    case Variant::LinearExtrapolation: return "Linear extrapolation";
    case Variant::InstantPlacement: return "Instant placement";
    case Variant::VanillaSTGCN: return "Vanilla ST-GCN";
    case Variant::SceneAwareSTGCN: return "Scene-aware ST-GCN";
  }
  return "?";
}

inline Variant variant_from_name(std::string_view s) {
  for (auto v : kAllVariants)
    if (variant_name(v) == s) return v;
  throw ConfigError("unknown forecaster variant: " + std::string(s));
}

inline bool is_learned(Variant v) { return v == Variant::VanillaSTGCN || v == Variant::SceneAwareSTGCN; }

// Frames averaged for the constant-velocity baseline.
inline constexpr std::size_t kLinearVelocityFrames = 5;

/// One of the four forecasters. Learned variants share their network
/// between copies; forecast() never mutates it.
class ForecastModel {
 public:
  static ForecastModel linear(std::size_t k) { return ForecastModel(Variant::LinearExtrapolation, k); }
  static ForecastModel instant(std::size_t k) { return ForecastModel(Variant::InstantPlacement, k); }

  /// Learned variant with unloaded parameters; call initialize() or load().
  static ForecastModel learned(Variant v, StgcnConfig cfg) {
    if (!is_learned(v)) throw ConfigError("variant " + std::string(variant_name(v)) + " has no parameters");
    cfg.scene_aware = v == Variant::SceneAwareSTGCN;
    ForecastModel m(v, cfg.keypoints);
    m.net_ = std::make_shared<StgcnNet>(std::move(cfg));
    return m;
  }

  static ForecastModel make(Variant v, std::size_t k, StgcnConfig cfg = {}) {
    if (is_learned(v)) {
      cfg.keypoints = k;
      return learned(v, std::move(cfg));
    }
    return ForecastModel(v, k);
  }

  Variant variant() const { return variant_; }
  std::size_t keypoints() const { return k_; }
  bool loaded() const { return !net_ || loaded_; }

  StgcnNet& net() {
    if (!net_) throw ConfigError("variant has no network");
    return *net_;
  }
  const StgcnNet& net() const { return const_cast<ForecastModel*>(this)->net(); }

  void initialize(std::uint64_t seed) {
    net().initialize(seed);
    loaded_ = true;
  }
  void load(const std::filesystem::path& path) {
    nn::load_checkpoint(path, net().params());
    loaded_ = true;
  }
  void mark_loaded() { loaded_ = true; }
  void save(const std::filesystem::path& path) const { nn::save_checkpoint(path, net().params()); }

  /// Predicted frames t+1..t+H. Instant placement has no motion model and
  /// predicts a stationary hand.
  PoseWindow forecast(const PoseWindow& history, const SceneEncoding& scene) const {
    if (history.keypoints() != k_)
      throw DataError("history has K=" + std::to_string(history.keypoints()) + ", model expects " +
                      std::to_string(k_));
    if (!loaded()) throw ConfigError("forecaster parameters not loaded");
    const std::size_t horizon = net_ ? net_->config().horizon : static_cast<std::size_t>(kHorizonFrames);
    const PoseFrame& last = history.last();
    std::vector<std::vector<Point>> out(horizon, last.keypoints);

    switch (variant_) {
      case Variant::InstantPlacement: break;
      case Variant::LinearExtrapolation: {
        const std::size_t n = std::min(kLinearVelocityFrames, history.length());
        for (std::size_t i = 0; i < k_; ++i) {
          Point v;
          for (std::size_t f = history.length() - n; f < history.length(); ++f) v = v + history.frames[f].velocities[i];
          v = v * (1.0 / static_cast<double>(n));
          for (std::size_t j = 0; j < horizon; ++j) out[j][i] = last.keypoints[i] + v * static_cast<double>(j + 1);
        }
        break;
      }
      case Variant::VanillaSTGCN:
      case Variant::SceneAwareSTGCN: {
        history.validate(net_->config().history);
        const auto motion = history.to_tensor();
        nn::Tensor last_t({1, k_, 2});
        for (std::size_t i = 0; i < k_; ++i) {
          last_t[i * 2] = last.keypoints[i].x * kPositionScale;
          last_t[i * 2 + 1] = last.keypoints[i].y * kPositionScale;
        }
        nn::Shape ms = motion.shape();
        ms.insert(ms.begin(), 1);
        const auto pred = net_->predict(motion.reshaped(ms), scene.to_tensor(), last_t);
        for (std::size_t j = 0; j < horizon; ++j)
          for (std::size_t i = 0; i < k_; ++i)
            out[j][i] = {pred[(j * k_ + i) * 2] / kPositionScale, pred[(j * k_ + i) * 2 + 1] / kPositionScale};
        break;
      }
    }
    return window_from_positions(last, out);
  }

 private:
  ForecastModel(Variant v, std::size_t k) : variant_(v), k_(k) {
    if (!is_supported_keypoint_count(k)) throw ConfigError("unsupported keypoint count " + std::to_string(k));
  }

  Variant variant_;
  std::size_t k_;
  std::shared_ptr<StgcnNet> net_;
  bool loaded_ = false;
};

struct Anticipation {
  BlockId block;
  std::int64_t frame = 0;   // predicted placement (region-entry) frame
  std::int64_t issued = 0;  // frame the anticipation was made
  friend bool operator==(const Anticipation&, const Anticipation&) = default;
};

/// Last-touched block is assumed to be placed right now.
inline std::optional<Anticipation> instant_placement_predict(const track::SceneState& state) {
  if (!state.last_interacted) return std::nullopt;
  const std::int64_t now = state.last_frame.value_or(0);
  return Anticipation{*state.last_interacted, now, now};
}

/// 1-based index of the first forecast frame with a fingertip inside the
/// region.
inline std::optional<std::size_t> first_region_entry(const PoseWindow& future, const track::AssemblyRegion& region) {
  if (future.frames.empty()) return std::nullopt;
  const auto tips = hand::fingertip_indices(future.keypoints());
  for (std::size_t j = 0; j < future.length(); ++j)
    for (auto i : tips)
      if (region.contains(future.frames[j].keypoints[i])) return j + 1;
  return std::nullopt;
}

/// Anticipation from an already computed forecast.
inline std::optional<Anticipation> anticipate_from_forecast(const track::SceneState& state, const PoseWindow& future) {
  if (!state.last_interacted) return std::nullopt;
  const auto j = first_region_entry(future, state.region);
  if (!j) return std::nullopt;
  return Anticipation{*state.last_interacted, future.frames[*j - 1].t, state.last_frame.value_or(0)};
}

inline std::optional<Anticipation> anticipate_placement(const ForecastModel& model, const track::SceneState& state,
                                                        const PoseWindow& history) {
  if (model.variant() == Variant::InstantPlacement) return instant_placement_predict(state);
  if (!state.last_interacted) return std::nullopt;
  return anticipate_from_forecast(state, model.forecast(history, encode_scene(state)));
}

}  // namespace preempt::forecast
