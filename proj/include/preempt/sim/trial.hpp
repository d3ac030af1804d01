#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "preempt/core/rng.hpp"
#include "preempt/engine.hpp"
#include "preempt/sim/agent.hpp"
#include "preempt/sim/trial_log.hpp"
#include "preempt/sim/workspace.hpp"

namespace preempt::sim {

struct TrialSpec {
  act::FeedbackCondition condition;
  std::vector<Color> target;
  Layout layout;
  AgentConfig agent;
  std::uint64_t seed = 0;
  std::size_t keypoints = 42;
  bool record_frames = true;
  bool record_anticipations = false;
  bool oracle = false;  // anticipation read from the agent's own plan
  std::int64_t max_frames = 3000;
};

/// Spec with a random target and layout drawn from `seed`.
inline TrialSpec random_trial(act::FeedbackCondition cond, const AgentConfig& agent, std::uint64_t seed,
                              std::size_t k = 42) {
  auto rng = substream(seed, "scene");
  TrialSpec s;
  s.condition = cond;
  s.target = random_target(rng);
  s.layout = random_layout(rng);
  s.agent = agent;
  s.seed = seed;
  s.keypoints = k;
  return s;
}

/// Oracle anticipation: the block the agent will set down in the region
/// within the horizon, if any.
inline std::optional<forecast::Anticipation> plan_oracle(const Agent& agent, std::int64_t t) {
  const auto& q = agent.plan();
  for (std::size_t i = 0; i < q.size() && i < static_cast<std::size_t>(kHorizonFrames); ++i)
    if (q[i].arrives_in_region) return forecast::Anticipation{*q[i].arrives_in_region, t + 1 + static_cast<std::int64_t>(i), t};
  return std::nullopt;
}

/// Collects engine outputs into a log, deduplicating anticipations per
/// (block, step).
class TrialRecorder {
 public:
  explicit TrialRecorder(TrialLog& log) : log_(log) {}

  void record(const StepResult& r, const track::SceneState& state) {
    if (r.placement) log_.placements.push_back(*r.placement);
    if (r.feedback) log_.feedback.push_back(*r.feedback);
    if (r.anticipation) {
      // The step is the one in force before any placement this frame.
      int step = state.next_required_index;
      if (r.placement && r.placement->correct) --step;
      if (seen_.insert({r.anticipation->block.value, step}).second) log_.anticipations.push_back(*r.anticipation);
    }
  }

 private:
  TrialLog& log_;
  std::set<std::pair<int, int>> seen_;
};

inline std::vector<BlockRecord> block_records(const track::SceneState& s) {
  std::vector<BlockRecord> out;
  out.reserve(s.blocks.size());
  for (const auto& b : s.blocks) out.push_back({b.id, b.color, b.bbox, b.state, true});
  return out;
}

/// Simulates one trial frame by frame through the full engine.
inline TrialLog run_trial(const TrialSpec& spec, const forecast::ForecastModel& model, EngineConfig ecfg = {}) {
  track::validate_target(spec.target);
  spec.agent.validate();
  ecfg.condition = spec.condition;
  ecfg.record_anticipations = ecfg.record_anticipations || spec.record_anticipations;

  TrialLog log;
  log.keypoints = spec.keypoints;
  log.condition = spec.condition;
  log.forecaster = spec.oracle ? "oracle" : std::string(forecast::variant_name(model.variant()));
  log.seed = spec.seed;
  log.p_err = spec.agent.p_err;
  log.layout = spec.layout;
  log.target = spec.target;

  Agent agent(spec.agent, spec.layout, spec.target, derive_seed(spec.seed, "agent"));
  auto pose_rng = substream(spec.seed, "pose");
  auto idle_rng = substream(spec.seed, "idle");
  const double sway_phase = std::uniform_real_distribution<double>(0.0, 6.283185307179586)(idle_rng);
  agent.idle(std::uniform_int_distribution<int>(15, 20)(idle_rng));

  WorldView world;
  world.centers = spec.layout.slots;
  Engine engine(model, track::make_scene(initial_blocks(spec.layout), spec.target), ecfg);
  if (spec.oracle)
    engine.set_anticipation_override(
        [&agent](const track::SceneState&, std::int64_t t) { return plan_oracle(agent, t); });

  TrialRecorder rec(log);
  std::optional<PoseFrame> prev;
  std::vector<track::BlockObservation> boxes(spec.layout.slots.size());
  for (std::int64_t t = 0; t < spec.max_frames; ++t) {
    agent.ensure_planned(static_cast<std::size_t>(kHorizonFrames) + 1);
    const PlannedFrame pf = agent.pop();
    if (pf.carry) world.centers[static_cast<std::size_t>(pf.carry->value)] = pf.tip - pf.carry_offset;

    const Point wrist = hand::wrist_for_index_tip(pf.tip);
    const double tt = static_cast<double>(t);
    const Point left = kLeftIdle + Point{6.0 * std::sin(tt / 14.0 + sway_phase), 4.0 * std::sin(tt / 11.0 + 2.0 * sway_phase)};
    auto kp = synth_pose(wrist, left, spec.keypoints, spec.agent.jitter_sigma, pose_rng);
    for (auto& p : kp) p = quantize(p);
    PoseFrame frame = make_frame(t, std::move(kp), prev ? &*prev : nullptr);

    for (std::size_t i = 0; i < boxes.size(); ++i)
      boxes[i] = {BlockId{static_cast<int>(i)}, block_box(quantize(world.centers[i])), true};

    const StepResult r = engine.step(frame, boxes);
    rec.record(r, engine.state());
    if (spec.record_frames) log.frames.push_back({t, frame.keypoints, block_records(engine.state())});
    if (r.feedback) agent.on_feedback(*r.feedback);
    agent.react(t, world, engine.state());
    log.end_frame = t;
    prev = std::move(frame);

    if (engine.state().complete() && !agent.has_pending_reaction()) break;
  }
  log.removals = engine.state().removals;
  log.completed = engine.state().complete();
  return log;
}

/// Engine plus log bookkeeping for a trial driven by externally supplied
/// frames (offline replay and live sessions).
class TrialSession {
 public:
  TrialSession(TrialLog header, const forecast::ForecastModel& model, EngineConfig ecfg)
      : log_(std::move(header)),
        engine_(model, track::make_scene(initial_blocks(log_.layout), log_.target), with_condition(ecfg, log_.condition)),
        rec_(log_) {
    log_.forecaster = std::string(forecast::variant_name(model.variant()));
    log_.keypoints = model.keypoints();
    log_.frames.clear();
    log_.placements.clear();
    log_.removals.clear();
    log_.feedback.clear();
    log_.anticipations.clear();
    log_.completed = false;
  }

  TrialSession(const TrialSession&) = delete;
  TrialSession& operator=(const TrialSession&) = delete;

  StepResult step(const PoseFrame& frame, std::span<const track::BlockObservation> obs) {
    StepResult r = engine_.step(frame, obs);
    rec_.record(r, engine_.state());
    if (log_.frames.empty()) log_.start_frame = frame.t;
    log_.frames.push_back({frame.t, frame.keypoints, block_records(engine_.state())});
    log_.end_frame = frame.t;
    return r;
  }

  const track::SceneState& state() const { return engine_.state(); }
  const TrialLog& log() const { return log_; }

  TrialLog finish() {
    log_.removals = engine_.state().removals;
    log_.completed = engine_.state().complete();
    return log_;
  }

 private:
  static EngineConfig with_condition(EngineConfig e, act::FeedbackCondition c) {
    e.condition = c;
    return e;
  }

  TrialLog log_;
  Engine engine_;
  TrialRecorder rec_;  // refers to log_
};

/// Feeds a logged trial's frames through a fresh engine.
inline TrialLog replay_trial(const TrialLog& src, const forecast::ForecastModel& model, EngineConfig ecfg = {}) {
  if (src.frames.empty()) throw DataError("trial log has no frames to replay");
  if (model.keypoints() != src.keypoints) throw DataError("model K does not match the trial log");
  TrialSession session(src, model, ecfg);
  const auto poses = pose_frames(src);
  for (std::size_t i = 0; i < poses.size(); ++i) session.step(poses[i], src.frames[i].observations());
  return session.finish();
}

}  // namespace preempt::sim
