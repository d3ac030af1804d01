#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "preempt/bridge/protocol.hpp"
#include "preempt/core/hand.hpp"
#include "preempt/sim/trial.hpp"

namespace preempt::bridge {

/// Ordered, reliable, line-framed byte stream.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual std::optional<std::string> read_line() = 0;  // nullopt on close
  virtual void write_line(const std::string& line) = 0;
};

/// In-process pipe; a pair of these forms a duplex link for tests.
class QueueChannel {
 public:
  void push(std::string line) {
    {
      std::lock_guard lk(m_);
      q_.push_back(std::move(line));
    }
    cv_.notify_one();
  }
  void close() {
    {
      std::lock_guard lk(m_);
      closed_ = true;
    }
    cv_.notify_all();
  }
  std::optional<std::string> pop() {
    std::unique_lock lk(m_);
    cv_.wait(lk, [&] { return !q_.empty() || closed_; });
    if (q_.empty()) return std::nullopt;
    auto s = std::move(q_.front());
    q_.pop_front();
    return s;
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<std::string> q_;
  bool closed_ = false;
};

class DuplexEnd : public LineChannel {
 public:
  DuplexEnd(QueueChannel& in, QueueChannel& out) : in_(in), out_(out) {}
  std::optional<std::string> read_line() override { return in_.pop(); }
  void write_line(const std::string& line) override { out_.push(line); }
  void close() { out_.close(); }

 private:
  QueueChannel& in_;
  QueueChannel& out_;
};

using Clock = std::function<std::chrono::steady_clock::time_point()>;

struct SessionResult {
  std::optional<sim::TrialLog> log;  // absent when the session failed before hello
  std::vector<double> step_ms;      // per-frame Track-Forecast-Act compute time
  std::optional<std::string> error;
};

/// Scene the server uses for a hello: target and layout drawn from the
/// target seed exactly as the simulator draws them.
inline sim::TrialSpec hello_scene(const Hello& h) {
  auto spec = sim::random_trial(h.condition, {}, h.target_seed, h.keypoints);
  if (h.layout) spec.layout = *h.layout;
  return spec;
}

/// Serves one session: hello, then frames until end, completion of the
/// full correct sequence, or an error.
inline SessionResult run_session(LineChannel& ch, const forecast::ForecastModel& model, EngineConfig ecfg = {},
                                 Clock clock = std::chrono::steady_clock::now) {
  SessionResult res;
  auto send = [&](const Json& j) { ch.write_line(j.dump()); };
  auto next_message = [&]() -> std::optional<Json> {
    auto line = ch.read_line();
    if (!line) return std::nullopt;
    try {
      return Json::parse(*line);
    } catch (const nlohmann::json::parse_error&) {
      throw ProtocolError("malformed JSON message");
    }
  };

  try {
    auto first = next_message();
    if (!first) return res;
    const Hello hello = parse_hello(*first);
    if (hello.protocol_version != kProtocolVersion)
      throw ProtocolError("unsupported protocol version " + std::to_string(hello.protocol_version));
    if (!is_supported_keypoint_count(hello.keypoints) || hello.keypoints != model.keypoints())
      throw ProtocolError("unsupported K=" + std::to_string(hello.keypoints) + " (server model uses K=" +
                          std::to_string(model.keypoints()) + ")");
    const auto spec = hello_scene(hello);

    sim::TrialLog header;
    header.keypoints = hello.keypoints;
    header.condition = hello.condition;
    header.seed = hello.target_seed;
    header.layout = spec.layout;
    header.target = spec.target;
    ecfg.emit_forecast = true;
    sim::TrialSession session(header, model, ecfg);
    send(ready_json(spec.target, spec.layout));

    const std::size_t tip = hand::primary_tip(hello.keypoints);
    std::optional<PoseFrame> prev;
    bool done = false;
    while (!done) {
      auto msg = next_message();
      if (!msg) throw ProtocolError("stream closed before end");
      const auto type = message_type(*msg);
      if (type == "end") break;
      if (type != "frame") throw ProtocolError("unexpected message '" + type + "'");
      const FrameMsg fm = parse_frame(*msg, hello.keypoints);
      if (prev && fm.t <= prev->t) throw ProtocolError("frame index " + std::to_string(fm.t) + " is not increasing");
      if (prev && fm.t - prev->t > kMaxFrameGap)
        throw ProtocolError("frame gap of " + std::to_string(fm.t - prev->t) + " frames aborts the trial");

      const auto t0 = clock();
      PoseFrame frame = make_frame(fm.t, fm.keypoints, prev && prev->t + 1 == fm.t ? &*prev : nullptr);
      validate_frame(frame);
      const StepResult r = session.step(frame, fm.blocks);
      res.step_ms.push_back(std::chrono::duration<double, std::milli>(clock() - t0).count());

      std::vector<Point> path;
      if (r.forecast)
        for (const auto& f : r.forecast->frames) path.push_back(f.keypoints[tip]);
      send(forecast_json(fm.t, path));
      if (r.feedback) send(feedback_msg_json(*r.feedback));
      prev = std::move(frame);
      const auto& st = session.state();
      done = st.complete() && st.next_required_index == static_cast<int>(st.target.size());
    }
    res.log = session.finish();
    send(result_json(*res.log));
  } catch (const ProtocolError& e) {
    res.error = e.what();
    send(error_json(e.what()));
  } catch (const Error& e) {
    res.error = e.what();
    send(error_json(e.what()));
  }
  return res;
}

/// Scripted client: replays a logged trial's frames and collects every
/// server message. Stops sending once a result or error arrives.
inline std::vector<Json> replay_client(LineChannel& ch, const sim::TrialLog& log, bool send_end = true) {
  std::vector<Json> got;
  Hello h;
  h.keypoints = log.keypoints;
  h.condition = log.condition;
  h.target_seed = log.seed;
  h.layout = log.layout;
  ch.write_line(hello_json(h).dump());
  auto read = [&]() -> std::optional<Json> {
    auto line = ch.read_line();
    if (!line) return std::nullopt;
    got.push_back(Json::parse(*line));
    return got.back();
  };
  auto r = read();
  if (!r || message_type(*r) != "ready") return got;
  for (const auto& f : log.frames) {
    ch.write_line(frame_msg_json(frame_msg_from_record(f)).dump());
    // Each frame is answered by a forecast, possibly a feedback, and a
    // result on completion. Drain until the forecast for this frame.
    for (;;) {
      auto m = read();
      if (!m) return got;
      const auto type = message_type(*m);
      if (type == "error" || type == "result") return got;
      if (type == "forecast") break;
    }
  }
  if (send_end) ch.write_line(end_json().dump());
  while (auto m = read())
    if (message_type(*m) == "result" || message_type(*m) == "error") break;
  return got;
}

}  // namespace preempt::bridge
