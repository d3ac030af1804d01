#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "preempt/io/codec.hpp"

// Newline-delimited JSON session protocol. Every message is one object
// with a "type" field.
//
//   client -> server   hello {protocol_version, K, condition, target_seed, layout?}
//                      frame {t, keypoints: [[x,y]...], blocks: [{id, bbox, present}...]}
//                      end {}
//   server -> client   ready {protocol_version, target, layout, countdown, display}
//                      forecast {t, points: [[x,y]...]}   (15 points, empty until history is full)
//                      feedback {t, kind, modality, expected, offending, block}
//                      result {completed, metrics}
//                      error {message}
namespace preempt::bridge {

using io::Json;

inline constexpr int kProtocolVersion = 1;
inline constexpr double kCountdownSeconds = 3.0;
inline constexpr double kDisplaySeconds = 1.0;
// Frame-index gap that aborts a session (one second of stream).
inline constexpr std::int64_t kMaxFrameGap = kFps;

struct Hello {
  int protocol_version = kProtocolVersion;
  std::size_t keypoints = 42;
  act::FeedbackCondition condition;
  std::uint64_t target_seed = 0;
  std::optional<sim::Layout> layout;  // drawn from target_seed when absent
};

struct FrameMsg {
  std::int64_t t = 0;
  std::vector<Point> keypoints;
  std::vector<track::BlockObservation> blocks;
};

inline std::string message_type(const Json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) throw ProtocolError("message without a type");
  return j["type"].get<std::string>();
}

inline Json hello_json(const Hello& h) {
  Json j{{"type", "hello"},
         {"protocol_version", h.protocol_version},
         {"K", h.keypoints},
         {"condition", h.condition.name()},
         {"target_seed", h.target_seed}};
  if (h.layout) j["layout"] = io::layout_json(*h.layout);
  return j;
}

inline Hello parse_hello(const Json& j) {
  if (message_type(j) != "hello") throw ProtocolError("expected hello");
  try {
    Hello h;
    h.protocol_version = io::get<int>(j, "protocol_version");
    h.keypoints = io::get<std::size_t>(j, "K");
    h.condition = act::condition_from_name(io::get<std::string>(j, "condition"));
    h.target_seed = io::get<std::uint64_t>(j, "target_seed");
    if (j.contains("layout")) h.layout = io::layout_from(j.at("layout"));
    return h;
  } catch (const Error& e) {
    throw ProtocolError(std::string("bad hello: ") + e.what());
  }
}

inline Json ready_json(const std::vector<Color>& target, const sim::Layout& layout) {
  Json names = Json::array();
  for (auto c : target) names.push_back(std::string(color_name(c)));
  return Json{{"type", "ready"},
              {"protocol_version", kProtocolVersion},
              {"target", names},
              {"layout", io::layout_json(layout)},
              {"countdown", kCountdownSeconds},
              {"display", kDisplaySeconds}};
}

inline Json frame_msg_json(const FrameMsg& f) {
  Json blocks = Json::array();
  for (const auto& b : f.blocks)
    blocks.push_back(Json{{"id", b.id.value}, {"bbox", io::bbox_json(b.bbox)}, {"present", b.present}});
  return Json{{"type", "frame"}, {"t", f.t}, {"keypoints", io::points_json(f.keypoints)}, {"blocks", blocks}};
}

inline FrameMsg frame_msg_from_record(const sim::FrameRecord& r) {
  return {r.t, r.keypoints, r.observations()};
}

inline FrameMsg parse_frame(const Json& j, std::size_t k) {
  try {
    FrameMsg f;
    f.t = io::get<std::int64_t>(j, "t");
    f.keypoints = io::points_from(j.at("keypoints"));
    if (f.keypoints.size() != k) throw ProtocolError("frame " + std::to_string(f.t) + " has the wrong keypoint count");
    const auto& bl = j.at("blocks");
    if (!bl.is_array() || bl.size() != kNumColors) throw ProtocolError("frame must carry 7 blocks");
    for (const auto& b : bl) {
      track::BlockObservation o;
      o.id = BlockId{io::get<int>(b, "id")};
      o.bbox = io::bbox_from(b.at("bbox"));
      o.present = b.contains("present") ? io::get<bool>(b, "present") : true;
      f.blocks.push_back(o);
    }
    return f;
  } catch (const ProtocolError&) {
    throw;
  } catch (const Error& e) {
    throw ProtocolError(std::string("bad frame: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("bad frame: ") + e.what());
  }
}

inline Json forecast_json(std::int64_t t, const std::vector<Point>& path) {
  return Json{{"type", "forecast"}, {"t", t}, {"points", io::points_json(path)}};
}

inline Json feedback_msg_json(const act::FeedbackEvent& e) {
  return Json{{"type", "feedback"},
              {"t", e.frame},
              {"kind", std::string(act::kind_name(e.kind))},
              {"modality", std::string(act::modality_name(e.modality))},
              {"expected", std::string(color_name(e.expected))},
              {"offending", std::string(color_name(e.offending))},
              {"block", e.trigger_block.value}};
}

inline Json result_json(const sim::TrialLog& log) {
  Json j{{"type", "result"}, {"completed", log.completed}};
  j["metrics"] = log.completed ? io::metrics_json(stats::trial_metrics(log)) : Json(nullptr);
  return j;
}

inline Json error_json(const std::string& message) { return Json{{"type", "error"}, {"message", message}}; }

inline Json end_json() { return Json{{"type", "end"}}; }

}  // namespace preempt::bridge
