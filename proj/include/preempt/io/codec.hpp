#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "preempt/sim/study.hpp"
#include "preempt/sim/trial_log.hpp"
#include "preempt/stats/metrics.hpp"

namespace preempt::io {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

// Field access that reports the missing or mistyped key.
template <typename T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(std::string("field '") + key + "' has the wrong type");
  }
}

inline Json point_json(Point p) { return Json::array({p.x, p.y}); }

inline Point point_from(const Json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw DataError("point must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Json points_json(const std::vector<Point>& ps) {
  Json a = Json::array();
  for (auto p : ps) a.push_back(point_json(p));
  return a;
}

inline std::vector<Point> points_from(const Json& j) {
  if (!j.is_array()) throw DataError("expected an array of points");
  std::vector<Point> out;
  out.reserve(j.size());
  for (const auto& p : j) out.push_back(point_from(p));
  return out;
}

inline Json bbox_json(const BBox& b) { return Json::array({b.cx, b.cy, b.w, b.h}); }

inline BBox bbox_from(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("bbox must be [cx, cy, w, h]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline Json colors_json(const std::vector<Color>& cs) {
  Json a = Json::array();
  for (auto c : cs) a.push_back(color_index(c));
  return a;
}

inline std::vector<Color> colors_from(const Json& j) {
  if (!j.is_array()) throw DataError("expected an array of color indices");
  std::vector<Color> out;
  for (const auto& c : j) out.push_back(color_from_index(c.get<int>()));
  return out;
}

inline Json block_json(const sim::BlockRecord& b) {
  return Json{{"id", b.id.value},
              {"color", color_index(b.color)},
              {"bbox", bbox_json(b.bbox)},
              {"state", std::string(track::state_name(b.state))},
              {"present", b.present}};
}

inline sim::BlockRecord block_from(const Json& j) {
  sim::BlockRecord b;
  b.id = BlockId{get<int>(j, "id")};
  b.color = color_from_index(get<int>(j, "color"));
  b.bbox = bbox_from(j.at("bbox"));
  b.state = track::state_from_name(get<std::string>(j, "state"));
  b.present = get<bool>(j, "present");
  return b;
}

inline Json layout_json(const sim::Layout& l) {
  Json slots = Json::array();
  for (auto p : l.slots) slots.push_back(point_json(p));
  return Json{{"slots", slots}, {"colors", colors_json({l.colors.begin(), l.colors.end()})}};
}

inline sim::Layout layout_from(const Json& j) {
  sim::Layout l;
  const auto slots = points_from(j.at("slots"));
  const auto colors = colors_from(j.at("colors"));
  if (slots.size() != kNumColors || colors.size() != kNumColors) throw DataError("layout needs 7 slots and colors");
  std::copy(slots.begin(), slots.end(), l.slots.begin());
  std::copy(colors.begin(), colors.end(), l.colors.begin());
  return l;
}

inline Json placement_json(const track::PlacementEvent& p) {
  return Json{{"block", p.block.value}, {"color", color_index(p.color)}, {"frame", p.frame}, {"correct", p.correct}};
}

inline track::PlacementEvent placement_from(const Json& j) {
  return {BlockId{get<int>(j, "block")}, color_from_index(get<int>(j, "color")), get<std::int64_t>(j, "frame"),
          get<bool>(j, "correct")};
}

inline Json feedback_json(const act::FeedbackEvent& e) {
  return Json{{"frame", e.frame},
              {"kind", std::string(act::kind_name(e.kind))},
              {"modality", std::string(act::modality_name(e.modality))},
              {"expected", color_index(e.expected)},
              {"offending", color_index(e.offending)},
              {"block", e.trigger_block.value}};
}

inline act::FeedbackEvent feedback_from(const Json& j) {
  act::FeedbackEvent e;
  e.frame = get<std::int64_t>(j, "frame");
  e.kind = act::kind_from_name(get<std::string>(j, "kind"));
  e.modality = act::modality_from_name(get<std::string>(j, "modality"));
  e.expected = color_from_index(get<int>(j, "expected"));
  e.offending = color_from_index(get<int>(j, "offending"));
  e.trigger_block = BlockId{get<int>(j, "block")};
  return e;
}

inline Json metrics_json(const stats::TrialMetrics& m) {
  return Json{{"success", m.success},
              {"edit_distance", m.edit_distance},
              {"feedback_count", m.feedback_count},
              {"efficiency", m.efficiency},
              {"total_time", m.total_time}};
}

inline stats::TrialMetrics metrics_from(const Json& j) {
  return {get<bool>(j, "success"), get<int>(j, "edit_distance"), get<int>(j, "feedback_count"),
          get<double>(j, "efficiency"), get<double>(j, "total_time")};
}

// Trajectory / trial log ------------------------------------------------

inline Json trial_header_json(const sim::TrialLog& log) {
  return Json{{"type", "header"},
              {"version", log.version},
              {"K", log.keypoints},
              {"fps", kFps},
              {"crop", static_cast<int>(kCropSize)},
              {"condition", log.condition.name()},
              {"forecaster", log.forecaster},
              {"seed", log.seed},
              {"p_err", log.p_err},
              {"layout", layout_json(log.layout)},
              {"target", colors_json(log.target)}};
}

inline void apply_trial_header(const Json& j, sim::TrialLog& log) {
  if (get<std::string>(j, "type") != "header") throw DataError("expected a header line");
  log.version = get<int>(j, "version");
  if (log.version != sim::kLogVersion) throw DataError("unsupported log version " + std::to_string(log.version));
  if (get<int>(j, "fps") != kFps || get<int>(j, "crop") != static_cast<int>(kCropSize))
    throw DataError("log was recorded at a different frame rate or crop size");
  log.keypoints = get<std::size_t>(j, "K");
  if (!is_supported_keypoint_count(log.keypoints)) throw DataError("unsupported K " + std::to_string(log.keypoints));
  log.condition = act::condition_from_name(get<std::string>(j, "condition"));
  log.forecaster = get<std::string>(j, "forecaster");
  log.seed = get<std::uint64_t>(j, "seed");
  log.p_err = get<double>(j, "p_err");
  log.layout = layout_from(j.at("layout"));
  log.target = colors_from(j.at("target"));
  track::validate_target(log.target);
}

/// One frame line. `events` tags placements and feedback that happened on
/// this frame; it is informational and ignored when parsing.
inline Json frame_json(const sim::FrameRecord& f, const Json& events = Json::array()) {
  Json blocks = Json::array();
  for (const auto& b : f.blocks) blocks.push_back(block_json(b));
  Json j{{"type", "frame"}, {"t", f.t}, {"keypoints", points_json(f.keypoints)}, {"blocks", blocks}};
  if (!events.empty()) j["events"] = events;
  return j;
}

inline sim::FrameRecord frame_from(const Json& j, std::size_t k) {
  if (get<std::string>(j, "type") != "frame") throw DataError("expected a frame line");
  sim::FrameRecord f;
  f.t = get<std::int64_t>(j, "t");
  f.keypoints = points_from(j.at("keypoints"));
  if (f.keypoints.size() != k) throw DataError("frame has " + std::to_string(f.keypoints.size()) + " keypoints, header says " + std::to_string(k));
  const auto& bl = j.at("blocks");
  if (!bl.is_array() || bl.size() != kNumColors) throw DataError("frame needs 7 block slots");
  for (const auto& b : bl) f.blocks.push_back(block_from(b));
  return f;
}

inline Json trial_summary_json(const sim::TrialLog& log) {
  Json pl = Json::array(), rm = Json::array(), fb = Json::array(), an = Json::array();
  for (const auto& p : log.placements) pl.push_back(placement_json(p));
  for (const auto& r : log.removals) rm.push_back(Json{{"block", r.block.value}, {"frame", r.frame}});
  for (const auto& e : log.feedback) fb.push_back(feedback_json(e));
  for (const auto& a : log.anticipations) an.push_back(Json{{"block", a.block.value}, {"frame", a.frame}, {"issued", a.issued}});
  Json j{{"type", "summary"},         {"start_frame", log.start_frame}, {"end_frame", log.end_frame},
         {"completed", log.completed}, {"placements", pl},              {"removals", rm},
         {"feedback", fb},             {"anticipations", an}};
  if (log.completed) j["metrics"] = metrics_json(stats::trial_metrics(log));
  return j;
}

inline void apply_trial_summary(const Json& j, sim::TrialLog& log) {
  if (get<std::string>(j, "type") != "summary") throw DataError("expected a summary line");
  log.start_frame = get<std::int64_t>(j, "start_frame");
  log.end_frame = get<std::int64_t>(j, "end_frame");
  log.completed = get<bool>(j, "completed");
  for (const auto& p : j.at("placements")) log.placements.push_back(placement_from(p));
  for (const auto& r : j.at("removals")) log.removals.push_back({BlockId{get<int>(r, "block")}, get<std::int64_t>(r, "frame")});
  for (const auto& e : j.at("feedback")) log.feedback.push_back(feedback_from(e));
  for (const auto& a : j.at("anticipations"))
    log.anticipations.push_back(
        {BlockId{get<int>(a, "block")}, get<std::int64_t>(a, "frame"), get<std::int64_t>(a, "issued")});
}

/// Stored metrics of a summary line, if the trial was completed.
inline std::optional<stats::TrialMetrics> stored_metrics(const Json& summary) {
  if (!summary.contains("metrics")) return std::nullopt;
  return metrics_from(summary.at("metrics"));
}

/// Header line, one line per frame, summary line.
inline void write_trial_jsonl(std::ostream& os, const sim::TrialLog& log) {
  os << trial_header_json(log).dump() << '\n';
  std::size_t pi = 0, fi = 0;
  for (const auto& f : log.frames) {
    Json ev = Json::array();
    for (; pi < log.placements.size() && log.placements[pi].frame <= f.t; ++pi)
      if (log.placements[pi].frame == f.t) ev.push_back(log.placements[pi].correct ? "placement" : "wrong-placement");
    for (; fi < log.feedback.size() && log.feedback[fi].frame <= f.t; ++fi)
      if (log.feedback[fi].frame == f.t) ev.push_back(std::string(act::kind_name(log.feedback[fi].kind)) + "-feedback");
    os << frame_json(f, ev).dump() << '\n';
  }
  os << trial_summary_json(log).dump() << '\n';
}

/// Line reader that prefixes errors with the source name and line number.
class LineReader {
 public:
  LineReader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  // Next non-empty line parsed as JSON; false at end of input.
  bool next(Json& out) {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      if (line.empty() || line == "\r") continue;
      try {
        out = Json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        fail(std::string("malformed JSON: ") + e.what());
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(source_ + ":" + std::to_string(line_no_) + ": " + msg);
  }

  template <typename F>
  auto guard(F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const DataError& e) {
      fail(e.what());
    } catch (const ConfigError& e) {
      fail(e.what());
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
  }

  std::size_t line() const { return line_no_; }

 private:
  std::istream& is_;
  std::string source_;
  std::size_t line_no_ = 0;
};

struct ParsedTrial {
  sim::TrialLog log;
  std::optional<stats::TrialMetrics> stored_metrics;
};

inline ParsedTrial read_trial_jsonl(std::istream& is, const std::string& source = "<trial>") {
  LineReader r(is, source);
  ParsedTrial out;
  Json j;
  if (!r.next(j)) r.fail("empty trajectory file");
  r.guard([&] { apply_trial_header(j, out.log); });
  bool summary = false;
  while (r.next(j)) {
    if (summary) r.fail("content after the summary line");
    r.guard([&] {
      const auto type = get<std::string>(j, "type");
      if (type == "frame") {
        auto f = frame_from(j, out.log.keypoints);
        if (!out.log.frames.empty() && f.t <= out.log.frames.back().t) throw DataError("frame indices must increase");
        out.log.frames.push_back(std::move(f));
      } else if (type == "summary") {
        apply_trial_summary(j, out.log);
        out.stored_metrics = stored_metrics(j);
        summary = true;
      } else {
        throw DataError("unexpected line type '" + type + "'");
      }
    });
  }
  if (!summary) r.fail("missing summary line (truncated file?)");
  return out;
}

inline void save_trial(const std::filesystem::path& path, const sim::TrialLog& log) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  write_trial_jsonl(os, log);
}

inline ParsedTrial load_trial(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  return read_trial_jsonl(is, path.string());
}

inline std::string trial_jsonl_string(const sim::TrialLog& log) {
  std::ostringstream os;
  write_trial_jsonl(os, log);
  return os.str();
}

// Study log -------------------------------------------------------------

inline Json agent_json(const sim::AgentConfig& a) {
  return Json{{"p_err", a.p_err},
              {"comply_prob", a.comply_prob},
              {"response_latency", a.response_latency},
              {"reach_min", a.reach_min},
              {"reach_max", a.reach_max},
              {"carry_min", a.carry_min},
              {"carry_max", a.carry_max},
              {"undo_duration", a.undo_duration},
              {"hesitate_prob", a.hesitate_prob},
              {"jitter_sigma", a.jitter_sigma}};
}

// Strict: every key must be known; missing keys keep their defaults.
inline void reject_unknown(const Json& j, std::initializer_list<std::string_view> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto key : keys) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& dst, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

inline sim::AgentConfig agent_from(const Json& j, sim::AgentConfig a = {}) {
  const std::string w = "agent";
  reject_unknown(j, {"p_err", "comply_prob", "response_latency", "reach_min", "reach_max", "carry_min", "carry_max",
                     "undo_duration", "hesitate_prob", "jitter_sigma"}, w);
  read_opt(j, "p_err", a.p_err, w);
  read_opt(j, "comply_prob", a.comply_prob, w);
  read_opt(j, "response_latency", a.response_latency, w);
  read_opt(j, "reach_min", a.reach_min, w);
  read_opt(j, "reach_max", a.reach_max, w);
  read_opt(j, "carry_min", a.carry_min, w);
  read_opt(j, "carry_max", a.carry_max, w);
  read_opt(j, "undo_duration", a.undo_duration, w);
  read_opt(j, "hesitate_prob", a.hesitate_prob, w);
  read_opt(j, "jitter_sigma", a.jitter_sigma, w);
  a.validate();
  return a;
}

inline Json study_header_json(const sim::StudyLog& s) {
  return Json{{"type", "study"},
              {"version", kFormatVersion},
              {"forecaster", s.forecaster},
              {"participants", s.config.participants},
              {"rounds", s.config.rounds},
              {"p_err_jitter", s.config.p_err_jitter},
              {"K", s.config.keypoints},
              {"seed", s.config.seed},
              {"agent", agent_json(s.config.agent)}};
}

inline Json study_trial_json(const sim::StudyTrial& t) {
  return Json{{"type", "trial"},
              {"participant", t.participant},
              {"round", t.round},
              {"order", t.order},
              {"header", trial_header_json(t.log)},
              {"summary", trial_summary_json(t.log)}};
}

inline void write_study_jsonl(std::ostream& os, const sim::StudyLog& s) {
  os << study_header_json(s).dump() << '\n';
  for (const auto& t : s.trials) os << study_trial_json(t).dump() << '\n';
}

inline sim::StudyLog read_study_jsonl(std::istream& is, const std::string& source = "<study>") {
  LineReader r(is, source);
  sim::StudyLog s;
  Json j;
  if (!r.next(j)) r.fail("empty study log");
  r.guard([&] {
    if (get<std::string>(j, "type") != "study") throw DataError("expected a study header line");
    if (get<int>(j, "version") != kFormatVersion) throw DataError("unsupported study log version");
    s.forecaster = get<std::string>(j, "forecaster");
    s.config.participants = get<int>(j, "participants");
    s.config.rounds = get<int>(j, "rounds");
    s.config.p_err_jitter = get<double>(j, "p_err_jitter");
    s.config.keypoints = get<std::size_t>(j, "K");
    s.config.seed = get<std::uint64_t>(j, "seed");
    try {
      s.config.agent = agent_from(j.at("agent"));
    } catch (const ConfigError& e) {
      throw DataError(e.what());
    }
  });
  while (r.next(j)) {
    r.guard([&] {
      if (get<std::string>(j, "type") != "trial") throw DataError("expected a trial line");
      sim::StudyTrial t;
      t.participant = get<int>(j, "participant");
      t.round = get<int>(j, "round");
      t.order = get<int>(j, "order");
      apply_trial_header(j.at("header"), t.log);
      apply_trial_summary(j.at("summary"), t.log);
      s.trials.push_back(std::move(t));
    });
  }
  return s;
}

inline void save_study(const std::filesystem::path& path, const sim::StudyLog& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  write_study_jsonl(os, s);
}

inline sim::StudyLog load_study(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  return read_study_jsonl(is, path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << data;
}

}  // namespace preempt::io
