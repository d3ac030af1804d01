#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "preempt/engine.hpp"
#include "preempt/forecast/train.hpp"
#include "preempt/io/codec.hpp"
#include "preempt/sim/dataset.hpp"
#include "preempt/sim/study.hpp"

namespace preempt::io {

struct PathsConfig {
  std::string data = "out/data";
  std::string checkpoint_dir = "out/models";
  std::string study = "out/study.jsonl";
  std::string out = "out";
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 7878;
  bool stdio = false;
};

/// Everything a CLI run depends on besides the code version.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t keypoints = 42;
  forecast::Variant variant = forecast::Variant::SceneAwareSTGCN;
  forecast::StgcnConfig model;
  forecast::TrainConfig train = [] {
    forecast::TrainConfig t;
    t.max_epochs = 3;
    return t;
  }();
  int window_stride = 4;
  int data_train = 288, data_val = 17, data_test = 19;
  sim::AgentConfig agent;
  int participants = 20, rounds = 2;
  double p_err_jitter = 0.1;
  act::PolicyConfig policy;
  track::TrackerConfig tracker;
  PathsConfig paths;
  ServeConfig serve;

  sim::DataConfig data_config() const {
    sim::DataConfig d;
    d.train = data_train;
    d.val = data_val;
    d.test = data_test;
    d.keypoints = keypoints;
    d.window_stride = window_stride;
    d.agent = agent;
    d.seed = derive_seed(seed, "data");
    return d;
  }
  sim::StudyConfig study_config() const {
    sim::StudyConfig s;
    s.participants = participants;
    s.rounds = rounds;
    s.p_err_jitter = p_err_jitter;
    s.agent = agent;
    s.keypoints = keypoints;
    s.seed = derive_seed(seed, "study");
    return s;
  }
  forecast::TrainConfig train_config() const {
    auto t = train;
    t.seed = derive_seed(seed, "train");
    return t;
  }
  EngineConfig engine_config() const {
    EngineConfig e;
    e.policy = policy;
    e.tracker = tracker;
    return e;
  }
  std::filesystem::path checkpoint_path(forecast::Variant v) const {
    return std::filesystem::path(paths.checkpoint_dir) / (std::string(forecast::variant_name(v)) + ".ckpt");
  }
};

inline RunConfig parse_run_config(const Json& j) {
  RunConfig c;
  reject_unknown(j, {"seed", "keypoints", "forecaster", "train", "data", "agent", "study", "policy", "tracker",
                     "paths", "serve"},
                 "config");
  read_opt(j, "seed", c.seed, "config");
  read_opt(j, "keypoints", c.keypoints, "config");
  if (!is_supported_keypoint_count(c.keypoints)) throw ConfigError("keypoints must be 1, 21 or 42");
  if (j.contains("forecaster")) {
    const auto& f = j.at("forecaster");
    const std::string w = "forecaster";
    reject_unknown(f, {"variant", "channels", "kernel", "motion_dim", "scene_hidden", "fusion_hidden"}, w);
    std::string v(forecast::variant_name(c.variant));
    read_opt(f, "variant", v, w);
    try {
      c.variant = forecast::variant_from_name(v);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    read_opt(f, "channels", c.model.channels, w);
    read_opt(f, "kernel", c.model.kernel, w);
    read_opt(f, "motion_dim", c.model.motion_dim, w);
    read_opt(f, "scene_hidden", c.model.scene_hidden, w);
    read_opt(f, "fusion_hidden", c.model.fusion_hidden, w);
    if (c.model.channels.empty() || c.model.kernel % 2 == 0) throw ConfigError("forecaster needs channels and an odd kernel");
  }
  c.model.keypoints = c.keypoints;
  if (j.contains("train")) {
    const auto& t = j.at("train");
    const std::string w = "train";
    reject_unknown(t, {"batch_size", "max_epochs", "patience", "lr", "max_seconds", "window_stride"}, w);
    read_opt(t, "batch_size", c.train.batch_size, w);
    read_opt(t, "max_epochs", c.train.max_epochs, w);
    read_opt(t, "patience", c.train.patience, w);
    read_opt(t, "lr", c.train.lr, w);
    read_opt(t, "max_seconds", c.train.max_seconds, w);
    read_opt(t, "window_stride", c.window_stride, w);
    if (c.train.batch_size < 1 || c.train.max_epochs < 1 || c.train.patience < 1 || !(c.train.lr > 0) ||
        c.window_stride < 1)
      throw ConfigError("train settings must be positive");
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, {"train", "val", "test"}, "data");
    read_opt(d, "train", c.data_train, "data");
    read_opt(d, "val", c.data_val, "data");
    read_opt(d, "test", c.data_test, "data");
    if (c.data_train < 1 || c.data_val < 1 || c.data_test < 1) throw ConfigError("every data split needs >= 1 trial");
  }
  if (j.contains("agent")) c.agent = agent_from(j.at("agent"));
  if (j.contains("study")) {
    const auto& s = j.at("study");
    reject_unknown(s, {"participants", "rounds", "p_err_jitter"}, "study");
    read_opt(s, "participants", c.participants, "study");
    read_opt(s, "rounds", c.rounds, "study");
    read_opt(s, "p_err_jitter", c.p_err_jitter, "study");
    c.study_config().validate();
  }
  if (j.contains("policy")) {
    reject_unknown(j.at("policy"), {"cooldown_frames"}, "policy");
    read_opt(j.at("policy"), "cooldown_frames", c.policy.cooldown_frames, "policy");
    if (c.policy.cooldown_frames < 0) throw ConfigError("cooldown must be >= 0");
  }
  if (j.contains("tracker")) {
    reject_unknown(j.at("tracker"), {"candidate_timeout"}, "tracker");
    read_opt(j.at("tracker"), "candidate_timeout", c.tracker.candidate_timeout, "tracker");
    if (c.tracker.candidate_timeout < 1) throw ConfigError("candidate timeout must be >= 1");
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    reject_unknown(p, {"data", "checkpoint_dir", "study", "out"}, "paths");
    read_opt(p, "data", c.paths.data, "paths");
    read_opt(p, "checkpoint_dir", c.paths.checkpoint_dir, "paths");
    read_opt(p, "study", c.paths.study, "paths");
    read_opt(p, "out", c.paths.out, "paths");
  }
  if (j.contains("serve")) {
    const auto& s = j.at("serve");
    reject_unknown(s, {"host", "port", "stdio"}, "serve");
    read_opt(s, "host", c.serve.host, "serve");
    read_opt(s, "port", c.serve.port, "serve");
    read_opt(s, "stdio", c.serve.stdio, "serve");
    if (c.serve.port < 0 || c.serve.port > 65535) throw ConfigError("port out of range");
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config " + path.string());
  Json j;
  try {
    j = Json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    // byte offset is all the parser gives; turn it into a line number
    const std::string text = read_file(path);
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ConfigError(path.string() + ":" + std::to_string(line) + ": malformed JSON");
  }
  return parse_run_config(j);
}

inline Json run_config_json(const RunConfig& c) {
  return Json{{"seed", c.seed},
              {"keypoints", c.keypoints},
              {"forecaster",
               {{"variant", std::string(forecast::variant_name(c.variant))},
                {"channels", c.model.channels},
                {"kernel", c.model.kernel},
                {"motion_dim", c.model.motion_dim},
                {"scene_hidden", c.model.scene_hidden},
                {"fusion_hidden", c.model.fusion_hidden}}},
              {"train",
               {{"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"lr", c.train.lr},
                {"max_seconds", c.train.max_seconds},
                {"window_stride", c.window_stride}}},
              {"data", {{"train", c.data_train}, {"val", c.data_val}, {"test", c.data_test}}},
              {"agent", agent_json(c.agent)},
              {"study", {{"participants", c.participants}, {"rounds", c.rounds}, {"p_err_jitter", c.p_err_jitter}}},
              {"policy", {{"cooldown_frames", c.policy.cooldown_frames}}},
              {"tracker", {{"candidate_timeout", c.tracker.candidate_timeout}}},
              {"paths",
               {{"data", c.paths.data},
                {"checkpoint_dir", c.paths.checkpoint_dir},
                {"study", c.paths.study},
                {"out", c.paths.out}}},
              {"serve", {{"host", c.serve.host}, {"port", c.serve.port}, {"stdio", c.serve.stdio}}}};
}

}  // namespace preempt::io
