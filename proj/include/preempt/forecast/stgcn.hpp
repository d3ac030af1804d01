#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "preempt/core/hand.hpp"
#include "preempt/forecast/window.hpp"
#include "preempt/nn/graph.hpp"

namespace preempt::forecast {

/// Hand-graph adjacency (no self-loops) for K keypoints.
inline nn::Tensor hand_adjacency(std::size_t k) {
  nn::Tensor a({k, k});
  for (auto [i, j] : hand::skeleton_edges(k)) {
    a.at(i, j) = 1.0;
    a.at(j, i) = 1.0;
  }
  return a;
}

struct StgcnConfig {
  std::size_t keypoints = 42;
  std::vector<std::size_t> channels{32, 64, 64};
  std::size_t kernel = 3;
  std::size_t motion_dim = 32;    // width after the pooled-feature reduction
  std::size_t scene_hidden = 64;  // scene MLP 35 -> hidden -> hidden
  std::size_t fusion_hidden = 64;
  bool scene_aware = true;
  std::size_t history = kHistoryFrames;
  std::size_t horizon = kHorizonFrames;

  friend bool operator==(const StgcnConfig&, const StgcnConfig&) = default;
};

/// Motion encoder (stacked graph + temporal convolutions, mean-pooled over
/// time), optional scene MLP, and a fusion head that predicts per-frame
/// displacements from the last observed pose.
class StgcnNet {
 public:
  explicit StgcnNet(StgcnConfig cfg) : cfg_(std::move(cfg)) {
    if (!is_supported_keypoint_count(cfg_.keypoints))
      throw ConfigError("unsupported keypoint count " + std::to_string(cfg_.keypoints));
    if (cfg_.channels.empty() || cfg_.kernel % 2 == 0) throw ConfigError("bad ST-GCN layer configuration");
    a_hat_ = nn::normalized_adjacency(hand_adjacency(cfg_.keypoints));
    const std::size_t v = cfg_.keypoints;
    std::size_t c = kFeaturesPerKeypoint;
    for (std::size_t l = 0; l < cfg_.channels.size(); ++l) {
      const std::size_t c2 = cfg_.channels[l];
      const std::string p = "enc" + std::to_string(l);
      params_.add(p + ".gc.w", {c, c2});
      params_.add(p + ".gc.b", {c2});
      params_.add(p + ".tc.k", {cfg_.kernel, c2, c2});
      params_.add(p + ".tc.b", {c2});
      c = c2;
    }
    params_.add("reduce.w", {v * c, cfg_.motion_dim});
    params_.add("reduce.b", {cfg_.motion_dim});
    std::size_t fused = cfg_.motion_dim;
    if (cfg_.scene_aware) {
      params_.add("scene0.w", {SceneEncoding::kLength, cfg_.scene_hidden});
      params_.add("scene0.b", {cfg_.scene_hidden});
      params_.add("scene1.w", {cfg_.scene_hidden, cfg_.scene_hidden});
      params_.add("scene1.b", {cfg_.scene_hidden});
      fused += cfg_.scene_hidden;
    }
    params_.add("fuse.w", {fused, cfg_.fusion_hidden});
    params_.add("fuse.b", {cfg_.fusion_hidden});
    params_.add("head.w", {cfg_.fusion_hidden, output_width()});
    params_.add("head.b", {output_width()});
  }

  /// Xavier-uniform weights, zero biases.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& p : params_.all()) {
      const auto& s = p.value.shape();
      if (s.size() == 1) {
        p.value.fill(0.0);
      } else if (s.size() == 2) {
        nn::xavier_uniform(p.value, s[0], s[1], rng);
      } else {  // temporal kernel [kappa x C x C']
        nn::xavier_uniform(p.value, s[0] * s[1], s[0] * s[2], rng);
      }
    }
  }

  const StgcnConfig& config() const { return cfg_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  const nn::Tensor& a_hat() const { return a_hat_; }
  std::size_t output_width() const { return cfg_.horizon * cfg_.keypoints * 2; }

  /// motion [B x T x K x 4], scene [B x 35], last [B x K x 2] (normalized)
  /// -> predicted positions [B x H x K x 2]. Gradients flow to parameters.
  nn::Var forward(nn::Graph& g, const nn::Tensor& motion, const nn::Tensor& scene, const nn::Tensor& last) {
    return run(g, motion, scene, last, [&](const std::string& n) { return g.param(params_[n]); });
  }

  /// Inference-only forward on an immutable network.
  nn::Tensor predict(const nn::Tensor& motion, const nn::Tensor& scene, const nn::Tensor& last) const {
    nn::Graph g(false);
    auto out = run(g, motion, scene, last, [&](const std::string& n) { return g.constant(params_[n].value); });
    return g.value(out);
  }

 private:
  template <typename ParamFn>
  nn::Var run(nn::Graph& g, const nn::Tensor& motion, const nn::Tensor& scene, const nn::Tensor& last,
              ParamFn&& p) const {
    const std::size_t v = cfg_.keypoints;
    if (motion.rank() != 4 || motion.dim(1) != cfg_.history || motion.dim(2) != v ||
        motion.dim(3) != kFeaturesPerKeypoint)
      throw DataError("motion tensor " + nn::shape_str(motion.shape()) + " does not match model K=" +
                      std::to_string(v));
    const std::size_t b = motion.dim(0);
    if (last.size() != b * v * 2) throw DataError("last-pose tensor does not match batch");

    nn::Var h = g.constant(motion);
    for (std::size_t l = 0; l < cfg_.channels.size(); ++l) {
      const std::string n = "enc" + std::to_string(l);
      h = nn::add_bias(nn::graph_conv(h, a_hat_, p(n + ".gc.w")), p(n + ".gc.b"));
      h = nn::relu(nn::add_bias(nn::temporal_conv(h, p(n + ".tc.k")), p(n + ".tc.b")));
    }
    nn::Var z = nn::relu(nn::linear(nn::mean_time(h), p("reduce.w"), p("reduce.b")));
    if (cfg_.scene_aware) {
      if (scene.size() != b * SceneEncoding::kLength) throw DataError("scene tensor does not match batch");
      nn::Var s = g.constant(scene.reshaped({b, SceneEncoding::kLength}));
      s = nn::relu(nn::linear(s, p("scene0.w"), p("scene0.b")));
      s = nn::relu(nn::linear(s, p("scene1.w"), p("scene1.b")));
      z = nn::concat(z, s);
    }
    z = nn::relu(nn::linear(z, p("fuse.w"), p("fuse.b")));
    nn::Var residual = nn::linear(z, p("head.w"), p("head.b"));

    nn::Tensor base({b, output_width()});
    for (std::size_t s = 0; s < b; ++s)
      for (std::size_t t = 0; t < cfg_.horizon; ++t)
        std::copy_n(last.ptr() + s * v * 2, v * 2, base.ptr() + s * output_width() + t * v * 2);
    nn::Var out = nn::add(residual, g.constant(std::move(base)));
    return nn::reshape(out, {b, cfg_.horizon, v, 2});
  }

  StgcnConfig cfg_;
  nn::ParameterSet params_;
  nn::Tensor a_hat_;
};

}  // namespace preempt::forecast
