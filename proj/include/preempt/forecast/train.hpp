#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "preempt/forecast/loss.hpp"
#include "preempt/forecast/stgcn.hpp"
#include "preempt/forecast/window.hpp"
#include "preempt/nn/adam.hpp"
#include "preempt/nn/checkpoint.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace preempt::forecast {

/// Batch activations are megabytes each and are freed and reallocated
/// every step; keeping them on the heap avoids an mmap and fresh page
/// faults per tensor.
inline void retain_large_allocations() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)once;
#endif
}

/// One training example, already in model space.
struct Sample {
  nn::Tensor motion;  // [T x K x 4]
  nn::Tensor scene;   // [35]
  nn::Tensor last;    // [K x 2]
  nn::Tensor future;  // [H x K x 2]
};

inline Sample make_sample(const PoseWindow& history, const SceneEncoding& scene, const PoseWindow& future) {
  if (history.keypoints() != future.keypoints()) throw DataError("sample history/future K mismatch");
  const auto& lf = history.last();
  nn::Tensor last({history.keypoints(), 2});
  for (std::size_t i = 0; i < lf.size(); ++i) {
    last[i * 2] = lf.keypoints[i].x * kPositionScale;
    last[i * 2 + 1] = lf.keypoints[i].y * kPositionScale;
  }
  return {history.to_tensor(), scene.to_tensor(), std::move(last), future.positions_tensor()};
}

struct Batch {
  nn::Tensor motion, scene, last, future;
};

inline Batch make_batch(const std::vector<Sample>& data, std::span<const std::size_t> idx) {
  auto stack = [&](auto member) {
    const nn::Tensor& first = data[idx[0]].*member;
    nn::Shape s = first.shape();
    s.insert(s.begin(), idx.size());
    nn::Tensor out(s);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const nn::Tensor& t = data[idx[b]].*member;
      if (t.shape() != first.shape()) throw DataError("samples in a batch differ in shape");
      std::copy_n(t.ptr(), t.size(), out.ptr() + b * first.size());
    }
    return out;
  };
  return {stack(&Sample::motion), stack(&Sample::scene), stack(&Sample::last), stack(&Sample::future)};
}

struct TrainConfig {
  std::size_t batch_size = 32;
  int max_epochs = 200;
  int patience = 10;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double max_seconds = 0.0;  // wall-clock cap on the whole run; 0 disables
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_total = 0.0;
  LossBreakdown val;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> curve;
  int best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
  bool hit_time_cap = false;
};

/// Sample-weighted mean loss over a dataset.
inline LossBreakdown evaluate(const StgcnNet& net, const std::vector<Sample>& data, std::size_t batch_size = 64) {
  LossBreakdown sum;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t s = 0; s < data.size(); s += batch_size) {
    const std::size_t e = std::min(data.size(), s + batch_size);
    const auto batch = make_batch(data, std::span(idx).subspan(s, e - s));
    nn::Graph g(false);
    auto pred = g.constant(net.predict(batch.motion, batch.scene, batch.last));
    const auto l = loss_graph(g, pred, batch.future).values;
    const double n = static_cast<double>(e - s);
    sum.l_tip += l.l_tip * n;
    sum.l_pose += l.l_pose * n;
    sum.l_smooth += l.l_smooth * n;
  }
  const double n = static_cast<double>(data.size());
  LossBreakdown out{sum.l_tip / n, sum.l_pose / n, sum.l_smooth / n, 0.0};
  out.total = combine(out.l_tip, out.l_pose, out.l_smooth);
  return out;
}

/// Mini-batch Adam on the composite loss with early stopping on the
/// validation total. Leaves the best-validation parameters in `net`.
inline TrainResult train(StgcnNet& net, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                         const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch = {}) {
  if (train_set.empty()) throw DataError("training set is empty");
  if (val_set.empty()) throw DataError("validation set is empty");
  if (cfg.batch_size == 0 || cfg.max_epochs < 1) throw ConfigError("bad training configuration");

  retain_large_allocations();
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::mt19937_64 rng(cfg.seed);
  nn::Adam opt({.lr = cfg.lr});
  auto& params = net.params();
  TrainResult res;
  auto best = nn::snapshot(params);
  int since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    try {
      for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
        const std::size_t e = std::min(order.size(), s + cfg.batch_size);
        const auto batch = make_batch(train_set, std::span(order).subspan(s, e - s));
        nn::Graph g;
        auto pred = net.forward(g, batch.motion, batch.scene, batch.last);
        auto l = loss_graph(g, pred, batch.future);
        params.zero_grad();
        g.backward(l.total);
        opt.step(params);
        total += l.values.total * static_cast<double>(e - s);
      }
    } catch (const NumericError& err) {
      throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": " + err.what());
    }

    EpochStats st;
    st.epoch = epoch;
    st.train_total = total / static_cast<double>(order.size());
    st.val = evaluate(net, val_set);
    st.seconds = std::chrono::duration<double>(clock::now() - start).count();
    if (!std::isfinite(st.train_total) || !std::isfinite(st.val.total))
      throw NumericError("training diverged in epoch " + std::to_string(epoch));
    res.curve.push_back(st);
    if (on_epoch) on_epoch(st);

    if (st.val.total < res.best_val) {
      res.best_val = st.val.total;
      res.best_epoch = epoch;
      best = nn::snapshot(params);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      res.stopped_early = true;
      break;
    }
    if (cfg.max_seconds > 0 && st.seconds >= cfg.max_seconds) {
      res.hit_time_cap = true;
      break;
    }
  }
  nn::restore(params, best);
  return res;
}

}  // namespace preempt::forecast
