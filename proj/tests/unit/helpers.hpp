#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "preempt/core/hand.hpp"
#include "preempt/forecast/loss.hpp"
#include "preempt/forecast/stgcn.hpp"
#include "preempt/nn/graph.hpp"
#include "preempt/track/scene.hpp"

namespace testing_util {

using namespace preempt;

inline nn::Tensor random_tensor(nn::Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor t(std::move(s));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

// Values in [-1, -0.1] U [0.1, 1]: keeps relu inputs off its kink.
inline nn::Tensor off_kink_tensor(nn::Shape s, std::mt19937_64& rng) {
  auto t = random_tensor(std::move(s), rng, 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : t.data())
    if (sign(rng)) v = -v;
  return t;
}

using ScalarFn = std::function<nn::Var(nn::Graph&, const std::vector<nn::Var>&)>;

struct GradCheck {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

// Analytic gradients of f w.r.t. the parameters against central
// differences with step h. `per_tensor` limits the entries checked in
// each parameter (0 = all), drawn with `rng`.
inline GradCheck check_gradients(std::vector<nn::Parameter*> params, const ScalarFn& f, std::mt19937_64& rng,
                                 std::size_t per_tensor = 0, double h = 1e-5) {
  auto eval = [&] {
    nn::Graph g(false);
    std::vector<nn::Var> vs;
    for (auto* p : params) vs.push_back(g.constant(p->value));
    return g.value(f(g, vs))[0];
  };
  for (auto* p : params) p->grad.fill(0.0);
  {
    nn::Graph g;
    std::vector<nn::Var> vs;
    for (auto* p : params) vs.push_back(g.param(*p));
    g.backward(f(g, vs));
  }
  GradCheck out;
  for (auto* p : params) {
    std::vector<std::size_t> idx(p->value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (per_tensor && per_tensor < idx.size()) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(per_tensor);
    }
    for (auto i : idx) {
      const double keep = p->value[i];
      p->value[i] = keep + h;
      const double up = eval();
      p->value[i] = keep - h;
      const double down = eval();
      p->value[i] = keep;
      const double num = (up - down) / (2 * h);
      const double ana = p->grad[i];
      const double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6});
      out.max_rel = std::max(out.max_rel, rel);
      ++out.checked;
    }
  }
  return out;
}

struct LossCheck {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::size_t redrawn = 0;  // entries whose +-h step changed a ReLU sign
  std::string worst;
};

// Composite forecasting loss: analytic parameter gradients against central
// differences on `per_tensor` random entries of every parameter. Central
// differences are only valid where the loss is smooth on [x-h, x+h], so an
// entry whose step flips the sign of any ReLU input is redrawn.
inline LossCheck check_composite_loss(forecast::StgcnNet& net, const nn::Tensor& motion, const nn::Tensor& scene,
                                      const nn::Tensor& last, const nn::Tensor& future, std::mt19937_64& rng,
                                      std::size_t per_tensor, double h = 1e-6) {
  struct Eval {
    double loss;
    std::vector<bool> pattern;
  };
  auto eval = [&] {
    nn::Graph g(false);
    auto pred = net.forward(g, motion, scene, last);
    Eval e{g.value(forecast::loss_graph(g, pred, future).total)[0], {}};
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.node(i).op == nn::Op::Relu)
        for (double v : g.node(g.node(i).inputs[0]).value.data()) e.pattern.push_back(v > 0);
    return e;
  };
  net.params().zero_grad();
  {
    nn::Graph g;
    g.backward(forecast::loss_graph(g, net.forward(g, motion, scene, last), future).total);
  }
  const auto base = eval().pattern;
  LossCheck out;
  for (auto& p : net.params().all()) {
    std::uniform_int_distribution<std::size_t> pick(0, p.value.size() - 1);
    std::size_t done = 0;
    for (std::size_t attempt = 0; done < per_tensor && attempt < 20 * per_tensor; ++attempt) {
      const std::size_t i = pick(rng);
      const double keep = p.value[i];
      p.value[i] = keep + h;
      const auto up = eval();
      p.value[i] = keep - h;
      const auto down = eval();
      p.value[i] = keep;
      if (up.pattern != base || down.pattern != base) {
        ++out.redrawn;
        continue;
      }
      const double num = (up.loss - down.loss) / (2 * h), ana = p.grad[i];
      const double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6});
      if (rel >= out.max_rel) {
        out.max_rel = rel;
        out.worst = p.name + "[" + std::to_string(i) + "]";
      }
      ++out.checked;
      ++done;
    }
  }
  return out;
}

inline nn::Parameter make_param(std::string name, nn::Tensor value) {
  nn::Parameter p{std::move(name), std::move(value), nn::Tensor()};
  p.grad = nn::Tensor(p.value.shape());
  return p;
}

// A K=42 frame with every keypoint at `p` (the left hand parked far away).
inline PoseFrame frame_at(std::int64_t t, Point p, std::size_t k = 42) {
  std::vector<Point> kp(k, p);
  for (std::size_t i = hand::kLandmarksPerHand; i < k; ++i) kp[i] = {40.0, 700.0};
  return make_frame(t, std::move(kp), nullptr);
}

// Seven 40x40 blocks in a row along y = 100, colors in canonical order.
inline std::vector<track::Block> row_blocks() {
  std::vector<track::Block> b;
  for (int i = 0; i < kNumColors; ++i)
    b.push_back({BlockId{i}, color_from_index(i), BBox{100.0 + 80.0 * i, 100.0, 40.0, 40.0}, track::BlockState::Resting, {}});
  return b;
}

inline std::vector<Color> canonical_target() { return {kAllColors.begin(), kAllColors.end()}; }

inline std::vector<track::BlockObservation> observe(const std::vector<track::Block>& blocks) {
  std::vector<track::BlockObservation> o;
  for (const auto& b : blocks) o.push_back({b.id, b.bbox, true});
  return o;
}

}  // namespace testing_util
