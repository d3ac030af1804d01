#include <gtest/gtest.h>

#include <sstream>

#include "helpers.hpp"
#include "preempt/forecast/loss.hpp"
#include "preempt/forecast/stgcn.hpp"
#include "preempt/forecast/train.hpp"
#include "preempt/nn/adam.hpp"
#include "preempt/nn/checkpoint.hpp"

using namespace preempt;
using namespace preempt::nn;
using testing_util::check_gradients;
using testing_util::make_param;

namespace {

constexpr double kTol = 1e-4;

TEST(Ops, ReluOfNegativeIsZeroWithZeroGradient) {
  auto x = make_param("x", Tensor({1}, {-1.0}));
  Graph g;
  auto y = relu(g.param(x));
  EXPECT_EQ(g.value(y)[0], 0.0);
  g.backward(sum(y));
  EXPECT_EQ(x.grad[0], 0.0);
}

TEST(Ops, MatmulByIdentity) {
  std::mt19937_64 rng(1);
  Graph g;
  const auto b = testing_util::random_tensor({3, 5}, rng);
  auto y = matmul(g.constant(Tensor::identity(3)), g.constant(b));
  EXPECT_EQ(g.value(y).storage(), b.storage());
}

TEST(Ops, GradientOfSumOfSquares) {
  auto x = make_param("x", Tensor({3}, {1, 2, 3}));
  Graph g;
  auto v = g.param(x);
  g.backward(sum(mul(v, v)));
  EXPECT_DOUBLE_EQ(x.grad[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad[1], 4.0);
  EXPECT_DOUBLE_EQ(x.grad[2], 6.0);
}

TEST(Ops, ShapeMismatchThrows) {
  Graph g;
  auto a = g.constant(Tensor({2, 3}));
  auto b = g.constant(Tensor({2, 3}));
  EXPECT_THROW(matmul(a, b), std::invalid_argument);
  EXPECT_THROW(add(a, g.constant(Tensor({3, 2}))), std::invalid_argument);
  EXPECT_THROW(concat(a, g.constant(Tensor({3, 1}))), std::invalid_argument);
}

TEST(Ops, NonFiniteValueTrips) {
  Graph g;
  auto a = g.constant(Tensor({1}, {1e308}));
  EXPECT_THROW(scale(a, 1e10), NumericError);
}

TEST(Ops, BackwardRequiresScalarRoot) {
  Graph g;
  auto x = make_param("x", Tensor({2}, {1, 2}));
  auto v = g.param(x);
  EXPECT_THROW(g.backward(v), std::invalid_argument);
}

TEST(GraphConv, IdentityAdjacencyIsPerNodeLinearMap) {
  std::mt19937_64 rng(2);
  const auto x = testing_util::random_tensor({4, 3, 2}, rng);
  const auto w = testing_util::random_tensor({2, 5}, rng);
  Graph g;
  auto y = graph_conv(g.constant(x), normalized_adjacency(Tensor({3, 3})), g.constant(w));
  auto ref = matmul(g.constant(x.reshaped({12, 2})), g.constant(w));
  for (std::size_t i = 0; i < g.value(y).size(); ++i) EXPECT_NEAR(g.value(y)[i], g.value(ref)[i], 1e-14);
}

TEST(GraphConv, PathGraphRowSums) {
  Tensor a({2, 2}, {0, 1, 1, 0});
  const auto ah = normalized_adjacency(a);
  // A + I = all ones, degrees 2, so every entry is 1/2.
  for (double v : ah.data()) EXPECT_DOUBLE_EQ(v, 0.5);
  Graph g;
  auto y = graph_conv(g.constant(Tensor({1, 2, 2}, 1.0)), ah, g.constant(Tensor::identity(2)));
  for (double v : g.value(y).data()) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(GraphConv, RejectsBadAdjacency) {
  Graph g;
  auto x = g.constant(Tensor({1, 3, 2}));
  auto w = g.constant(Tensor({2, 2}));
  EXPECT_THROW(graph_conv(x, Tensor({3, 2}), w), std::invalid_argument);
  EXPECT_THROW(graph_conv(x, Tensor::identity(4), w), std::invalid_argument);
  EXPECT_THROW(normalized_adjacency(Tensor({2, 3})), std::invalid_argument);
}

TEST(GraphConv, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  Tensor adj({4, 4}, {0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 0, 1, 0, 0});
  const auto ah = normalized_adjacency(adj);
  auto x = make_param("x", testing_util::random_tensor({2, 3, 4, 3}, rng));
  auto w = make_param("w", testing_util::random_tensor({3, 2}, rng));
  const auto target = testing_util::random_tensor({2, 3, 4, 2}, rng);
  const Tensor ones(target.shape(), 1.0);
  auto r = check_gradients({&x, &w}, [&](Graph& g, const std::vector<Var>& v) {
    return weighted_sq_error(graph_conv(v[0], ah, v[1]), g.constant(target), ones);
  }, rng);
  EXPECT_LT(r.max_rel, kTol);
}

// Direct nested-loop reference for temporal_conv on [T x V x C].
Tensor conv_oracle(const Tensor& x, const Tensor& k) {
  const std::size_t t_len = x.dim(0), v = x.dim(1), c = x.dim(2), kappa = k.dim(0), c2 = k.dim(2);
  const long pad = static_cast<long>(kappa - 1) / 2;
  Tensor y({t_len, v, c2});
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t n = 0; n < v; ++n)
      for (std::size_t o = 0; o < c2; ++o) {
        double s = 0.0;
        for (std::size_t j = 0; j < kappa; ++j) {
          const long src = static_cast<long>(t) + static_cast<long>(j) - pad;
          if (src < 0 || src >= static_cast<long>(t_len)) continue;
          for (std::size_t i = 0; i < c; ++i)
            s += x[(static_cast<std::size_t>(src) * v + n) * c + i] * k[(j * c + i) * c2 + o];
        }
        y[(t * v + n) * c2 + o] = s;
      }
  return y;
}

TEST(TemporalConv, MatchesLoopOracle) {
  std::mt19937_64 rng(4);
  const auto x = testing_util::random_tensor({5, 3, 2}, rng);
  for (std::size_t kappa : {1u, 3u, 5u}) {
    const auto k = testing_util::random_tensor({kappa, 2, 4}, rng);
    Graph g;
    auto y = temporal_conv(g.constant(x), g.constant(k));
    const auto ref = conv_oracle(x, k);
    ASSERT_EQ(g.value(y).shape(), ref.shape());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(g.value(y)[i], ref[i], 1e-12);
  }
}

TEST(TemporalConv, IdentityKernelLeavesInputUnchanged) {
  std::mt19937_64 rng(5);
  const auto x = testing_util::random_tensor({6, 2, 3}, rng);
  Graph g;
  auto y = temporal_conv(g.constant(x), g.constant(Tensor::identity(3).reshaped({1, 3, 3})));
  EXPECT_EQ(g.value(y).storage(), x.storage());
}

TEST(TemporalConv, ConstantInputGivesEqualInteriorFrames) {
  std::mt19937_64 rng(6);
  Tensor x({7, 2, 2});
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t i = 0; i < 4; ++i) x[t * 4 + i] = static_cast<double>(i) + 0.5;
  const auto k = testing_util::random_tensor({3, 2, 2}, rng);
  Graph g;
  const auto& y = g.value(temporal_conv(g.constant(x), g.constant(k)));
  for (std::size_t t = 2; t < 6; ++t)
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[t * 4 + i], y[4 + i], 1e-14);
}

TEST(TemporalConv, BatchedGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  auto x = make_param("x", testing_util::random_tensor({2, 5, 3, 2}, rng));
  auto k = make_param("k", testing_util::random_tensor({3, 2, 3}, rng));
  const auto target = testing_util::random_tensor({2, 5, 3, 3}, rng);
  const Tensor ones(target.shape(), 1.0);
  auto r = check_gradients({&x, &k}, [&](Graph& g, const std::vector<Var>& v) {
    return weighted_sq_error(temporal_conv(v[0], v[1]), g.constant(target), ones);
  }, rng);
  EXPECT_LT(r.max_rel, kTol);
  EXPECT_EQ(r.checked, x.value.size() + k.value.size());
}

TEST(TemporalConv, ShortSequenceShorterThanKernel) {
  std::mt19937_64 rng(8);
  auto x = make_param("x", testing_util::random_tensor({1, 2, 2, 2}, rng));
  auto k = make_param("k", testing_util::random_tensor({5, 2, 2}, rng));
  auto r = check_gradients({&x, &k}, [&](Graph& g, const std::vector<Var>& v) {
    auto y = temporal_conv(v[0], v[1]);
    return weighted_sq_error(y, g.constant(Tensor(g.value(y).shape(), 0.3)), Tensor(g.value(y).shape(), 1.0));
  }, rng);
  EXPECT_LT(r.max_rel, kTol);
}

TEST(Ops, ElementwiseAndStructuralGradients) {
  std::mt19937_64 rng(9);
  auto a = make_param("a", testing_util::off_kink_tensor({3, 4}, rng));
  auto b = make_param("b", testing_util::off_kink_tensor({3, 4}, rng));
  auto c = make_param("c", testing_util::random_tensor({3, 2}, rng));
  auto bias = make_param("bias", testing_util::random_tensor({6}, rng));
  auto r = check_gradients({&a, &b, &c, &bias}, [&](Graph& g, const std::vector<Var>& v) {
    auto e = relu(add(mul(v[0], v[1]), scale(sub(v[0], v[1]), 0.7)));
    auto cat = add_bias(concat(reshape(e, {3, 4}), v[2]), v[3]);
    auto m = mean_time(reshape(cat, {1, 3, 6, 1}));
    auto d = time_diff(reshape(cat, {1, 3, 6}));
    return add(sum(mul(m, m)), sum(mul(d, d)));
  }, rng);
  EXPECT_LT(r.max_rel, kTol);
}

TEST(Ops, BackwardIsLinearInTheLoss) {
  std::mt19937_64 rng(10);
  auto w = make_param("w", testing_util::random_tensor({4, 3}, rng));
  const auto x = testing_util::random_tensor({5, 4}, rng);
  auto f1 = [&](Graph& g, Var v) { return sum(mul(matmul(g.constant(x), v), matmul(g.constant(x), v))); };
  auto f2 = [&](Graph& g, Var v) { return sum(relu(matmul(g.constant(x), v))); };
  auto grad_of = [&](auto f) {
    w.grad.fill(0.0);
    Graph g;
    g.backward(f(g, g.param(w)));
    return w.grad.storage();
  };
  const auto g1 = grad_of(f1);
  const auto g2 = grad_of(f2);
  const auto g12 = grad_of([&](Graph& g, Var v) { return add(f1(g, v), f2(g, v)); });
  for (std::size_t i = 0; i < g12.size(); ++i) EXPECT_NEAR(g12[i], g1[i] + g2[i], 1e-12);
}

TEST(Adam, ZeroGradientKeepsParamsAndDecaysMoments) {
  std::vector<double> p{1.0, -2.0};
  std::vector<double> g{0.0, 0.0};
  Moments m{{0.5, 0.5}, {0.25, 0.25}};
  adam_step(p, g, m, 3, {});
  // Bias-corrected m is nonzero, so params move; with zero moments they
  // stay put exactly.
  EXPECT_DOUBLE_EQ(m.m[0], 0.45);
  EXPECT_DOUBLE_EQ(m.v[0], 0.25 * 0.999);
  std::vector<double> q{1.0, -2.0};
  Moments z;
  adam_step(q, g, z, 1, {});
  EXPECT_EQ(q, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepClosedForm) {
  std::vector<double> p{0.0};
  std::vector<double> g{1.0};
  Moments m;
  AdamConfig cfg;
  adam_step(p, g, m, 1, cfg);
  EXPECT_NEAR(p[0], -cfg.lr / (1.0 + cfg.eps), 1e-15);
}

TEST(Adam, DescendsQuadratic) {
  std::vector<double> x{1.0};
  Moments m;
  for (long t = 1; t <= 100; ++t) {
    std::vector<double> g{2.0 * x[0]};
    adam_step(x, g, m, t, {.lr = 0.1});
  }
  EXPECT_LT(std::abs(x[0]), 0.1);
}

TEST(Adam, RejectsBadInput) {
  std::vector<double> p{0.0};
  std::vector<double> g{std::nan("")};
  Moments m;
  EXPECT_THROW(adam_step(p, g, m, 1, {}), NumericError);
  std::vector<double> ok{0.0};
  EXPECT_THROW(adam_step(p, ok, m, 0, {}), std::invalid_argument);
}

forecast::Batch random_batch(std::size_t b, std::size_t k, std::mt19937_64& rng) {
  forecast::Batch out;
  out.motion = testing_util::random_tensor({b, kHistoryFrames, k, 4}, rng, 0.2, 0.8);
  out.scene = testing_util::random_tensor({b, forecast::SceneEncoding::kLength}, rng, 0.0, 1.0);
  out.last = testing_util::random_tensor({b, k, 2}, rng, 0.2, 0.8);
  out.future = testing_util::random_tensor({b, kHorizonFrames, k, 2}, rng, 0.2, 0.8);
  return out;
}

double batch_loss(const forecast::StgcnNet& net, const forecast::Batch& b) {
  Graph g(false);
  auto pred = g.constant(net.predict(b.motion, b.scene, b.last));
  return forecast::loss_graph(g, pred, b.future).values.total;
}

void check_forecaster_gradient(bool scene_aware, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  forecast::StgcnConfig cfg;
  cfg.scene_aware = scene_aware;
  forecast::StgcnNet net(cfg);
  net.initialize(seed);
  // Nonzero biases so every path is exercised.
  for (auto& p : net.params().all())
    if (p.value.rank() == 1)
      for (auto& v : p.value.data()) v = std::uniform_real_distribution<double>(-0.05, 0.05)(rng);
  const auto b = random_batch(2, 42, rng);
  const auto r = testing_util::check_composite_loss(net, b.motion, b.scene, b.last, b.future, rng, 6);
  EXPECT_EQ(r.checked, 6 * net.params().all().size());
  EXPECT_LT(r.redrawn, r.checked);
  EXPECT_LT(r.max_rel, kTol) << r.worst;
}

TEST(Forecaster, SceneAwareCompositeLossGradientMatchesFiniteDifferences) { check_forecaster_gradient(true, 11); }

TEST(Forecaster, VanillaCompositeLossGradientMatchesFiniteDifferences) { check_forecaster_gradient(false, 12); }

TEST(Forecaster, ParameterBudget) {
  forecast::StgcnNet sa({});
  EXPECT_EQ(sa.params().count(), 214860u);
  EXPECT_NEAR(static_cast<double>(sa.params().count()), 210000.0, 0.15 * 210000.0);
  forecast::StgcnConfig v;
  v.scene_aware = false;
  EXPECT_EQ(forecast::StgcnNet(v).params().count(), 204300u);
}

TEST(Forecaster, LossCoefficients) {
  EXPECT_DOUBLE_EQ(forecast::combine(1, 1, 1), 1.15);
  const auto w = forecast::horizon_weights(15);
  double s = 0.0;
  for (double x : w) s += x;
  EXPECT_DOUBLE_EQ(s, 1.0);
  EXPECT_TRUE(std::is_sorted(w.begin(), w.end()));
}

TEST(Forecaster, TrainingIsDeterministic) {
  std::mt19937_64 rng(13);
  std::vector<forecast::Sample> data;
  for (int i = 0; i < 6; ++i) {
    const auto b = random_batch(1, 21, rng);
    data.push_back({b.motion.reshaped({kHistoryFrames, 21, 4}), b.scene.reshaped({forecast::SceneEncoding::kLength}),
                    b.last.reshaped({21, 2}), b.future.reshaped({kHorizonFrames, 21, 2})});
  }
  auto run = [&] {
    forecast::StgcnConfig cfg;
    cfg.keypoints = 21;
    forecast::StgcnNet net(cfg);
    net.initialize(3);
    forecast::TrainConfig tc;
    tc.batch_size = 4;
    tc.max_epochs = 3;
    tc.seed = 9;
    const auto res = forecast::train(net, data, data, tc);
    std::vector<double> flat;
    for (const auto& p : net.params().all()) flat.insert(flat.end(), p.value.data().begin(), p.value.data().end());
    return std::pair(flat, res.curve.back().train_total);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Checkpoint, RoundTripsAndRejectsCorruption) {
  forecast::StgcnConfig cfg;
  cfg.keypoints = 1;
  forecast::StgcnNet net(cfg);
  net.initialize(4);
  std::stringstream ss;
  write_checkpoint(ss, snapshot(net.params()));
  const std::string bytes = ss.str();

  forecast::StgcnNet other(cfg);
  std::istringstream in(bytes);
  restore(other.params(), read_checkpoint(in));
  for (std::size_t i = 0; i < net.params().all().size(); ++i)
    EXPECT_EQ(net.params().all()[i].value.storage(), other.params().all()[i].value.storage());

  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_checkpoint(truncated), DataError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream magic(bad);
  EXPECT_THROW(read_checkpoint(magic), DataError);

  forecast::StgcnConfig wider = cfg;
  wider.motion_dim = 16;
  forecast::StgcnNet mismatched(wider);
  std::istringstream in2(bytes);
  EXPECT_THROW(restore(mismatched.params(), read_checkpoint(in2)), DataError);
}

}  // namespace
