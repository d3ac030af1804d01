#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "preempt/nn/tensor.hpp"

namespace preempt::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

/// A named learnable tensor and its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Ordered collection of parameters. Order is stable and defines the
/// checkpoint layout and the optimizer's moment layout.
class ParameterSet {
 public:
  Parameter& add(std::string name, Shape shape) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter " + name);
    index_[name] = params_.size();
    Tensor v(shape);
    Tensor g(shape);
    params_.push_back({std::move(name), std::move(v), std::move(g)});
    return params_.back();
  }

  Parameter& operator[](std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw std::out_of_range("no parameter " + std::string(name));
    return params_[it->second];
  }
  const Parameter& operator[](std::string_view name) const {
    return const_cast<ParameterSet&>(*this)[name];
  }
  bool contains(std::string_view name) const { return index_.contains(std::string(name)); }

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }
  void zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
  }

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Xavier-uniform initialization: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
inline void xavier_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (auto& v : t.data()) v = dist(rng);
}

enum class Op {
  Constant,
  Param,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  Relu,
  Reshape,
  Concat,
  AddBias,
  GraphConv,
  TemporalConv,
  MeanTime,
  Sum,
  WeightedSqError,
  TimeDiff,
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;
};

/// Reverse-mode tape. Nodes are appended in creation order, which is a
/// topological order; backward() walks it in reverse exactly once.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  struct Node {
    Op op = Op::Constant;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Graph() = default;
  /// With gradients disabled, parameters enter as constants and no
  /// backward closures are recorded (inference).
  explicit Graph(bool grad_enabled) : grad_enabled_(grad_enabled) {}

  Var constant(Tensor t) { return push(Op::Constant, {}, std::move(t), false, nullptr); }

  Var param(Parameter& p) {
    auto v = push(Op::Param, {}, p.value, grad_enabled_, nullptr);
    nodes_[v.id].param = &p;
    return v;
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(root)/d(root) = 1 and accumulates gradients into every node
  /// that needs them; parameter gradients are added to Parameter::grad.
  void backward(Var root) {
    auto& r = nodes_.at(root.id);
    if (r.value.size() != 1) throw std::invalid_argument("backward root must be a scalar");
    if (!r.needs_grad) return;
    ensure_grad(root.id);
    r.grad[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.needs_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param) {
        auto& pg = n.param->grad;
        for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
      }
    }
  }

  // Used by op implementations.
  Var push(Op op, std::vector<std::size_t> inputs, Tensor value, bool needs_grad, BackwardFn fn) {
    if (!value.all_finite()) throw NumericError("non-finite value produced by op " + op_name(op));
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }
  Node& mut(std::size_t id) { return nodes_[id]; }
  bool needs(std::size_t id) const { return nodes_[id].needs_grad; }
  Tensor& grad_of(std::size_t id) {
    ensure_grad(id);
    return nodes_[id].grad;
  }

  static std::string op_name(Op op) {
    static const char* names[] = {"constant", "param",  "matmul",        "add",       "sub",
                                  "mul",      "scale",  "relu",          "reshape",   "concat",
                                  "add_bias", "graph_conv", "temporal_conv", "mean_time", "sum",
                                  "weighted_sq_error", "time_diff"};
    return names[static_cast<int>(op)];
  }

 private:
  void ensure_grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
  }

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

namespace detail {

inline Graph& same_graph(Var a, Var b) {
  if (a.graph != b.graph || !a.graph) throw std::invalid_argument("vars belong to different graphs");
  return *a.graph;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

inline void axpy(Tensor& dst, const Tensor& src, double s = 1.0) {
  double* d = dst.ptr();
  const double* x = src.ptr();
  for (std::size_t i = 0, n = dst.size(); i < n; ++i) d[i] += s * x[i];
}

}  // namespace detail

/// [m x k] * [k x n] -> [m x n].
inline Var matmul(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(av.shape()) + " * " +
                                shape_str(bv.shape()));
  const auto m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  MatMap(out.ptr(), m, n).noalias() = CMatMap(av.ptr(), m, k) * CMatMap(bv.ptr(), k, n);
  const std::size_t ia = a.id, ib = b.id;
  return g.push(Op::MatMul, {ia, ib}, std::move(out), g.needs(ia) || g.needs(ib),
                [=](Graph& gr, std::size_t self) {
                  const auto& dy = gr.node(self).grad;
                  CMatMap dY(dy.ptr(), m, n);
                  if (gr.needs(ia)) {
                    auto& da = gr.grad_of(ia);
                    MatMap(da.ptr(), m, k).noalias() += dY * CMatMap(gr.node(ib).value.ptr(), k, n).transpose();
                  }
                  if (gr.needs(ib)) {
                    auto& db = gr.grad_of(ib);
                    MatMap(db.ptr(), k, n).noalias() += CMatMap(gr.node(ia).value.ptr(), m, k).transpose() * dY;
                  }
                });
}

inline Var add(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  detail::require_same_shape(g.value(a), g.value(b), "add");
  Tensor out = g.value(a);
  detail::axpy(out, g.value(b));
  const std::size_t ia = a.id, ib = b.id;
  return g.push(Op::Add, {ia, ib}, std::move(out), g.needs(ia) || g.needs(ib),
                [=](Graph& gr, std::size_t self) {
                  const auto& dy = gr.node(self).grad;
                  if (gr.needs(ia)) detail::axpy(gr.grad_of(ia), dy);
                  if (gr.needs(ib)) detail::axpy(gr.grad_of(ib), dy);
                });
}

inline Var sub(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  detail::require_same_shape(g.value(a), g.value(b), "sub");
  Tensor out = g.value(a);
  detail::axpy(out, g.value(b), -1.0);
  const std::size_t ia = a.id, ib = b.id;
  return g.push(Op::Sub, {ia, ib}, std::move(out), g.needs(ia) || g.needs(ib),
                [=](Graph& gr, std::size_t self) {
                  const auto& dy = gr.node(self).grad;
                  if (gr.needs(ia)) detail::axpy(gr.grad_of(ia), dy);
                  if (gr.needs(ib)) detail::axpy(gr.grad_of(ib), dy, -1.0);
                });
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  detail::require_same_shape(g.value(a), g.value(b), "mul");
  Tensor out = g.value(a);
  const auto& bv = g.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return g.push(Op::Mul, {ia, ib}, std::move(out), g.needs(ia) || g.needs(ib),
                [=](Graph& gr, std::size_t self) {
                  const auto& dy = gr.node(self).grad;
                  if (gr.needs(ia)) {
                    auto& da = gr.grad_of(ia);
                    const auto& bvv = gr.node(ib).value;
                    for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i] * bvv[i];
                  }
                  if (gr.needs(ib)) {
                    auto& db = gr.grad_of(ib);
                    const auto& avv = gr.node(ia).value;
                    for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[i] * avv[i];
                  }
                });
}

inline Var scale(Var a, double s) {
  Graph& g = *a.graph;
  Tensor out = g.value(a);
  for (auto& v : out.data()) v *= s;
  const std::size_t ia = a.id;
  return g.push(Op::Scale, {ia}, std::move(out), g.needs(ia), [=](Graph& gr, std::size_t self) {
    detail::axpy(gr.grad_of(ia), gr.node(self).grad, s);
  });
}

inline Var relu(Var a) {
  Graph& g = *a.graph;
  Tensor out = g.value(a);
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  const std::size_t ia = a.id;
  return g.push(Op::Relu, {ia}, std::move(out), g.needs(ia), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.node(self).grad;
    const auto& x = gr.node(ia).value;
    auto& da = gr.grad_of(ia);
    for (std::size_t i = 0; i < da.size(); ++i)
      if (x[i] > 0.0) da[i] += dy[i];
  });
}

inline Var reshape(Var a, Shape shape) {
  Graph& g = *a.graph;
  Tensor out = g.value(a).reshaped(std::move(shape));
  const std::size_t ia = a.id;
  return g.push(Op::Reshape, {ia}, std::move(out), g.needs(ia), [=](Graph& gr, std::size_t self) {
    detail::axpy(gr.grad_of(ia), gr.node(self).grad);
  });
}

/// Concatenates two [N x p] and [N x q] matrices along columns.
inline Var concat(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(0) != bv.dim(0))
    throw std::invalid_argument("concat: shape mismatch " + shape_str(av.shape()) + " | " +
                                shape_str(bv.shape()));
  const auto n = av.dim(0), p = av.dim(1), q = bv.dim(1);
  Tensor out({n, p + q});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(av.ptr() + i * p, p, out.ptr() + i * (p + q));
    std::copy_n(bv.ptr() + i * q, q, out.ptr() + i * (p + q) + p);
  }
  const std::size_t ia = a.id, ib = b.id;
  return g.push(Op::Concat, {ia, ib}, std::move(out), g.needs(ia) || g.needs(ib),
                [=](Graph& gr, std::size_t self) {
                  const auto& dy = gr.node(self).grad;
                  if (gr.needs(ia)) {
                    auto& da = gr.grad_of(ia);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < p; ++j) da[i * p + j] += dy[i * (p + q) + j];
                  }
                  if (gr.needs(ib)) {
                    auto& db = gr.grad_of(ib);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < q; ++j) db[i * q + j] += dy[i * (p + q) + p + j];
                  }
                });
}

/// Adds a bias vector [C] to every row of x[..., C].
inline Var add_bias(Var x, Var b) {
  Graph& g = detail::same_graph(x, b);
  const auto& xv = g.value(x);
  const auto& bv = g.value(b);
  const std::size_t c = bv.size();
  if (bv.rank() != 1 || xv.rank() == 0 || xv.shape().back() != c)
    throw std::invalid_argument("add_bias: shape mismatch " + shape_str(xv.shape()) + " + " +
                                shape_str(bv.shape()));
  Tensor out = xv;
  const std::size_t rows = out.size() / c;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] += bv[j];
  const std::size_t ix = x.id, ib = b.id;
  return g.push(Op::AddBias, {ix, ib}, std::move(out), g.needs(ix) || g.needs(ib),
                [=](Graph& gr, std::size_t self) {
                  const auto& dy = gr.node(self).grad;
                  if (gr.needs(ix)) detail::axpy(gr.grad_of(ix), dy);
                  if (gr.needs(ib)) {
                    auto& db = gr.grad_of(ib);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < c; ++j) db[j] += dy[r * c + j];
                  }
                });
}

/// Fully connected layer on [N x in] rows.
inline Var linear(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

/// Symmetric degree normalization of an adjacency with self-loops:
/// D^-1/2 (A + I) D^-1/2.
inline Tensor normalized_adjacency(const Tensor& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw std::invalid_argument("adjacency must be square");
  const std::size_t v = a.dim(0);
  Tensor ai = a;
  for (std::size_t i = 0; i < v; ++i) ai.at(i, i) += 1.0;
  std::vector<double> d(v, 0.0);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = 0; j < v; ++j) d[i] += ai.at(i, j);
  Tensor out({v, v});
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = 0; j < v; ++j) out.at(i, j) = ai.at(i, j) / std::sqrt(d[i] * d[j]);
  return out;
}

/// Spatial graph convolution: for every leading index n (e.g. batch and
/// frame), Y_n = A_hat * X_n * W, with X_n of shape [V x C_in].
/// A_hat is a fixed (non-learned) [V x V] matrix.
inline Var graph_conv(Var x, const Tensor& a_hat, Var w) {
  Graph& g = detail::same_graph(x, w);
  const auto& xv = g.value(x);
  const auto& wv = g.value(w);
  if (a_hat.rank() != 2 || a_hat.dim(0) != a_hat.dim(1))
    throw std::invalid_argument("graph_conv: A_hat must be square, got " + shape_str(a_hat.shape()));
  const std::size_t v = a_hat.dim(0);
  if (xv.rank() < 2 || xv.dim(xv.rank() - 2) != v)
    throw std::invalid_argument("graph_conv: node count mismatch " + shape_str(xv.shape()) + " vs A_hat " +
                                shape_str(a_hat.shape()));
  if (wv.rank() != 2 || wv.dim(0) != xv.shape().back())
    throw std::invalid_argument("graph_conv: weight shape " + shape_str(wv.shape()) + " vs input " +
                                shape_str(xv.shape()));
  const std::size_t cin = wv.dim(0), cout = wv.dim(1);
  const std::size_t rows = xv.size() / cin;  // N * V
  const std::size_t n = rows / v;

  // Sparse rows of A_hat.
  struct Entry {
    std::size_t col;
    double w;
  };
  std::vector<std::vector<Entry>> sparse(v);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = 0; j < v; ++j)
      if (a_hat.at(i, j) != 0.0) sparse[i].push_back({j, a_hat.at(i, j)});

  Tensor z({rows, cout});
  MatMap(z.ptr(), rows, cout).noalias() = CMatMap(xv.ptr(), rows, cin) * CMatMap(wv.ptr(), cin, cout);
  Shape out_shape = xv.shape();
  out_shape.back() = cout;
  Tensor out(out_shape);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < v; ++i) {
      double* y = out.ptr() + (b * v + i) * cout;
      for (const auto& e : sparse[i]) {
        const double* zr = z.ptr() + (b * v + e.col) * cout;
        for (std::size_t c = 0; c < cout; ++c) y[c] += e.w * zr[c];
      }
    }

  const std::size_t ix = x.id, iw = w.id;
  return g.push(Op::GraphConv, {ix, iw}, std::move(out), g.needs(ix) || g.needs(iw),
                [=, sparse = std::move(sparse)](Graph& gr, std::size_t self) {
                  const auto& dy = gr.node(self).grad;
                  Tensor dz({rows, cout});
                  for (std::size_t b = 0; b < n; ++b)
                    for (std::size_t i = 0; i < v; ++i) {
                      const double* yr = dy.ptr() + (b * v + i) * cout;
                      for (const auto& e : sparse[i]) {
                        double* d = dz.ptr() + (b * v + e.col) * cout;
                        for (std::size_t c = 0; c < cout; ++c) d[c] += e.w * yr[c];
                      }
                    }
                  CMatMap dZ(dz.ptr(), rows, cout);
                  if (gr.needs(iw)) {
                    auto& dw = gr.grad_of(iw);
                    MatMap(dw.ptr(), cin, cout).noalias() +=
                        CMatMap(gr.node(ix).value.ptr(), rows, cin).transpose() * dZ;
                  }
                  if (gr.needs(ix)) {
                    auto& dx = gr.grad_of(ix);
                    MatMap(dx.ptr(), rows, cin).noalias() +=
                        dZ * CMatMap(gr.node(iw).value.ptr(), cin, cout).transpose();
                  }
                });
}

/// 1-D convolution along the frame axis of x[B x T x V x C] (or
/// [T x V x C]) with kernel [kappa x C x C'], zero "same" padding, odd
/// kappa: Y[b,t] = sum_k X[b, t + k - (kappa-1)/2] * K_k.
inline Var temporal_conv(Var x, Var kernel) {
  Graph& g = detail::same_graph(x, kernel);
  const auto& xv = g.value(x);
  const auto& kv = g.value(kernel);
  if (xv.rank() != 3 && xv.rank() != 4)
    throw std::invalid_argument("temporal_conv: input must be [B x T x V x C] or [T x V x C]");
  const bool batched = xv.rank() == 4;
  const std::size_t bsz = batched ? xv.dim(0) : 1;
  const std::size_t t_len = xv.dim(batched ? 1 : 0);
  const std::size_t v = xv.dim(batched ? 2 : 1);
  const std::size_t c = xv.shape().back();
  if (kv.rank() != 3 || kv.dim(1) != c || kv.dim(0) % 2 == 0)
    throw std::invalid_argument("temporal_conv: kernel " + shape_str(kv.shape()) + " incompatible with input " +
                                shape_str(xv.shape()));
  const std::size_t kappa = kv.dim(0), c2 = kv.dim(2);
  const std::size_t pad = (kappa - 1) / 2;
  const std::size_t frame_rows = v;  // rows of the [.. x C] matrix per frame

  // For tap k, output frames [t0, t1) read input frames shifted by k - pad.
  // Each (sample, tap) pair is one GEMM over a contiguous row range.
  auto tap_range = [=](std::size_t k) {
    const std::size_t t0 = k < pad ? pad - k : 0;
    const std::size_t t1 = k > pad ? t_len - (k - pad) : t_len;
    return std::pair{t0, t1};
  };
  auto in_row = [=](std::size_t b, std::size_t t, std::size_t k) { return (b * t_len + t + k - pad) * frame_rows; };
  auto out_row = [=](std::size_t b, std::size_t t) { return (b * t_len + t) * frame_rows; };

  Shape out_shape = xv.shape();
  out_shape.back() = c2;
  Tensor out(out_shape);
  for (std::size_t b = 0; b < bsz; ++b)
    for (std::size_t k = 0; k < kappa; ++k) {
      const auto [t0, t1] = tap_range(k);
      if (t1 <= t0) continue;
      const std::size_t n = (t1 - t0) * frame_rows;
      MatMap(out.ptr() + out_row(b, t0) * c2, n, c2).noalias() +=
          CMatMap(xv.ptr() + in_row(b, t0, k) * c, n, c) * CMatMap(kv.ptr() + k * c * c2, c, c2);
    }

  const std::size_t ix = x.id, ik = kernel.id;
  return g.push(Op::TemporalConv, {ix, ik}, std::move(out), g.needs(ix) || g.needs(ik),
                [=](Graph& gr, std::size_t self) {
                  const auto& dy = gr.node(self).grad;
                  const auto& xin = gr.node(ix).value;
                  const auto& kin = gr.node(ik).value;
                  const bool need_k = gr.needs(ik), need_x = gr.needs(ix);
                  Tensor* dk = need_k ? &gr.grad_of(ik) : nullptr;
                  Tensor* dx = need_x ? &gr.grad_of(ix) : nullptr;
                  for (std::size_t b = 0; b < bsz; ++b)
                    for (std::size_t k = 0; k < kappa; ++k) {
                      const auto [t0, t1] = tap_range(k);
                      if (t1 <= t0) continue;
                      const std::size_t n = (t1 - t0) * frame_rows;
                      CMatMap dY(dy.ptr() + out_row(b, t0) * c2, n, c2);
                      if (need_k)
                        MatMap(dk->ptr() + k * c * c2, c, c2).noalias() +=
                            CMatMap(xin.ptr() + in_row(b, t0, k) * c, n, c).transpose() * dY;
                      if (need_x)
                        MatMap(dx->ptr() + in_row(b, t0, k) * c, n, c).noalias() +=
                            dY * CMatMap(kin.ptr() + k * c * c2, c, c2).transpose();
                    }
                });
}

/// Mean over the frame axis: [B x T x V x C] -> [B x (V*C)].
inline Var mean_time(Var x) {
  Graph& g = *x.graph;
  const auto& xv = g.value(x);
  if (xv.rank() != 4) throw std::invalid_argument("mean_time: input must be [B x T x V x C]");
  const std::size_t bsz = xv.dim(0), t_len = xv.dim(1), f = xv.dim(2) * xv.dim(3);
  Tensor out({bsz, f});
  const double inv = 1.0 / static_cast<double>(t_len);
  for (std::size_t b = 0; b < bsz; ++b)
    for (std::size_t t = 0; t < t_len; ++t) {
      const double* src = xv.ptr() + (b * t_len + t) * f;
      double* dst = out.ptr() + b * f;
      for (std::size_t j = 0; j < f; ++j) dst[j] += src[j] * inv;
    }
  const std::size_t ix = x.id;
  return g.push(Op::MeanTime, {ix}, std::move(out), g.needs(ix), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.node(self).grad;
    auto& dx = gr.grad_of(ix);
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t t = 0; t < t_len; ++t) {
        double* dst = dx.ptr() + (b * t_len + t) * f;
        const double* src = dy.ptr() + b * f;
        for (std::size_t j = 0; j < f; ++j) dst[j] += src[j] * inv;
      }
  });
}

inline Var sum(Var x) {
  Graph& g = *x.graph;
  const auto& xv = g.value(x);
  double s = 0.0;
  for (double v : xv.data()) s += v;
  const std::size_t ix = x.id;
  return g.push(Op::Sum, {ix}, Tensor::scalar(s), g.needs(ix), [=](Graph& gr, std::size_t self) {
    const double d = gr.node(self).grad[0];
    for (auto& v : gr.grad_of(ix).data()) v += d;
  });
}

/// Scalar sum_i w_i (a_i - b_i)^2 with constant weights w.
inline Var weighted_sq_error(Var a, Var b, const Tensor& w) {
  Graph& g = detail::same_graph(a, b);
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  detail::require_same_shape(av, bv, "weighted_sq_error");
  detail::require_same_shape(av, w, "weighted_sq_error weights");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += w[i] * d * d;
  }
  const std::size_t ia = a.id, ib = b.id;
  return g.push(Op::WeightedSqError, {ia, ib}, Tensor::scalar(s), g.needs(ia) || g.needs(ib),
                [=](Graph& gr, std::size_t self) {
                  const double d = gr.node(self).grad[0];
                  const auto& x = gr.node(ia).value;
                  const auto& y = gr.node(ib).value;
                  if (gr.needs(ia)) {
                    auto& da = gr.grad_of(ia);
                    for (std::size_t i = 0; i < da.size(); ++i) da[i] += d * 2.0 * w[i] * (x[i] - y[i]);
                  }
                  if (gr.needs(ib)) {
                    auto& db = gr.grad_of(ib);
                    for (std::size_t i = 0; i < db.size(); ++i) db[i] -= d * 2.0 * w[i] * (x[i] - y[i]);
                  }
                });
}

/// Frame-to-frame differences along axis 1 of x[B x T x ...]:
/// out[b, t] = x[b, t+1] - x[b, t], shape [B x (T-1) x ...].
inline Var time_diff(Var x) {
  Graph& g = *x.graph;
  const auto& xv = g.value(x);
  if (xv.rank() < 2 || xv.dim(1) < 2) throw std::invalid_argument("time_diff: need at least two frames");
  const std::size_t bsz = xv.dim(0), t_len = xv.dim(1), f = xv.size() / (bsz * t_len);
  Shape s = xv.shape();
  s[1] = t_len - 1;
  Tensor out(s);
  for (std::size_t b = 0; b < bsz; ++b)
    for (std::size_t t = 0; t + 1 < t_len; ++t)
      for (std::size_t j = 0; j < f; ++j)
        out[(b * (t_len - 1) + t) * f + j] = xv[(b * t_len + t + 1) * f + j] - xv[(b * t_len + t) * f + j];
  const std::size_t ix = x.id;
  return g.push(Op::TimeDiff, {ix}, std::move(out), g.needs(ix), [=](Graph& gr, std::size_t self) {
    const auto& dy = gr.node(self).grad;
    auto& dx = gr.grad_of(ix);
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t t = 0; t + 1 < t_len; ++t)
        for (std::size_t j = 0; j < f; ++j) {
          const double d = dy[(b * (t_len - 1) + t) * f + j];
          dx[(b * t_len + t + 1) * f + j] += d;
          dx[(b * t_len + t) * f + j] -= d;
        }
  });
}

}  // namespace preempt::nn
