#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "preempt/nn/graph.hpp"

namespace preempt::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct Moments {
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected adaptive-moment update of `params` in place.
/// `t` is the 1-based step count.
inline void adam_step(std::span<double> params, std::span<const double> grads, Moments& mom, long t,
                      const AdamConfig& cfg) {
  if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: size mismatch");
  if (mom.m.size() != params.size()) mom.m.assign(params.size(), 0.0);
  if (mom.v.size() != params.size()) mom.v.assign(params.size(), 0.0);
  for (double g : grads)
    if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * grads[i];
    mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = mom.m[i] / c1;
    const double vhat = mom.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParameterSet& params) {
    auto& all = params.all();
    if (moments_.size() != all.size()) moments_.assign(all.size(), {});
    ++t_;
    for (std::size_t i = 0; i < all.size(); ++i)
      adam_step(all[i].value.data(), all[i].grad.data(), moments_[i], t_, cfg_);
  }

  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<Moments> moments_;
  long t_ = 0;
};

}  // namespace preempt::nn
