#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "preempt/io/config.hpp"
#include "preempt/sim/evaluate.hpp"

namespace preempt {

struct TrainedForecaster {
  forecast::ForecastModel model;
  forecast::TrainResult result;
};

/// Initializes and trains one learned variant on the train/val windows of
/// a dataset, with seeds derived from the run config.
inline TrainedForecaster train_variant(const io::RunConfig& cfg, forecast::Variant v, const sim::Dataset& data,
                                       const std::function<void(const forecast::EpochStats&)>& on_epoch = {},
                                       const std::function<void(std::size_t, std::size_t)>& on_windows = {}) {
  const auto train_set = sim::split_windows(data, sim::Split::Train, cfg.window_stride);
  const auto val_set = sim::split_windows(data, sim::Split::Val, cfg.window_stride);
  if (on_windows) on_windows(train_set.size(), val_set.size());
  auto model = forecast::ForecastModel::make(v, cfg.keypoints, cfg.model);
  const auto tc = cfg.train_config();
  model.initialize(derive_seed(tc.seed, std::string("init/") + std::string(forecast::variant_name(v))));
  auto res = forecast::train(model.net(), train_set, val_set, tc, on_epoch);
  return {std::move(model), std::move(res)};
}

/// Anticipation P/R/F1 of each model on the test split.
inline std::vector<stats::PRF> evaluate_test_split(const io::RunConfig& cfg, const sim::Dataset& data,
                                                   const std::vector<const forecast::ForecastModel*>& models) {
  const auto test = data.of(sim::Split::Test);
  std::vector<stats::PRF> out;
  for (const auto* m : models) out.push_back(sim::evaluate_anticipation(test, *m, cfg.engine_config()));
  return out;
}

}  // namespace preempt
