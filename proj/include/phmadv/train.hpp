#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "phmadv/data.hpp"
#include "phmadv/normality_model.hpp"
#include "phmadv/rul_model.hpp"

namespace phmadv {

/// Adam hyperparameters and the minibatch schedule.
struct TrainConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

template <typename Model>
struct TrainResult {
  Model model;
  /// Mean training MSE of each epoch, accumulated over its minibatches.
  std::vector<double> loss_history;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Fits the normality model to next-sample targets (MSE over all channels).
/// Throws NumericalError on a non-finite batch loss or when an epoch's mean
/// loss exceeds 10x the previous epoch's.
TrainResult<NormalityModel> train(NormalityModel model, std::span<const WindowedSample> data,
                                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Fits the RUL model to scalar RUL targets (MSE in cycles^2).
TrainResult<RulModel> train(RulModel model, std::span<const WindowedSample> data,
                            const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Stacks sample windows into [B, T, n] and targets into [B, ...].
Tensor stack_windows(std::span<const WindowedSample> samples, std::span<const std::size_t> order);
Tensor stack_targets(std::span<const WindowedSample> samples, std::span<const std::size_t> order);

}  // namespace phmadv
