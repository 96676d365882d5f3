#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "phmadv/parameters.hpp"
#include "phmadv/tape.hpp"

namespace phmadv {

/// Stacked-LSTM one-step-ahead autoregressor: maps a lagged window of T
/// samples with n channels to a prediction of the next sample.
///
/// Gate blocks are laid out (input, forget, cell, output) along the 4H axis.
/// The readout projects the top layer's hidden state at the last time step.
class NormalityModel {
 public:
  struct Config {
    std::size_t input_width = 52;
    std::size_t window = 120;
    std::size_t hidden = 50;
    std::size_t layers = 2;

    bool operator==(const Config&) const = default;
  };

  /// All parameters zero. Forget-gate biases are zero as well.
  static NormalityModel zeros(const Config& config);

  /// Weights uniform in +-sqrt(1/fan_in); forget-gate bias 1, other LSTM biases 0.
  static NormalityModel initialize(const Config& config, std::uint64_t seed);

  /// Rebuilds a model from a named parameter list; validates every shape.
  static NormalityModel from_parameters(const Config& config, ParameterList params);

  const Config& config() const { return config_; }
  const ParameterList& parameters() const { return params_; }
  ParameterList& parameters() { return params_; }

  Tensor& w_input(std::size_t layer) { return params_[3 * layer].value; }
  Tensor& w_recurrent(std::size_t layer) { return params_[3 * layer + 1].value; }
  Tensor& bias(std::size_t layer) { return params_[3 * layer + 2].value; }
  Tensor& w_output() { return params_[3 * config_.layers].value; }
  Tensor& b_output() { return params_[3 * config_.layers + 1].value; }

  Shape input_shape() const { return {config_.window, config_.input_width}; }

  /// windows: [B, T, n] -> [B, n]. params must come from bind_parameters().
  ad::Var forward(std::span<const ad::Var> params, ad::Var windows) const;

 private:
  NormalityModel(Config config, ParameterList params);

  Config config_;
  ParameterList params_;
};

/// One-step prediction for a single [T, n] window, recorded on the window's
/// tape with the parameters as constants. Returns an [n] vector.
ad::Var lstm_predict(const NormalityModel& model, ad::Var window);

/// Batched form: [B, T, n] -> [B, n].
ad::Var lstm_predict_batch(const NormalityModel& model, ad::Var windows);

/// Value-only convenience wrapper around lstm_predict.
Tensor lstm_predict(const NormalityModel& model, const Tensor& window);

}  // namespace phmadv
