#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "phmadv/parameters.hpp"
#include "phmadv/tape.hpp"

namespace phmadv {

/// Convolutional remaining-useful-life regressor over a 35-cycle x 21-sensor
/// window.
///
///   [35,21,1] -conv 5x17, 19 filters, relu-> [31,5,19]
///             -conv 16x1, 25 filters, relu-> [16,5,25]
///             -global average pool-> [25] -dense-> scalar RUL (cycles)
class RulModel {
 public:
  static constexpr std::size_t kWindow = 35;
  static constexpr std::size_t kChannels = 21;
  static constexpr std::size_t kConv1Filters = 19;
  static constexpr std::size_t kConv1Height = 5;
  static constexpr std::size_t kConv1Width = 17;
  static constexpr std::size_t kConv2Filters = 25;
  static constexpr std::size_t kConv2Height = 16;
  static constexpr std::size_t kConv2Width = 1;

  /// Intermediate activations of one forward pass.
  struct Trace {
    ad::Var conv1;   // [B,31,5,19] after relu
    ad::Var conv2;   // [B,16,5,25] after relu
    ad::Var pooled;  // [B,25]
    ad::Var output;  // [B]
  };

  static RulModel zeros();
  static RulModel initialize(std::uint64_t seed);
  static RulModel from_parameters(ParameterList params);

  const ParameterList& parameters() const { return params_; }
  ParameterList& parameters() { return params_; }

  Tensor& conv1_kernel() { return params_[0].value; }
  Tensor& conv1_bias() { return params_[1].value; }
  Tensor& conv2_kernel() { return params_[2].value; }
  Tensor& conv2_bias() { return params_[3].value; }
  Tensor& dense_weight() { return params_[4].value; }
  Tensor& dense_bias() { return params_[5].value; }

  static Shape input_shape() { return {kWindow, kChannels}; }

  /// windows: [B,35,21] -> per-layer activations ending in [B] predictions.
  Trace trace(std::span<const ad::Var> params, ad::Var windows) const;

  ad::Var forward(std::span<const ad::Var> params, ad::Var windows) const {
    return trace(params, windows).output;
  }

 private:
  explicit RulModel(ParameterList params) : params_(std::move(params)) {}

  ParameterList params_;
};

/// Scalar RUL prediction for a single [35,21] window, recorded on its tape.
ad::Var cnn_predict(const RulModel& model, ad::Var window);

/// Batched form: [B,35,21] -> [B].
ad::Var cnn_predict_batch(const RulModel& model, ad::Var windows);

double cnn_predict(const RulModel& model, const Tensor& window);

}  // namespace phmadv
