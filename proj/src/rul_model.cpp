#include "phmadv/rul_model.hpp"

#include <cmath>
#include <string>

#include "phmadv/error.hpp"

namespace phmadv {
namespace {

ParameterList zero_parameters() {
  using M = RulModel;
  return {
      {"conv1.kernel", Tensor(Shape{M::kConv1Height, M::kConv1Width, 1, M::kConv1Filters})},
      {"conv1.bias", Tensor(Shape{M::kConv1Filters})},
      {"conv2.kernel",
       Tensor(Shape{M::kConv2Height, M::kConv2Width, M::kConv1Filters, M::kConv2Filters})},
      {"conv2.bias", Tensor(Shape{M::kConv2Filters})},
      {"dense.weight", Tensor(Shape{M::kConv2Filters, 1})},
      {"dense.bias", Tensor(Shape{1})},
  };
}

}  // namespace

RulModel RulModel::zeros() { return RulModel(zero_parameters()); }

RulModel RulModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParameterList params = zero_parameters();
  const double fan_in[] = {
      static_cast<double>(kConv1Height * kConv1Width),
      static_cast<double>(kConv1Height * kConv1Width),
      static_cast<double>(kConv2Height * kConv2Width * kConv1Filters),
      static_cast<double>(kConv2Height * kConv2Width * kConv1Filters),
      static_cast<double>(kConv2Filters),
      static_cast<double>(kConv2Filters),
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].value = uniform_tensor(params[i].value.shape(), std::sqrt(1.0 / fan_in[i]), rng);
  }
  return RulModel(std::move(params));
}

RulModel RulModel::from_parameters(ParameterList params) {
  const ParameterList expected = zero_parameters();
  if (params.size() != expected.size()) {
    throw ShapeError("RUL model expects " + std::to_string(expected.size()) +
                     " parameter tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != expected[i].name ||
        params[i].value.shape() != expected[i].value.shape()) {
      throw ShapeError("parameter " + std::to_string(i) + " expected " + expected[i].name +
                       shape_string(expected[i].value.shape()) + ", got " + params[i].name +
                       shape_string(params[i].value.shape()));
    }
  }
  return RulModel(std::move(params));
}

RulModel::Trace RulModel::trace(std::span<const ad::Var> params, ad::Var windows) const {
  const Shape& s = windows.shape();
  if (s.size() != 3 || s[1] != kWindow || s[2] != kChannels) {
    throw ShapeError("RUL model expects windows [B,35,21], got " + shape_string(s));
  }
  if (params.size() != params_.size()) {
    throw ContractError("RUL model forward: parameter count mismatch");
  }
  const std::size_t batch = s[0];
  Trace t;
  const ad::Var x = ad::reshape(windows, Shape{batch, kWindow, kChannels, 1});
  t.conv1 = ad::relu(ad::bias_add(ad::conv2d(x, params[0]), params[1]));
  t.conv2 = ad::relu(ad::bias_add(ad::conv2d(t.conv1, params[2]), params[3]));
  t.pooled = ad::spatial_mean(t.conv2);
  const ad::Var dense = ad::bias_add(ad::matmul(t.pooled, params[4]), params[5]);
  t.output = ad::reshape(dense, Shape{batch});
  return t;
}

ad::Var cnn_predict_batch(const RulModel& model, ad::Var windows) {
  const auto params = bind_parameters(windows.tape(), model.parameters(), false);
  return model.forward(params, windows);
}

ad::Var cnn_predict(const RulModel& model, ad::Var window) {
  if (window.shape() != RulModel::input_shape()) {
    throw ShapeError("cnn_predict expects window [35x21], got " + shape_string(window.shape()));
  }
  const ad::Var batched =
      ad::reshape(window, Shape{1, RulModel::kWindow, RulModel::kChannels});
  return ad::reshape(cnn_predict_batch(model, batched), Shape{});
}

double cnn_predict(const RulModel& model, const Tensor& window) {
  ad::Tape tape;
  return cnn_predict(model, tape.constant(window)).value().item();
}

}  // namespace phmadv
