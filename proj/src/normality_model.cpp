#include "phmadv/normality_model.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "phmadv/error.hpp"

namespace phmadv {
namespace {

ParameterList zero_parameters(const NormalityModel::Config& c) {
  ParameterList params;
  const std::size_t gates = 4 * c.hidden;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::size_t in = l == 0 ? c.input_width : c.hidden;
    const std::string prefix = "lstm" + std::to_string(l) + ".";
    params.push_back({prefix + "w_input", Tensor(Shape{in, gates})});
    params.push_back({prefix + "w_recurrent", Tensor(Shape{c.hidden, gates})});
    params.push_back({prefix + "bias", Tensor(Shape{gates})});
  }
  params.push_back({"output.weight", Tensor(Shape{c.hidden, c.input_width})});
  params.push_back({"output.bias", Tensor(Shape{c.input_width})});
  return params;
}

void validate_config(const NormalityModel::Config& c) {
  if (c.input_width == 0 || c.window == 0 || c.hidden == 0 || c.layers == 0) {
    throw ContractError("normality model dimensions must be positive");
  }
}

}  // namespace

NormalityModel::NormalityModel(Config config, ParameterList params)
    : config_(config), params_(std::move(params)) {}

NormalityModel NormalityModel::zeros(const Config& config) {
  validate_config(config);
  return NormalityModel(config, zero_parameters(config));
}

NormalityModel NormalityModel::initialize(const Config& config, std::uint64_t seed) {
  validate_config(config);
  std::mt19937_64 rng(seed);
  ParameterList params = zero_parameters(config);
  const std::size_t h = config.hidden;
  for (std::size_t l = 0; l < config.layers; ++l) {
    Parameter& wi = params[3 * l];
    Parameter& wr = params[3 * l + 1];
    Parameter& b = params[3 * l + 2];
    wi.value = uniform_tensor(wi.value.shape(), std::sqrt(1.0 / wi.value.dim(0)), rng);
    wr.value = uniform_tensor(wr.value.shape(), std::sqrt(1.0 / h), rng);
    for (std::size_t j = h; j < 2 * h; ++j) b.value[j] = 1.0;
  }
  Parameter& wo = params[3 * config.layers];
  Parameter& bo = params[3 * config.layers + 1];
  wo.value = uniform_tensor(wo.value.shape(), std::sqrt(1.0 / h), rng);
  bo.value = uniform_tensor(bo.value.shape(), std::sqrt(1.0 / h), rng);
  return NormalityModel(config, std::move(params));
}

NormalityModel NormalityModel::from_parameters(const Config& config, ParameterList params) {
  validate_config(config);
  const ParameterList expected = zero_parameters(config);
  if (params.size() != expected.size()) {
    throw ShapeError("normality model expects " + std::to_string(expected.size()) +
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
  return NormalityModel(config, std::move(params));
}

ad::Var NormalityModel::forward(std::span<const ad::Var> params, ad::Var windows) const {
  const Shape& s = windows.shape();
  if (s.size() != 3 || s[1] != config_.window || s[2] != config_.input_width) {
    throw ShapeError("normality model expects windows [B," + std::to_string(config_.window) +
                     "," + std::to_string(config_.input_width) + "], got " + shape_string(s));
  }
  if (params.size() != params_.size()) {
    throw ContractError("normality model forward: parameter count mismatch");
  }
  const std::size_t batch = s[0];
  const std::size_t h = config_.hidden;
  const std::size_t n = config_.input_width;

  std::vector<ad::Var> sequence;
  sequence.reserve(config_.window);
  for (std::size_t t = 0; t < config_.window; ++t) {
    sequence.push_back(ad::reshape(ad::slice(windows, 1, t, 1), Shape{batch, n}));
  }

  for (std::size_t l = 0; l < config_.layers; ++l) {
    const ad::Var wi = params[3 * l];
    const ad::Var wr = params[3 * l + 1];
    const ad::Var b = params[3 * l + 2];
    ad::Var hidden_state;
    ad::Var cell_state;
    for (std::size_t t = 0; t < sequence.size(); ++t) {
      ad::Var z = ad::matmul(sequence[t], wi);
      // h and c start at zero, so the first step has no recurrent or forget term.
      if (t > 0) z = ad::add(z, ad::matmul(hidden_state, wr));
      z = ad::bias_add(z, b);
      const ad::Var in_gate = ad::sigmoid(ad::slice(z, 1, 0, h));
      const ad::Var cell_in = ad::tanh(ad::slice(z, 1, 2 * h, h));
      const ad::Var out_gate = ad::sigmoid(ad::slice(z, 1, 3 * h, h));
      if (t == 0) {
        cell_state = ad::mul(in_gate, cell_in);
      } else {
        const ad::Var forget = ad::sigmoid(ad::slice(z, 1, h, h));
        cell_state = ad::add(ad::mul(forget, cell_state), ad::mul(in_gate, cell_in));
      }
      hidden_state = ad::mul(out_gate, ad::tanh(cell_state));
      sequence[t] = hidden_state;
    }
  }

  const ad::Var wo = params[3 * config_.layers];
  const ad::Var bo = params[3 * config_.layers + 1];
  return ad::bias_add(ad::matmul(sequence.back(), wo), bo);
}

ad::Var lstm_predict_batch(const NormalityModel& model, ad::Var windows) {
  const auto params = bind_parameters(windows.tape(), model.parameters(), false);
  return model.forward(params, windows);
}

ad::Var lstm_predict(const NormalityModel& model, ad::Var window) {
  const Shape expected = model.input_shape();
  if (window.shape() != expected) {
    throw ShapeError("lstm_predict expects window " + shape_string(expected) + ", got " +
                     shape_string(window.shape()));
  }
  const ad::Var batched = ad::reshape(window, Shape{1, expected[0], expected[1]});
  const ad::Var out = lstm_predict_batch(model, batched);
  return ad::reshape(out, Shape{expected[1]});
}

Tensor lstm_predict(const NormalityModel& model, const Tensor& window) {
  ad::Tape tape;
  return lstm_predict(model, tape.constant(window)).value();
}

}  // namespace phmadv
