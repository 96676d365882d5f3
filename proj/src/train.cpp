#include "phmadv/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "phmadv/error.hpp"

namespace phmadv {
namespace {

class Adam {
 public:
  Adam(const ParameterList& params, const TrainConfig& cfg) : cfg_(cfg) {
    for (const Parameter& p : params) {
      m_.emplace_back(p.value.shape());
      v_.emplace_back(p.value.shape());
    }
  }

  void step(ParameterList& params, const std::vector<Tensor>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& w = params[i].value;
      const Tensor& g = grads[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g[j];
        v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        const double m_hat = m_[i][j] / c1;
        const double v_hat = v_[i][j] / c2;
        w[j] -= cfg_.step_size * m_hat / (std::sqrt(v_hat) + cfg_.adam_epsilon);
      }
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

template <typename Model>
TrainResult<Model> fit(Model model, std::span<const WindowedSample> data, const TrainConfig& cfg,
                       const EpochCallback& on_epoch) {
  cfg.validate();
  TrainResult<Model> result{std::move(model), {}};
  if (cfg.epochs == 0) return result;
  if (data.empty()) throw ContractError("training set is empty");
  const Shape expected = result.model.input_shape();
  for (const WindowedSample& s : data) {
    if (s.window.shape() != expected) {
      throw ShapeError("training window " + shape_string(s.window.shape()) +
                       " does not match model input " + shape_string(expected));
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Adam adam(result.model.parameters(), cfg);
  const std::size_t per_target = shape_size(data.front().target.shape());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, count);

      ad::Tape tape;
      const auto params = bind_parameters(tape, result.model.parameters(), true);
      const ad::Var x = tape.constant(stack_windows(data, idx));
      const ad::Var y = tape.constant(stack_targets(data, idx));
      const ad::Var pred = result.model.forward(params, x);
      const double denom = static_cast<double>(count * per_target);
      const ad::Var loss = ad::scale(ad::squared_error(pred, y), 1.0 / denom);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                             ", batch " + std::to_string(batch_index + 1));
      }
      const ad::Gradients grads = tape.backward(loss);
      std::vector<Tensor> g;
      g.reserve(params.size());
      for (const ad::Var& p : params) g.push_back(grads.of(p));
      adam.step(result.model.parameters(), g);
      total += value * static_cast<double>(count);
    }
    const double mean = total / static_cast<double>(order.size());
    if (!result.loss_history.empty() && mean > 10.0 * result.loss_history.back()) {
      throw NumericalError("training diverged at epoch " + std::to_string(epoch + 1) +
                           ": mean loss " + std::to_string(mean) + " after " +
                           std::to_string(result.loss_history.back()));
    }
    result.loss_history.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return result;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(step_size > 0.0)) throw ContractError("step size must be positive");
  if (batch_size < 1) throw ContractError("batch size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ContractError("moment decay rates must lie in [0, 1)");
  }
}

Tensor stack_windows(std::span<const WindowedSample> samples, std::span<const std::size_t> order) {
  if (order.empty()) throw ContractError("cannot stack an empty batch");
  const Shape& s = samples[order.front()].window.shape();
  Shape shape{order.size()};
  shape.insert(shape.end(), s.begin(), s.end());
  std::vector<double> data;
  data.reserve(shape_size(shape));
  for (std::size_t i : order) {
    const Tensor& w = samples[i].window;
    if (w.shape() != s) throw ShapeError("windows in a batch differ in shape");
    data.insert(data.end(), w.data().begin(), w.data().end());
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor stack_targets(std::span<const WindowedSample> samples, std::span<const std::size_t> order) {
  if (order.empty()) throw ContractError("cannot stack an empty batch");
  const Shape& s = samples[order.front()].target.shape();
  Shape shape{order.size()};
  shape.insert(shape.end(), s.begin(), s.end());
  std::vector<double> data;
  data.reserve(shape_size(shape));
  for (std::size_t i : order) {
    const Tensor& t = samples[i].target;
    if (t.shape() != s) throw ShapeError("targets in a batch differ in shape");
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  return Tensor(std::move(shape), std::move(data));
}

TrainResult<NormalityModel> train(NormalityModel model, std::span<const WindowedSample> data,
                                  const TrainConfig& config, const EpochCallback& on_epoch) {
  return fit(std::move(model), data, config, on_epoch);
}

TrainResult<RulModel> train(RulModel model, std::span<const WindowedSample> data,
                            const TrainConfig& config, const EpochCallback& on_epoch) {
  return fit(std::move(model), data, config, on_epoch);
}

}  // namespace phmadv
