#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "../support/check.hpp"
#include "phmadv/error.hpp"
#include "phmadv/normality_model.hpp"
#include "phmadv/rul_model.hpp"
#include "phmadv/train.hpp"

using namespace phmadv;
using phmadv::testing::gradient_check;
using phmadv::testing::random_tensor;

namespace {

NormalityModel::Config small_config(std::size_t n = 3, std::size_t t = 4, std::size_t h = 5) {
  NormalityModel::Config c;
  c.input_width = n;
  c.window = t;
  c.hidden = h;
  c.layers = 2;
  return c;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Gate-by-gate LSTM on plain vectors. Gate blocks (i, f, g, o) along 4H.
std::vector<double> reference_lstm(NormalityModel model, const Tensor& window) {
  const auto& c = model.config();
  const std::size_t h = c.hidden;
  std::vector<std::vector<double>> seq(c.window);
  for (std::size_t t = 0; t < c.window; ++t) {
    seq[t].assign(window.data().begin() + t * c.input_width,
                  window.data().begin() + (t + 1) * c.input_width);
  }
  for (std::size_t l = 0; l < c.layers; ++l) {
    const Tensor wi = model.w_input(l);
    const Tensor wr = model.w_recurrent(l);
    const Tensor b = model.bias(l);
    std::vector<double> hs(h, 0.0), cs(h, 0.0);
    for (std::size_t t = 0; t < c.window; ++t) {
      const std::size_t in = seq[t].size();
      std::vector<double> z(4 * h);
      for (std::size_t j = 0; j < 4 * h; ++j) {
        double acc = b[j];
        for (std::size_t k = 0; k < in; ++k) acc += seq[t][k] * wi[k * 4 * h + j];
        for (std::size_t k = 0; k < h; ++k) acc += hs[k] * wr[k * 4 * h + j];
        z[j] = acc;
      }
      for (std::size_t j = 0; j < h; ++j) {
        const double i = sigmoid(z[j]);
        const double f = sigmoid(z[h + j]);
        const double g = std::tanh(z[2 * h + j]);
        const double o = sigmoid(z[3 * h + j]);
        cs[j] = f * cs[j] + i * g;
        hs[j] = o * std::tanh(cs[j]);
      }
      seq[t] = hs;
    }
  }
  const Tensor wo = model.w_output();
  const Tensor bo = model.b_output();
  std::vector<double> out(c.input_width);
  for (std::size_t j = 0; j < c.input_width; ++j) {
    double acc = bo[j];
    for (std::size_t k = 0; k < h; ++k) acc += seq.back()[k] * wo[k * c.input_width + j];
    out[j] = acc;
  }
  return out;
}

RulModel random_rul_model(std::uint64_t seed) {
  RulModel m = RulModel::initialize(seed);
  std::mt19937_64 rng(seed + 1);
  // Positive conv biases keep most relu units active.
  m.conv1_bias() = random_tensor(m.conv1_bias().shape(), rng, 0.1, 0.5);
  m.conv2_bias() = random_tensor(m.conv2_bias().shape(), rng, 0.1, 0.5);
  return m;
}

}  // namespace

TEST(NormalityModel, DefaultShapes) {
  const NormalityModel m = NormalityModel::initialize({}, 1);
  const auto& p = m.parameters();
  ASSERT_EQ(p.size(), 8u);
  EXPECT_EQ(p[0].name, "lstm0.w_input");
  EXPECT_EQ(p[0].value.shape(), (Shape{52, 200}));
  EXPECT_EQ(p[1].value.shape(), (Shape{50, 200}));
  EXPECT_EQ(p[3].value.shape(), (Shape{50, 200}));
  EXPECT_EQ(p[6].value.shape(), (Shape{50, 52}));
  EXPECT_EQ(m.input_shape(), (Shape{120, 52}));
  // Forget-gate biases start at one, the others at zero.
  EXPECT_EQ(p[2].value[0], 0.0);
  EXPECT_EQ(p[2].value[50], 1.0);
  EXPECT_EQ(p[2].value[99], 1.0);
  EXPECT_EQ(p[2].value[100], 0.0);
}

TEST(NormalityModel, ZeroNetworkPredictsZero) {
  std::mt19937_64 rng(1);
  const NormalityModel m = NormalityModel::zeros(small_config());
  EXPECT_EQ(lstm_predict(m, random_tensor({4, 3}, rng)), Tensor::zeros({3}));
}

TEST(NormalityModel, BiasOnlyPath) {
  NormalityModel m = NormalityModel::initialize(small_config(), 3);
  m.b_output() = Tensor::vector({0.5, -1.25, 2.0});
  // A zero window with zero LSTM biases keeps every hidden state at zero.
  for (std::size_t l = 0; l < 2; ++l) m.bias(l) = Tensor::zeros(m.bias(l).shape());
  EXPECT_EQ(lstm_predict(m, Tensor::zeros({4, 3})), m.b_output());
}

TEST(NormalityModel, MatchesHandRolledLstm) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    NormalityModel m = NormalityModel::initialize(small_config(1, 3, 2), seed);
    std::mt19937_64 rng(seed);
    for (auto& p : m.parameters()) p.value = random_tensor(p.value.shape(), rng);
    const Tensor window = random_tensor({3, 1}, rng, -2.0, 2.0);
    const Tensor got = lstm_predict(m, window);
    const std::vector<double> want = reference_lstm(m, window);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_NEAR(got[0], want[0], 1e-10);
  }
  NormalityModel m = NormalityModel::initialize(small_config(3, 6, 4), 9);
  std::mt19937_64 rng(9);
  const Tensor window = random_tensor({6, 3}, rng);
  const Tensor got = lstm_predict(m, window);
  const auto want = reference_lstm(m, window);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got[j], want[j], 1e-10);
}

TEST(NormalityModel, BatchAgreesWithSingleWindows) {
  const NormalityModel m = NormalityModel::initialize(small_config(), 4);
  std::mt19937_64 rng(4);
  const Tensor batch = random_tensor({3, 4, 3}, rng);
  ad::Tape tape;
  const Tensor out = lstm_predict_batch(m, tape.constant(batch)).value();
  for (std::size_t b = 0; b < 3; ++b) {
    Tensor w({4, 3}, std::vector<double>(batch.data().begin() + b * 12, batch.data().begin() + (b + 1) * 12));
    const Tensor single = lstm_predict(m, w);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out[b * 3 + j], single[j], 1e-14);
  }
}

TEST(NormalityModel, ShapeErrors) {
  const NormalityModel m = NormalityModel::zeros(small_config());
  EXPECT_THROW(lstm_predict(m, Tensor::zeros({5, 3})), ShapeError);
  EXPECT_THROW(lstm_predict(m, Tensor::zeros({4, 2})), ShapeError);
  ParameterList p = m.parameters();
  p[0].value = Tensor::zeros({2, 20});
  EXPECT_THROW(NormalityModel::from_parameters(small_config(), p), ShapeError);
}

TEST(NormalityModel, InputGradientMatchesFiniteDifferences) {
  const NormalityModel m = NormalityModel::initialize(small_config(3, 5, 4), 6);
  std::mt19937_64 rng(6);
  const Tensor w = random_tensor({3}, rng);
  auto f = [&](ad::Var x) { return ad::sum(lstm_predict(m, x) * x.tape().constant(w)); };
  EXPECT_LE(gradient_check(f, random_tensor({5, 3}, rng)), 1e-4);
}

TEST(NormalityModel, PureAndDeterministic) {
  const NormalityModel m = NormalityModel::initialize(small_config(), 8);
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor({4, 3}, rng);
  EXPECT_EQ(lstm_predict(m, x), lstm_predict(m, x));
  EXPECT_EQ(NormalityModel::initialize(small_config(), 8).parameters()[4].value,
            m.parameters()[4].value);
}

TEST(RulModel, BiasOnlyPath) {
  RulModel m = RulModel::zeros();
  m.dense_bias() = Tensor::vector({100.0});
  std::mt19937_64 rng(1);
  EXPECT_EQ(cnn_predict(m, random_tensor({35, 21}, rng)), 100.0);
}

TEST(RulModel, ShapeChain) {
  const RulModel m = RulModel::initialize(2);
  ad::Tape tape;
  std::mt19937_64 rng(2);
  const auto params = bind_parameters(tape, m.parameters(), false);
  const auto tr = m.trace(params, tape.constant(random_tensor({2, 35, 21}, rng)));
  EXPECT_EQ(tr.conv1.shape(), (Shape{2, 31, 5, 19}));
  EXPECT_EQ(tr.conv2.shape(), (Shape{2, 16, 5, 25}));
  EXPECT_EQ(tr.pooled.shape(), (Shape{2, 25}));
  EXPECT_EQ(tr.output.shape(), (Shape{2}));
  EXPECT_EQ(m.parameters()[0].value.shape(), (Shape{5, 17, 1, 19}));
  EXPECT_EQ(m.parameters()[2].value.shape(), (Shape{16, 1, 19, 25}));
  EXPECT_EQ(m.parameters()[4].value.shape(), (Shape{25, 1}));
}

TEST(RulModel, DenseLayerIsLinear) {
  RulModel m = random_rul_model(3);
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({35, 21}, rng);
  const double before = cnn_predict(m, x);
  for (double& v : m.dense_weight().data()) v *= 2.0;
  for (double& v : m.dense_bias().data()) v *= 2.0;
  EXPECT_NEAR(cnn_predict(m, x), 2.0 * before, 1e-12 * std::max(1.0, std::abs(before)));
}

TEST(RulModel, ShapeErrors) {
  const RulModel m = RulModel::zeros();
  EXPECT_THROW(cnn_predict(m, Tensor::zeros({34, 21})), ShapeError);
  EXPECT_THROW(cnn_predict(m, Tensor::zeros({35, 20})), ShapeError);
}

TEST(RulModel, InputGradientMatchesFiniteDifferences) {
  const RulModel m = random_rul_model(4);
  std::mt19937_64 rng(4);
  auto f = [&](ad::Var x) { return cnn_predict(m, x); };
  EXPECT_LE(gradient_check(f, random_tensor({35, 21}, rng)), 1e-4);
}

TEST(RulModel, BatchAgreesWithSingleWindows) {
  const RulModel m = random_rul_model(5);
  std::mt19937_64 rng(5);
  const Tensor batch = random_tensor({3, 35, 21}, rng);
  ad::Tape tape;
  const Tensor out = cnn_predict_batch(m, tape.constant(batch)).value();
  for (std::size_t b = 0; b < 3; ++b) {
    Tensor w({35, 21}, std::vector<double>(batch.data().begin() + b * 735,
                                           batch.data().begin() + (b + 1) * 735));
    EXPECT_NEAR(out[b], cnn_predict(m, w), 1e-12);
  }
}

// ---- training -------------------------------------------------------------

namespace {

std::vector<WindowedSample> rul_samples(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<WindowedSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    WindowedSample s;
    s.window = random_tensor({35, 21}, rng);
    s.target = Tensor::scalar(20.0 + 10.0 * static_cast<double>(i));
    s.run_id = static_cast<int>(i);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<WindowedSample> lstm_samples(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<WindowedSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    WindowedSample s;
    s.window = random_tensor({4, 3}, rng);
    s.target = random_tensor({3}, rng);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(Train, ZeroEpochsIsNoOp) {
  const RulModel m = RulModel::initialize(1);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto r = train(m, rul_samples(3, 1), cfg);
  EXPECT_TRUE(r.loss_history.empty());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    EXPECT_EQ(r.model.parameters()[i].value, m.parameters()[i].value);
  }
}

TEST(Train, OverfitsOneRulSample) {
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.step_size = 0.003;
  cfg.seed = 2;
  const auto r = train(RulModel::initialize(2), rul_samples(1, 2), cfg);
  ASSERT_EQ(r.loss_history.size(), 20u);
  for (std::size_t e = 1; e < r.loss_history.size(); ++e) {
    EXPECT_LT(r.loss_history[e], r.loss_history[e - 1]) << "epoch " << e + 1;
  }
  EXPECT_LT(r.loss_history.back(), 0.1 * r.loss_history.front());
}

TEST(Train, LstmLossDecreases) {
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.step_size = 0.01;
  cfg.batch_size = 8;
  const auto r = train(NormalityModel::initialize(small_config(), 3), lstm_samples(16, 3), cfg);
  EXPECT_LT(r.loss_history.back(), r.loss_history.front());
}

TEST(Train, SameSeedIsBitIdentical) {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  cfg.seed = 77;
  const auto data = rul_samples(5, 4);
  const auto a = train(RulModel::initialize(4), data, cfg);
  const auto b = train(RulModel::initialize(4), data, cfg);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(parameter_hash(a.model.parameters()), parameter_hash(b.model.parameters()));
  const auto la = train(NormalityModel::initialize(small_config(), 4), lstm_samples(6, 4), cfg);
  const auto lb = train(NormalityModel::initialize(small_config(), 4), lstm_samples(6, 4), cfg);
  EXPECT_EQ(parameter_hash(la.model.parameters()), parameter_hash(lb.model.parameters()));
}

TEST(Train, RejectsBadConfigAndData) {
  TrainConfig cfg;
  cfg.step_size = 0.0;
  EXPECT_THROW(train(RulModel::zeros(), rul_samples(1, 1), cfg), ContractError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(train(RulModel::zeros(), rul_samples(1, 1), cfg), ContractError);
  cfg = TrainConfig{};
  EXPECT_THROW(train(RulModel::zeros(), std::vector<WindowedSample>{}, cfg), ContractError);
  auto wrong = lstm_samples(2, 1);
  EXPECT_THROW(train(RulModel::zeros(), wrong, cfg), ShapeError);
}

TEST(Train, NanLossNamesEpochAndBatch) {
  auto data = rul_samples(4, 5);
  data[3].target = Tensor::scalar(std::nan(""));
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 1;
  try {
    train(RulModel::initialize(5), data, cfg);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}
