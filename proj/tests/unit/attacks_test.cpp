#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "../support/check.hpp"
#include "phmadv/attacks.hpp"
#include "phmadv/error.hpp"

using namespace phmadv;
using phmadv::testing::gradient_check;
using phmadv::testing::random_tensor;

namespace {

// L(x) = sum((x - c)^2).
AdversarialLoss quadratic(Tensor centre, Direction dir = Direction::Maximize) {
  AdversarialLoss loss;
  loss.direction = dir;
  loss.build = [centre = std::move(centre)](ad::Var x) {
    return ad::squared_error(x, x.tape().constant(centre));
  };
  return loss;
}

// L(x) = sum(w * x): gradient w everywhere.
AdversarialLoss linear(Tensor w) {
  AdversarialLoss loss;
  loss.build = [w = std::move(w)](ad::Var x) { return ad::sum(x * x.tape().constant(w)); };
  return loss;
}

AttackConfig config(double eta, std::size_t iterations, double alpha) {
  AttackConfig c;
  c.epsilon = eta;
  c.eta = eta;
  c.iterations = iterations;
  c.alpha = alpha;
  return c;
}

NormalityModel tiny_model(std::uint64_t seed) {
  NormalityModel::Config c;
  c.input_width = 3;
  c.window = 4;
  c.hidden = 4;
  return NormalityModel::initialize(c, seed);
}

ResidualStats random_stats(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Tensor> r;
  for (std::size_t i = 0; i < 4 * n; ++i) r.push_back(random_tensor({n}, rng, -0.5, 0.5));
  return fit_residual_stats(r);
}

double linf(const Tensor& a, const Tensor& b) { return max_abs_diff(a, b); }

}  // namespace

TEST(AttackConfig, BudgetDefaults) {
  const AttackConfig c = AttackConfig::from_budget(0.2);
  EXPECT_EQ(c.eta, 0.2);
  EXPECT_EQ(c.iterations, 10u);
  EXPECT_DOUBLE_EQ(c.alpha, 0.02);
  EXPECT_NO_THROW(c.validate());
}

TEST(AttackConfig, Validation) {
  EXPECT_THROW(config(0.1, 1, 0.2).validate(), ContractError);
  EXPECT_THROW(config(0.1, 0, 0.1).validate(), ContractError);
  EXPECT_THROW(config(0.1, 1, 0.0).validate(), ContractError);
  EXPECT_THROW(config(-0.1, 1, 0.0).validate(), ContractError);
  AttackConfig mismatched = config(0.1, 1, 0.1);
  mismatched.epsilon = 0.2;
  EXPECT_THROW(mismatched.validate(), ContractError);
  EXPECT_NO_THROW(config(0.0, 3, 0.0).validate());
  EXPECT_THROW(AttackConfig::from_budget(0.1, 0), ContractError);
}

TEST(AttackKind, Parse) {
  EXPECT_EQ(parse_attack_kind("fgsm"), AttackKind::Fgsm);
  EXPECT_EQ(parse_attack_kind("bim"), AttackKind::Bim);
  EXPECT_THROW(parse_attack_kind("pgd"), ContractError);
}

TEST(Sign, ZeroStaysZero) {
  EXPECT_EQ(sign_of(Tensor::vector({0.3, -0.2, 0.0})), Tensor::vector({1, -1, 0}));
}

TEST(Clip, ProjectsAndIsIdempotent) {
  const Tensor x = Tensor::vector({0, 1});
  const Tensor c = clip_to_ball(x, Tensor::vector({0.5, 0.2}), 0.25);
  EXPECT_EQ(c, Tensor::vector({0.25, 0.75}));
  EXPECT_EQ(clip_to_ball(x, c, 0.25), c);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Tensor base = random_tensor({6}, rng);
    const Tensor feasible = clip_to_ball(base, random_tensor({6}, rng, -3, 3), 0.3);
    EXPECT_EQ(clip_to_ball(base, feasible, 0.3), feasible);
  }
}

TEST(Fgsm, ZeroGradientLeavesInput) {
  const Tensor x = Tensor::vector({0.4, -0.7});
  const auto ex = fgsm(linear(Tensor::zeros({2})), x, AttackConfig::from_budget(0.1, 1));
  EXPECT_EQ(ex.perturbed, x);
}

TEST(Fgsm, SignRule) {
  const auto ex = fgsm(linear(Tensor::vector({0.3, -0.2})), Tensor::vector({0, 0}),
                       AttackConfig::from_budget(0.1, 1));
  EXPECT_EQ(ex.perturbed, Tensor::vector({0.1, -0.1}));
  EXPECT_NEAR(ex.loss_after - ex.loss_before, 0.05, 1e-15);
}

TEST(Fgsm, EqualsSingleStepBim) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor centre = random_tensor({7}, rng);
    const Tensor x = random_tensor({7}, rng);
    const double eta = std::uniform_real_distribution<double>(0.01, 0.5)(rng);
    const auto loss = quadratic(centre);
    EXPECT_EQ(fgsm(loss, x, AttackConfig::from_budget(eta, 1)).perturbed,
              bim(loss, x, config(eta, 1, eta)).perturbed);
  }
}

TEST(Bim, ZeroBudgetIsIdentity) {
  const Tensor x = Tensor::vector({1, 2, 3});
  const auto ex = bim(quadratic(Tensor::zeros({3})), x, config(0.0, 7, 0.0));
  EXPECT_EQ(ex.perturbed, x);
}

TEST(Bim, ToyQuadraticAscentAndDescent) {
  // L = (x - 3)^2 from x = 0: dL/dx = -6, so ascent walks away from 3 and is
  // clipped at -eta after two steps; descent walks towards 3 and stops at +eta.
  const Tensor x = Tensor::vector({0.0});
  const auto up = bim(quadratic(Tensor::vector({3.0})), x, config(1.0, 5, 0.5));
  EXPECT_EQ(up.perturbed, Tensor::vector({-1.0}));
  EXPECT_EQ(up.loss_before, 9.0);
  EXPECT_EQ(up.loss_after, 16.0);
  const auto down =
      bim(quadratic(Tensor::vector({3.0}), Direction::Minimize), x, config(1.0, 5, 0.5));
  EXPECT_EQ(down.perturbed, Tensor::vector({1.0}));
  EXPECT_EQ(down.loss_after, 4.0);
}

TEST(Bim, NonFiniteGradientNamesStep) {
  AdversarialLoss loss;
  loss.direction = Direction::Minimize;
  // Descent moves x below zero after one step; sqrt is NaN there.
  loss.build = [](ad::Var x) { return ad::sum(ad::sqrt(ad::scale(x, 1.0))); };
  try {
    bim(loss, Tensor::vector({1e-3}), config(0.5, 4, 0.25));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos) << e.what();
  }
}

TEST(Bim, BudgetHoldsOnRandomInstances) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor x = random_tensor({5}, rng, -10, 10);
    const double eta = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const std::size_t iters = 1 + trial % 12;
    const double alpha = eta * std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    const auto ex = bim(quadratic(random_tensor({5}, rng)), x, config(eta, iters, alpha));
    EXPECT_LE(linf(ex.perturbed, x), eta + 1e-12);
  }
}

TEST(Bim, Deterministic) {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({4}, rng);
  const auto loss = quadratic(random_tensor({4}, rng));
  EXPECT_EQ(bim(loss, x, config(0.3, 6, 0.07)).perturbed, bim(loss, x, config(0.3, 6, 0.07)).perturbed);
}

TEST(DetectionLoss, SignFollowsLabel) {
  const NormalityModel m = tiny_model(1);
  const ResidualStats s = random_stats(3, 1);
  std::mt19937_64 rng(1);
  const Tensor w = random_tensor({4, 3}, rng);
  const Tensor actual = random_tensor({3}, rng);
  const double score = mahalanobis_score(s, residual(m, w, actual));
  ad::Tape tape;
  const auto x = tape.constant(w);
  EXPECT_EQ(adversarial_loss_detection(m, s, x, actual, Status::Normal).value().item(), score);
  EXPECT_EQ(adversarial_loss_detection(m, s, x, actual, Status::Abnormal).value().item(), -score);
}

TEST(DetectionLoss, FixedPointAtResidualMean) {
  const NormalityModel m = tiny_model(2);
  std::mt19937_64 rng(2);
  const Tensor w = random_tensor({4, 3}, rng);
  const Tensor pred = lstm_predict(m, w);
  ResidualStats s = random_stats(3, 2);
  s.mean = Tensor::zeros({3});
  // The actual equals the prediction, so the residual sits at the mean.
  ad::Tape tape;
  const auto x = tape.leaf(w);
  const auto loss = adversarial_loss_detection(m, s, x, pred, Status::Normal);
  EXPECT_EQ(loss.value().item(), 0.0);
  EXPECT_EQ(tape.gradient(loss, x), Tensor::zeros({4, 3}));
}

TEST(DetectionLoss, BatchedObjectiveSumsPerWindowLosses) {
  const NormalityModel m = tiny_model(3);
  const ResidualStats s = random_stats(3, 3);
  std::mt19937_64 rng(3);
  const Tensor windows = random_tensor({2, 4, 3}, rng);
  const Tensor actuals = random_tensor({2, 3}, rng);
  const auto batch = detection_objective(m, s, actuals, {Status::Normal, Status::Abnormal});
  double expected = 0.0;
  for (std::size_t b = 0; b < 2; ++b) {
    Tensor w({4, 3}, std::vector<double>(windows.data().begin() + b * 12, windows.data().begin() + (b + 1) * 12));
    Tensor a({3}, std::vector<double>(actuals.data().begin() + b * 3, actuals.data().begin() + (b + 1) * 3));
    const auto one = detection_objective(m, s, a, {b == 0 ? Status::Normal : Status::Abnormal});
    expected += one.evaluate(w);
  }
  EXPECT_NEAR(batch.evaluate(windows), expected, 1e-12);
}

TEST(DetectionLoss, BimRaisesNormalScoreWithinBudget) {
  const NormalityModel m = tiny_model(4);
  const ResidualStats s = random_stats(3, 4);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor w = random_tensor({4, 3}, rng);
    const Tensor actual = random_tensor({3}, rng);
    const auto loss = detection_objective(m, s, actual, {Status::Normal});
    const auto ex = bim(loss, w, AttackConfig::from_budget(0.05, 10));
    EXPECT_LE(linf(ex.perturbed, w), 0.05 + 1e-12);
    EXPECT_GE(ex.loss_after, ex.loss_before);
  }
}

TEST(RegressionLoss, Arithmetic) {
  RulModel m = RulModel::zeros();
  m.dense_bias() = Tensor::vector({10.0});
  ad::Tape tape;
  const auto x = tape.constant(Tensor::zeros({35, 21}));
  EXPECT_EQ(adversarial_loss_regression(m, x, 10.0).value().item(), 0.0);
  EXPECT_EQ(adversarial_loss_regression(m, x, 0.0).value().item(), 100.0);
}

TEST(RegressionLoss, GradientMatchesFiniteDifferences) {
  RulModel m = RulModel::initialize(5);
  std::mt19937_64 rng(5);
  m.conv1_bias() = random_tensor(m.conv1_bias().shape(), rng, 0.1, 0.5);
  m.conv2_bias() = random_tensor(m.conv2_bias().shape(), rng, 0.1, 0.5);
  auto f = [&](ad::Var x) { return adversarial_loss_regression(m, x, 42.0); };
  EXPECT_LE(gradient_check(f, random_tensor({35, 21}, rng)), 1e-4);
}

TEST(RegressionLoss, BatchedObjectiveAttacksEachWindow) {
  RulModel m = RulModel::initialize(6);
  std::mt19937_64 rng(6);
  const Tensor windows = random_tensor({3, 35, 21}, rng);
  const auto batch = regression_objective(m, {10.0, 50.0, 90.0});
  const auto ex = bim(batch, windows, AttackConfig::from_budget(0.1, 5));
  EXPECT_LE(linf(ex.perturbed, windows), 0.1 + 1e-12);
  for (std::size_t b = 0; b < 3; ++b) {
    const double target = b == 0 ? 10.0 : b == 1 ? 50.0 : 90.0;
    Tensor w({35, 21}, std::vector<double>(windows.data().begin() + b * 735,
                                           windows.data().begin() + (b + 1) * 735));
    const auto one = bim(regression_objective(m, {target}), w, AttackConfig::from_budget(0.1, 5));
    Tensor got({35, 21}, std::vector<double>(ex.perturbed.data().begin() + b * 735,
                                             ex.perturbed.data().begin() + (b + 1) * 735));
    EXPECT_EQ(got, one.perturbed);
  }
}
