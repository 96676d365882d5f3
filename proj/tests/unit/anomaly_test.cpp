#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "../support/check.hpp"
#include "../support/oracles.hpp"
#include "phmadv/anomaly.hpp"
#include "phmadv/error.hpp"

using namespace phmadv;
using phmadv::testing::gradient_check;
using phmadv::testing::random_tensor;
using phmadv::testing::rotate;
using phmadv::testing::rotation3;

namespace {

NormalityModel tiny_model(std::uint64_t seed) {
  NormalityModel::Config c;
  c.input_width = 2;
  c.window = 3;
  c.hidden = 3;
  return NormalityModel::initialize(c, seed);
}

ResidualStats identity_stats(std::size_t n) {
  ResidualStats s;
  s.mean = Tensor::zeros({n});
  s.covariance = Tensor::zeros({n, n});
  s.precision = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    s.covariance[i * n + i] = 1.0;
    s.precision[i * n + i] = 1.0;
  }
  return s;
}

}  // namespace

TEST(Residual, ZeroPredictorGivesActual) {
  NormalityModel::Config c;
  c.input_width = 2;
  c.window = 3;
  c.hidden = 3;
  const NormalityModel m = NormalityModel::zeros(c);
  const Tensor v = Tensor::vector({1.5, -2.0});
  EXPECT_EQ(residual(m, Tensor::full({3, 2}, 0.3), v), v);
}

TEST(Residual, PerfectPredictionIsZero) {
  const NormalityModel m = tiny_model(1);
  std::mt19937_64 rng(1);
  const Tensor w = random_tensor({3, 2}, rng);
  const Tensor pred = lstm_predict(m, w);
  EXPECT_EQ(residual(m, w, pred), Tensor::zeros({2}));
}

TEST(Residual, EqualsElementwiseSubtraction) {
  const NormalityModel m = tiny_model(2);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor w = random_tensor({3, 2}, rng);
    const Tensor actual = random_tensor({2}, rng);
    const Tensor pred = lstm_predict(m, w);
    const Tensor r = residual(m, w, actual);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(r[i], actual[i] - pred[i]);
  }
  EXPECT_THROW(residual(m, Tensor::zeros({3, 2}), Tensor::zeros({3})), ShapeError);
}

TEST(ResidualStats, HandComputedCovariance) {
  const std::vector<Tensor> r{Tensor::vector({1, 0}), Tensor::vector({-1, 0}),
                              Tensor::vector({0, 1}), Tensor::vector({0, -1})};
  const ResidualStats s = fit_residual_stats(r, 0.0);
  EXPECT_EQ(s.mean, Tensor::zeros({2}));
  EXPECT_NEAR(s.covariance[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.covariance[3], 2.0 / 3.0, 1e-15);
  EXPECT_EQ(s.covariance[1], 0.0);
  EXPECT_NEAR(s.precision[0], 1.5, 1e-12);
  EXPECT_NEAR(s.precision[3], 1.5, 1e-12);
}

TEST(ResidualStats, ConstantResidualsNeedRegularizer) {
  const std::vector<Tensor> r(5, Tensor::vector({2.0, -1.0}));
  EXPECT_THROW(fit_residual_stats(r, 0.0), RegularizationError);
  // The default regularizer is zero for a zero-trace covariance too.
  EXPECT_THROW(fit_residual_stats(r), RegularizationError);
  const ResidualStats s = fit_residual_stats(r, 0.5);
  EXPECT_EQ(s.mean, Tensor::vector({2.0, -1.0}));
  EXPECT_EQ(s.covariance, Tensor::zeros({2, 2}));
  EXPECT_NEAR(s.precision[0], 2.0, 1e-12);

  // 55 * 0.1762... / 55 does not round back to the value; the fit must still
  // see zero spread.
  const std::vector<Tensor> awkward(55, Tensor::vector({0.17620859983221882, 1.0 / 3.0}));
  EXPECT_THROW(fit_residual_stats(awkward), RegularizationError);
  EXPECT_EQ(fit_residual_stats(awkward, 1.0).covariance, Tensor::zeros({2, 2}));
}

TEST(ResidualStats, LargeRegularizerLimit) {
  std::mt19937_64 rng(3);
  std::vector<Tensor> r;
  for (int i = 0; i < 20; ++i) r.push_back(random_tensor({3}, rng));
  const double lambda = 1e9;
  const ResidualStats s = fit_residual_stats(r, lambda);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(s.precision[i * 3 + j] * lambda, i == j ? 1.0 : 0.0, 1e-8);
    }
  }
}

TEST(ResidualStats, PrecisionInvertsRegularizedCovariance) {
  std::mt19937_64 rng(4);
  std::vector<Tensor> r;
  for (int i = 0; i < 30; ++i) r.push_back(random_tensor({4}, rng));
  const ResidualStats s = fit_residual_stats(r);
  EXPECT_DOUBLE_EQ(s.lambda, default_regularizer(s.covariance));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(s.covariance[i * 4 + j], s.covariance[j * 4 + i]);
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        acc += s.precision[i * 4 + k] * (s.covariance[k * 4 + j] + (k == j ? s.lambda : 0.0));
      }
      EXPECT_NEAR(acc, i == j ? 1.0 : 0.0, 1e-8);
    }
  }
}

TEST(ResidualStats, TooFewResiduals) {
  const std::vector<Tensor> r{Tensor::vector({1, 0}), Tensor::vector({0, 1})};
  EXPECT_THROW(fit_residual_stats(r, 1.0), ContractError);
  const std::vector<Tensor> three{Tensor::vector({1, 0}), Tensor::vector({0, 1}),
                                  Tensor::vector({1, 1})};
  EXPECT_THROW(fit_residual_stats(three, -1.0), ContractError);
}

TEST(Mahalanobis, IdentityIsEuclidean) {
  const ResidualStats s = identity_stats(2);
  EXPECT_EQ(mahalanobis_score(s, Tensor::vector({3, 4})), 5.0);
  std::mt19937_64 rng(5);
  const ResidualStats s5 = identity_stats(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor r = random_tensor({5}, rng);
    double sq = 0.0;
    for (double v : r.data()) sq += v * v;
    EXPECT_EQ(mahalanobis_score(s5, r), std::sqrt(sq));
  }
}

TEST(Mahalanobis, ZeroAtMean) {
  ResidualStats s = identity_stats(2);
  s.mean = Tensor::vector({0.5, -0.25});
  EXPECT_EQ(mahalanobis_score(s, s.mean), 0.0);
}

TEST(Mahalanobis, DiagonalCovariance) {
  ResidualStats s = identity_stats(2);
  s.covariance = Tensor::matrix({{4, 0}, {0, 1}});
  s.precision = Tensor::matrix({{0.25, 0}, {0, 1}});
  EXPECT_NEAR(mahalanobis_score(s, Tensor::vector({2, 3})), 3.16228, 1e-5);
}

TEST(Mahalanobis, BatchedScores) {
  const ResidualStats s = identity_stats(2);
  ad::Tape tape;
  const auto scores = mahalanobis_score(s, tape.constant(Tensor::matrix({{3, 4}, {0, 0}, {1, 0}})));
  EXPECT_EQ(scores.value(), Tensor::vector({5, 0, 1}));
}

TEST(Mahalanobis, RotationInvariance) {
  std::mt19937_64 rng(6);
  for (std::size_t n : {2u, 3u}) {
    for (int trial = 0; trial < 10; ++trial) {
      Tensor q;
      if (n == 2) {
        const double a = std::uniform_real_distribution<double>(0, 6.28)(rng);
        q = Tensor::matrix({{std::cos(a), -std::sin(a)}, {std::sin(a), std::cos(a)}});
      } else {
        const Tensor axis = random_tensor({3}, rng);
        q = rotation3(axis[0], axis[1], axis[2], std::uniform_real_distribution<double>(0, 6.28)(rng));
      }
      std::vector<Tensor> r, rr;
      for (int i = 0; i < 25; ++i) {
        Tensor v = random_tensor({n}, rng);
        v[0] *= 3.0;
        rr.push_back(rotate(q, v));
        r.push_back(std::move(v));
      }
      const ResidualStats s = fit_residual_stats(r, 0.0);
      const ResidualStats sr = fit_residual_stats(rr, 0.0);
      for (int i = 0; i < 5; ++i) {
        const Tensor probe = random_tensor({n}, rng, -3, 3);
        EXPECT_NEAR(mahalanobis_score(s, probe), mahalanobis_score(sr, rotate(q, probe)), 1e-8);
      }
    }
  }
}

TEST(Mahalanobis, GradientAwayFromMean) {
  std::mt19937_64 rng(7);
  std::vector<Tensor> r;
  for (int i = 0; i < 30; ++i) r.push_back(random_tensor({4}, rng));
  const ResidualStats s = fit_residual_stats(r);
  auto f = [&](ad::Var v) { return mahalanobis_score(s, v); };
  for (int trial = 0; trial < 10; ++trial) {
    EXPECT_LE(gradient_check(f, random_tensor({4}, rng, 1.0, 2.0)), 1e-4);
  }
  // At the mean the score has a kink; the gradient is defined as zero.
  ad::Tape tape;
  const auto x = tape.leaf(s.mean);
  EXPECT_EQ(tape.gradient(mahalanobis_score(s, x), x), Tensor::zeros({4}));
}

TEST(Mahalanobis, ShapeMismatch) {
  const ResidualStats s = identity_stats(2);
  EXPECT_THROW(mahalanobis_score(s, Tensor::vector({1, 2, 3})), ShapeError);
}

TEST(Decide, StrictThreshold) {
  EXPECT_EQ(decide(0.0, 1.0).status, Status::Normal);
  EXPECT_EQ(decide(2.0, 1.0).status, Status::Abnormal);
  EXPECT_EQ(decide(1.0, 1.0).status, Status::Normal);
}

TEST(Decide, QuantileThreshold) {
  EXPECT_EQ(quantile_threshold({3, 1, 2, 4, 5}, 0.5), 3.0);
  EXPECT_EQ(quantile_threshold({0, 10}, 0.99), 9.9);
  EXPECT_THROW(quantile_threshold({}, 0.5), ContractError);
}

TEST(Scoring, BatchedScoresMatchSingleWindows) {
  const NormalityModel m = tiny_model(8);
  std::mt19937_64 rng(8);
  std::vector<WindowedSample> samples;
  std::vector<Tensor> res;
  for (int i = 0; i < 7; ++i) {
    WindowedSample s;
    s.window = random_tensor({3, 2}, rng);
    s.target = random_tensor({2}, rng);
    samples.push_back(s);
  }
  for (int i = 0; i < 7; ++i) res.push_back(random_tensor({2}, rng));
  const ResidualStats stats = fit_residual_stats(res);
  const auto scores = score_samples(m, stats, samples, 3);
  const auto resid = residual_samples(m, samples, 4);
  ASSERT_EQ(scores.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    const Tensor r = residual(m, samples[i].window, samples[i].target);
    EXPECT_NEAR(scores[i], mahalanobis_score(stats, r), 1e-12);
    EXPECT_NEAR(max_abs_diff(resid[i], r), 0.0, 1e-14);
  }
}
