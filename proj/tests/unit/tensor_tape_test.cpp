#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "../support/check.hpp"
#include "../support/primitives.hpp"
#include "phmadv/error.hpp"
#include "phmadv/tape.hpp"

using namespace phmadv;
using phmadv::testing::gradient_check;
using phmadv::testing::random_away_from_zero;
using phmadv::testing::random_tensor;
using phmadv::testing::weighted_sum;

TEST(Tensor, ShapeAndSizeAgree) {
  const Tensor t = Tensor::zeros({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.dim(2), 4u);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  EXPECT_EQ(Tensor::scalar(4.5).item(), 4.5);
  EXPECT_EQ(Tensor::scalar(4.5).rank(), 0u);
}

TEST(Tensor, ReshapeKeepsData) {
  const Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  const Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.values(), t.values());
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Forward, MatmulByIdentity) {
  ad::Tape tape;
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const auto y = ad::matmul(tape.constant(a), tape.constant(Tensor::matrix({{1, 0}, {0, 1}})));
  EXPECT_EQ(y.value(), a);
}

TEST(Forward, ReluClampsNegatives) {
  ad::Tape tape;
  const auto y = ad::relu(tape.constant(Tensor::vector({-1, 0, 2})));
  EXPECT_EQ(y.value(), Tensor::vector({0, 0, 2}));
}

TEST(Forward, ConvOnesWindowSums) {
  ad::Tape tape;
  const auto y = ad::conv2d(tape.constant(Tensor::full({1, 3, 3, 1}, 1.0)),
                            tape.constant(Tensor::full({2, 2, 1, 1}, 1.0)));
  EXPECT_EQ(y.value(), Tensor::full({1, 2, 2, 1}, 4.0));
}

TEST(Forward, ConvIsCrossCorrelation) {
  // No kernel flip: a kernel with a single 1 at (0,0) picks the top-left of each window.
  ad::Tape tape;
  Tensor x({1, 3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor k({2, 2, 1, 1}, {1, 0, 0, 0});
  const auto y = ad::conv2d(tape.constant(x), tape.constant(k));
  EXPECT_EQ(y.value(), Tensor({1, 2, 2, 1}, {1, 2, 4, 5}));
}

TEST(Forward, ElementwiseAndReductions) {
  ad::Tape tape;
  const auto a = tape.constant(Tensor::vector({1, 2, 3}));
  const auto b = tape.constant(Tensor::vector({4, 5, 6}));
  EXPECT_EQ((a + b).value(), Tensor::vector({5, 7, 9}));
  EXPECT_EQ((a - b).value(), Tensor::vector({-3, -3, -3}));
  EXPECT_EQ((a * b).value(), Tensor::vector({4, 10, 18}));
  EXPECT_EQ(ad::sum(a).value().item(), 6.0);
  EXPECT_EQ(ad::squared_error(a, b).value().item(), 27.0);
  EXPECT_EQ(ad::scale(a, 2.0).value(), Tensor::vector({2, 4, 6}));
}

TEST(Forward, ConcatSliceBias) {
  ad::Tape tape;
  const auto m = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  const std::vector<ad::Var> parts{m, m};
  const auto c = ad::concat(parts, 1);
  EXPECT_EQ(c.value(), Tensor::matrix({{1, 2, 1, 2}, {3, 4, 3, 4}}));
  EXPECT_EQ(ad::slice(c, 1, 1, 2).value(), Tensor::matrix({{2, 1}, {4, 3}}));
  const auto biased = ad::bias_add(m, tape.constant(Tensor::vector({10, 20})));
  EXPECT_EQ(biased.value(), Tensor::matrix({{11, 22}, {13, 24}}));
  EXPECT_EQ(ad::sum_last_axis(m).value(), Tensor::vector({3, 7}));
}

TEST(Forward, SpatialMean) {
  ad::Tape tape;
  // [1, 2, 2, 1] -> [1, 1]
  const auto y = ad::spatial_mean(tape.constant(Tensor({1, 2, 2, 1}, {1, 2, 3, 6})));
  EXPECT_EQ(y.value(), Tensor({1, 1}, {3.0}));
}

TEST(Forward, ShapeMismatchIsDescriptive) {
  ad::Tape tape;
  const auto a = tape.constant(Tensor::zeros({2, 3}));
  const auto b = tape.constant(Tensor::zeros({2, 3}));
  try {
    ad::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ad::add(a, tape.constant(Tensor::zeros({3, 2}))), ShapeError);
  EXPECT_THROW(ad::bias_add(a, tape.constant(Tensor::zeros({2}))), ShapeError);
  EXPECT_THROW(ad::conv2d(tape.constant(Tensor::zeros({1, 2, 2, 1})),
                          tape.constant(Tensor::zeros({3, 3, 1, 1}))),
               ShapeError);
}

TEST(Gradient, SumOfSquares) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::vector({1, 2}));
  const auto out = ad::sum(x * x);
  EXPECT_EQ(tape.gradient(out, x), Tensor::vector({2, 4}));
}

TEST(Gradient, IndependentOutputIsZero) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::vector({1, 2, 3}));
  const auto c = ad::sum(tape.constant(Tensor::vector({5, 6})));
  EXPECT_EQ(tape.gradient(c, x), Tensor::zeros({3}));
}

TEST(Gradient, NonScalarOutputIsContractError) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.gradient(x * x, x), ContractError);
}

TEST(Gradient, ForeignVariableIsLookupError) {
  ad::Tape tape;
  ad::Tape other;
  const auto x = tape.leaf(Tensor::vector({1, 2}));
  const auto y = other.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.gradient(ad::sum(x), y), LookupError);
  // Constants and intermediate nodes are not differentiation targets.
  const auto c = tape.constant(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.gradient(ad::sum(x + c), c), LookupError);
}

TEST(Gradient, SigmoidMatmulChainMatchesFiniteDifferences) {
  std::mt19937_64 rng(41);
  const Tensor w = random_tensor({5, 3}, rng);
  const Tensor v = random_tensor({3, 1}, rng);
  auto f = [&](ad::Var x) {
    auto& t = x.tape();
    const auto h = ad::sigmoid(ad::matmul(ad::reshape(x, {1, 5}), t.constant(w)));
    return ad::sum(ad::tanh(ad::matmul(h, t.constant(v))));
  };
  for (int trial = 0; trial < 10; ++trial) {
    EXPECT_LE(gradient_check(f, random_tensor({5}, rng)), 1e-4);
  }
}

// Every primitive, checked through a random weighting of its output.
class PrimitiveGradient : public ::testing::TestWithParam<const char*> {};

TEST_P(PrimitiveGradient, MatchesFiniteDifferences) {
  const std::string op = GetParam();
  std::mt19937_64 rng(std::hash<std::string>{}(op));
  for (int trial = 0; trial < 3; ++trial) {
    const auto c = phmadv::testing::primitive_case(op, rng);
    EXPECT_LE(gradient_check(c.f, c.x), 1e-4) << op << " trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradient,
                         ::testing::ValuesIn(phmadv::testing::kPrimitiveNames.begin(),
                                             phmadv::testing::kPrimitiveNames.end()));

TEST(Gradient, Linearity) {
  std::mt19937_64 rng(9);
  const double a = 1.75;
  const double b = -0.6;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor({6}, rng);
    const Tensor w = random_tensor({6}, rng);
    auto f = [&](ad::Var v) { return ad::sum(ad::sigmoid(v * v.tape().constant(w))); };
    auto g = [&](ad::Var v) { return ad::sum(ad::tanh(v) * v); };
    const Tensor gf = phmadv::testing::analytic_gradient(f, x);
    const Tensor gg = phmadv::testing::analytic_gradient(g, x);
    const Tensor combined = phmadv::testing::analytic_gradient(
        [&](ad::Var v) { return ad::scale(f(v), a) + ad::scale(g(v), b); }, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(combined[i], a * gf[i] + b * gg[i], 1e-12);
    }
  }
}

TEST(Gradient, SqrtAtZeroIsZero) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::vector({0.0, 4.0}));
  const Tensor g = tape.gradient(ad::sum(ad::sqrt(x)), x);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.25);
}

TEST(Tape, NodesAreTopologicallyOrdered) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::vector({1, 2}));
  const auto y = ad::sigmoid(x);
  const auto z = ad::sum(y * x);
  EXPECT_LT(x.id(), y.id());
  EXPECT_LT(y.id(), z.id());
  EXPECT_EQ(tape.size(), 4u);
}

TEST(Tape, ReplayIsBitExact) {
  std::mt19937_64 rng(2);
  ad::Tape tape;
  const auto x = tape.leaf(random_tensor({1, 6, 5, 2}, rng));
  const auto k = tape.constant(random_tensor({3, 2, 2, 4}, rng));
  const auto y = ad::relu(ad::conv2d(x, k));
  const auto z = ad::tanh(ad::spatial_mean(y));
  const auto out = ad::sum(ad::sigmoid(z) * z);
  const std::vector<Tensor> again = tape.replay();
  ASSERT_EQ(again.size(), tape.size());
  // Var ids are node indices.
  for (const ad::Var& v : {x, k, y, z, out}) EXPECT_EQ(again[v.id()], v.value());
}

TEST(Tape, ForwardIsDeterministic) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({4, 4}, rng);
  auto run = [&] {
    ad::Tape tape;
    const auto v = tape.constant(x);
    return ad::tanh(ad::matmul(v, ad::sigmoid(v))).value();
  };
  EXPECT_EQ(run(), run());
}
