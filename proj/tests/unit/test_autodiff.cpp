#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "tde/autodiff.hpp"
#include "tde/gradcheck.hpp"

using namespace tde;
using tde::test::random_tensor;

namespace {

constexpr double kTol = 1e-4;

using Builder = std::function<ad::Var(ad::Tape&, ad::Var)>;

// Random projection to a scalar so every output coordinate matters.
ad::Var project(ad::Tape& tape, ad::Var y, std::uint64_t seed) {
  const ad::Var w = tape.leaf(random_tensor(tape.value(y).shape(), seed, "proj"));
  return ad::sum(tape, ad::mul(tape, y, w));
}

double check(const Tensor& x0, const Builder& build, std::uint64_t seed) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(x0);
  const ad::Var loss = project(tape, build(tape, x), seed);
  const Tensor analytic = tape.backward(loss).at(x.id);
  auto f = [&](const Tensor& probe) {
    ad::Tape t;
    return t.value(project(t, build(t, t.leaf(probe)), seed))[0];
  };
  return ad::max_relative_error(analytic, ad::finite_diff(f, x0, 1e-5));
}

}  // namespace

TEST(Backward, SumGivesOnes) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(random_tensor(Shape{2, 3}, 1));
  const auto g = tape.backward(ad::sum(tape, x));
  for (double v : g.at(x.id).data()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, SquareGivesTwiceInput) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(Tensor(Shape{2}, {1, 2}));
  const auto g = tape.backward(ad::sum(tape, ad::mul(tape, x, x)));
  EXPECT_EQ(g.at(x.id), Tensor(Shape{2}, {2, 4}));
}

TEST(Backward, RejectsNonScalarLossAndReportsUnreachedLeaves) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(Tensor(Shape{2}, 1.0));
  const ad::Var unused = tape.leaf(Tensor(Shape{3}, 1.0));
  EXPECT_THROW(tape.backward(ad::scale(tape, x, 2.0)), std::invalid_argument);
  const auto g = tape.backward(ad::sum(tape, x));
  EXPECT_EQ(g.at(unused.id), Tensor(Shape{3}));
  EXPECT_TRUE(tape.is_leaf(x));
}

TEST(Backward, SharedInputsAccumulate) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(Tensor(Shape{1}, 3.0));
  const std::array<ad::Var, 3> parts{x, x, ad::scale(tape, x, 2.0)};
  const auto g = tape.backward(ad::sum(tape, ad::stack(tape, parts)));
  EXPECT_EQ(g.at(x.id)[0], 4.0);
}

TEST(FiniteDiff, SumIsOnes) {
  const Tensor fd = ad::finite_diff(
      [](const Tensor& x) {
        double s = 0;
        for (double v : x.data()) s += v;
        return s;
      },
      random_tensor(Shape{5}, 2), 1e-3);
  for (double v : fd.data()) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(FiniteDiff, SquareAtThree) {
  const Tensor fd =
      ad::finite_diff([](const Tensor& x) { return x[0] * x[0]; }, Tensor(Shape{1}, 3.0), 1e-3);
  EXPECT_NEAR(fd[0], 6.0, 1e-6);
}

TEST(FiniteDiff, RejectsBadStepAndNonFiniteObjective) {
  const auto f = [](const Tensor& x) { return x[0]; };
  EXPECT_THROW(ad::finite_diff(f, Tensor(Shape{1}), 0.0), std::invalid_argument);
  EXPECT_THROW(ad::finite_diff(f, Tensor(Shape{1}), -1e-3), std::invalid_argument);
  EXPECT_THROW(ad::finite_diff([](const Tensor&) { return std::nan(""); }, Tensor(Shape{1}), 1e-3),
               std::domain_error);
}

TEST(Surrogate, RelaxedSpikeGradientIsAnalyticDerivative) {
  const double alpha = 2.0;
  ad::Tape tape;
  const Tensor x0(Shape{5}, {-1.0, -0.2, 0.0, 0.3, 2.0});
  const ad::Var x = tape.leaf(x0);
  const auto g = tape.backward(ad::sum(tape, ad::spike(tape, x, 0.5, ad::SpikeMode::Relaxed, alpha)));
  for (std::size_t i = 0; i < 5; ++i) {
    const double u = std::numbers::pi * alpha * (x0[i] - 0.5) / 2.0;
    EXPECT_NEAR(g.at(x.id)[i], (alpha / 2.0) / (1.0 + u * u), 1e-15);
  }
  EXPECT_NEAR(ad::surrogate(0.0, alpha), 0.5, 1e-15);
}

TEST(Surrogate, SpikingModeIsHardForwardWithSurrogateBackward) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(Tensor(Shape{3}, {0.5, 1.0, 1.5}));
  const ad::Var s = ad::spike(tape, x, 1.0, ad::SpikeMode::Spiking, 2.0);
  EXPECT_EQ(tape.value(s), Tensor(Shape{3}, {0, 1, 1}));
  const auto g = tape.backward(ad::sum(tape, s));
  EXPECT_DOUBLE_EQ(g.at(x.id)[1], ad::surrogate_grad(0.0, 2.0));
}

class PrimitiveGrad : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(PrimitiveGrad, Conv2dInputWeightsAndBias) {
  const std::uint64_t seed = GetParam();
  const Tensor x = random_tensor(Shape{2, 5, 7}, seed, "x");
  const Tensor w = random_tensor(Shape{3, 2, 3, 3}, seed, "w");
  const Tensor b = random_tensor(Shape{3}, seed, "b");
  EXPECT_LT(check(x, [&](ad::Tape& t, ad::Var v) {
    return ad::conv2d(t, v, t.leaf(w), t.leaf(b), 1, 1);
  }, seed), kTol);
  EXPECT_LT(check(w, [&](ad::Tape& t, ad::Var v) {
    return ad::conv2d(t, t.leaf(x), v, t.leaf(b), 2, 1);
  }, seed), kTol);
  EXPECT_LT(check(b, [&](ad::Tape& t, ad::Var v) {
    return ad::conv2d(t, t.leaf(x), t.leaf(w), v, 1, 0);
  }, seed), kTol);
  const Tensor frames = random_tensor(Shape{3, 2, 4, 4}, seed, "f");
  EXPECT_LT(check(frames, [&](ad::Tape& t, ad::Var v) {
    return ad::conv2d(t, v, t.leaf(w), t.leaf(b), 1, 1);
  }, seed), kTol);
}

TEST_P(PrimitiveGrad, BatchnormEval) {
  const std::uint64_t seed = GetParam();
  BatchNormParams stats = BatchNormParams::identity(3);
  stats.running_mean = {0.1, -0.2, 0.3};
  stats.running_var = {0.5, 1.5, 2.0};
  const Tensor x = random_tensor(Shape{2, 3, 2, 2}, seed, "x");
  const Tensor gamma = random_tensor(Shape{3}, seed, "g");
  const Tensor beta = random_tensor(Shape{3}, seed, "b");
  EXPECT_LT(check(x, [&](ad::Tape& t, ad::Var v) {
    return ad::batchnorm_eval(t, v, t.leaf(gamma), t.leaf(beta), stats);
  }, seed), kTol);
  EXPECT_LT(check(gamma, [&](ad::Tape& t, ad::Var v) {
    return ad::batchnorm_eval(t, t.leaf(x), v, t.leaf(beta), stats);
  }, seed), kTol);
  EXPECT_LT(check(beta, [&](ad::Tape& t, ad::Var v) {
    return ad::batchnorm_eval(t, t.leaf(x), t.leaf(gamma), v, stats);
  }, seed), kTol);
}

TEST_P(PrimitiveGrad, BroadcastMulAndAdd) {
  const std::uint64_t seed = GetParam();
  const Tensor big = random_tensor(Shape{2, 3, 2, 2}, seed, "big");
  const Tensor small = random_tensor(Shape{2, 1, 1, 1}, seed, "small");
  EXPECT_LT(check(small, [&](ad::Tape& t, ad::Var v) { return ad::mul(t, v, t.leaf(big)); }, seed), kTol);
  EXPECT_LT(check(big, [&](ad::Tape& t, ad::Var v) { return ad::mul(t, t.leaf(small), v); }, seed), kTol);
  EXPECT_LT(check(small, [&](ad::Tape& t, ad::Var v) { return ad::add(t, t.leaf(big), v); }, seed), kTol);
  EXPECT_LT(check(small, [&](ad::Tape& t, ad::Var v) { return ad::sub(t, t.leaf(big), v); }, seed), kTol);
}

TEST_P(PrimitiveGrad, MaxpoolRoutesToArgmax) {
  const std::uint64_t seed = GetParam();
  const Tensor x = random_tensor(Shape{3, 4, 2, 2}, seed, "x");
  static constexpr std::array<std::size_t, 2> axes{0, 2};
  EXPECT_LT(check(x, [&](ad::Tape& t, ad::Var v) { return ad::maxpool(t, v, axes); }, seed), kTol);
}

TEST_P(PrimitiveGrad, LinearSigmoidAndLoss) {
  const std::uint64_t seed = GetParam();
  const Tensor x = random_tensor(Shape{5}, seed, "x");
  const Tensor w = random_tensor(Shape{3, 5}, seed, "w");
  const Tensor b = random_tensor(Shape{3}, seed, "b");
  const Tensor target = random_tensor(Shape{3}, seed, "target", -2, 2);
  EXPECT_LT(check(x, [&](ad::Tape& t, ad::Var v) {
    return ad::sigmoid(t, ad::linear(t, v, t.leaf(w), t.leaf(b)));
  }, seed), kTol);
  EXPECT_LT(check(w, [&](ad::Tape& t, ad::Var v) {
    return ad::smooth_l1(t, ad::shift(t, ad::linear(t, t.leaf(x), v, t.leaf(b)), 0.1), target);
  }, seed), kTol);
}

TEST_P(PrimitiveGrad, LayoutOps) {
  const std::uint64_t seed = GetParam();
  const Tensor x = random_tensor(Shape{3, 2, 2}, seed, "x");
  EXPECT_LT(check(x, [](ad::Tape& t, ad::Var v) { return ad::mean_leading(t, v); }, seed), kTol);
  EXPECT_LT(check(x, [](ad::Tape& t, ad::Var v) { return ad::select(t, v, 1); }, seed), kTol);
  EXPECT_LT(check(x, [](ad::Tape& t, ad::Var v) { return ad::reshape(t, v, Shape{12}); }, seed), kTol);
  EXPECT_LT(check(x, [](ad::Tape& t, ad::Var v) { return ad::mean(t, v); }, seed), kTol);
}

TEST_P(PrimitiveGrad, RelaxedLif) {
  const std::uint64_t seed = GetParam();
  const Tensor x = random_tensor(Shape{4, 3, 2}, seed, "x", 0.0, 1.5);
  EXPECT_LT(check(x, [](ad::Tape& t, ad::Var v) {
    return ad::lif(t, v, LifParams{}, ad::SpikeMode::Relaxed);
  }, seed), kTol);
}

TEST_P(PrimitiveGrad, TwoLayerConvLifNetwork) {
  GradcheckOptions o;
  o.seed = GetParam();
  const GradcheckReport r = gradcheck_network(o);
  EXPECT_LT(r.max_relative_error, kTol);
  EXPECT_EQ(r.parameters.size(), 5u);
}

INSTANTIATE_TEST_SUITE_P(Seeds, PrimitiveGrad, ::testing::Values(1, 2, 3, 4, 5));

TEST(Autodiff, SpikingLifForwardMatchesNeuronModule) {
  const Tensor x = random_tensor(Shape{5, 6}, 9, "x", -0.5, 1.5);
  ad::Tape tape;
  const ad::Var s = ad::lif(tape, tape.leaf(x), LifParams{}, ad::SpikeMode::Spiking);
  EXPECT_EQ(tape.value(s), lif_forward(x, LifParams{}));
}

TEST(Autodiff, GradcheckIsRobustToStepSize) {
  for (double h : {1e-3, 1e-4}) {
    GradcheckOptions o;
    o.h = h;
    EXPECT_LT(gradcheck_network(o).max_relative_error, kTol) << "h " << h;
  }
}

TEST(Autodiff, MaxRelativeError) {
  EXPECT_EQ(ad::max_relative_error(Tensor(Shape{2}), Tensor(Shape{2})), 0.0);
  EXPECT_DOUBLE_EQ(ad::max_relative_error(Tensor(Shape{2}, {1, 2}), Tensor(Shape{2}, {1, 1})), 0.5);
  EXPECT_THROW(ad::max_relative_error(Tensor(Shape{2}), Tensor(Shape{3})), ShapeError);
}
