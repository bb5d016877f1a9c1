#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "puzzlecloud/numerics.hpp"

using namespace puzzlecloud;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = g(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

std::vector<int> random_targets(std::size_t n, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, classes - 1);
  std::vector<int> t(n);
  for (int& x : t) x = pick(rng);
  return t;
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(Linear, IdentityWeights) {
  Tensor x({1, 2}, {1, 2});
  Tensor w({2, 2}, {1, 0, 0, 1});
  Tensor b({2}, {0, 0});
  EXPECT_EQ(to_vec(linear(x, w, b).data()), (std::vector<double>{1, 2}));
}

TEST(Linear, HandMultiply) {
  Tensor x({1, 2}, {1, 1});
  Tensor w({2, 2}, {2, 3, 4, 5});
  Tensor b({2}, {1, 1});
  // [1,1] * [[2,3],[4,5]] + [1,1] = [2+4+1, 3+5+1]
  EXPECT_EQ(to_vec(linear(x, w, b).data()), (std::vector<double>{7, 9}));
}

TEST(Linear, ShapeRule) {
  Tensor y = linear(Tensor::zeros({2, 5, 3}), Tensor::zeros({3, 8}), Tensor::zeros({8}));
  EXPECT_EQ(y.shape(), (Shape{2, 5, 8}));
}

TEST(Linear, MismatchThrows) {
  EXPECT_THROW(linear(Tensor::zeros({2, 4}), Tensor::zeros({3, 8}), Tensor::zeros({8})), DimensionError);
  EXPECT_THROW(linear(Tensor::zeros({2, 3}), Tensor::zeros({3, 8}), Tensor::zeros({7})), DimensionError);
}

TEST(Linear, BackwardAccumulatesIntoAllInputs) {
  Tensor x({1, 2}, {1, 2}, true);
  Tensor w2({2, 2}, {3, 0, 4, 0}, true);
  Tensor b2({2}, {0.5, 0}, true);
  const std::vector<int> t{1};
  Tensor loss = softmax_cross_entropy(linear(x, w2, b2), t);
  loss.backward();
  // d loss / d logits = softmax - onehot; logits = [11.5, 0].
  const double p0 = 1.0 / (1.0 + std::exp(-11.5));
  EXPECT_NEAR(b2.grad()[0], p0, 1e-12);
  EXPECT_NEAR(b2.grad()[1], (1.0 - p0) - 1.0, 1e-12);
  EXPECT_NEAR(w2.grad()[0], 1.0 * p0, 1e-12);
  EXPECT_NEAR(x.grad()[0], 3.0 * p0, 1e-12);
}

TEST(Relu, Values) {
  Tensor y = relu(Tensor({3}, {-1, 0, 2}));
  EXPECT_EQ(to_vec(y.data()), (std::vector<double>{0, 0, 2}));
}

TEST(Relu, AllNegativeGivesZeroGradient) {
  Tensor x({1, 3}, {-1, -2, -3}, true);
  Tensor y = relu(x);
  EXPECT_EQ(to_vec(y.data()), (std::vector<double>{0, 0, 0}));
  softmax_cross_entropy(y, std::vector<int>{0}).backward();
  EXPECT_EQ(to_vec(x.grad()), (std::vector<double>{0, 0, 0}));
}

TEST(Relu, GradientPassesWherePositiveAndNotAtZero) {
  Tensor x({1, 2}, {3, 0}, true);
  Tensor w({2, 2}, {1, 0, 0, 1}, true);
  Tensor b({2}, {0, 0}, true);
  // Identity layer after the ReLU: the bias gradient is the upstream gradient.
  softmax_cross_entropy(linear(relu(x), w, b), std::vector<int>{0}).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], b.grad()[0]);  // factor 1 at x=3
  EXPECT_EQ(x.grad()[1], 0.0);                 // subgradient 0 at x=0
}

TEST(MaxOverPoints, BruteForceExample) {
  Tensor x({1, 3, 2}, {1, 5, 4, 2, 3, 3});
  MaxPoolResult r = max_over_points(x);
  EXPECT_EQ(to_vec(r.values.data()), (std::vector<double>{4, 5}));
  EXPECT_EQ(r.argmax, (std::vector<std::size_t>{1, 0}));
}

TEST(MaxOverPoints, TiesGoToLowestIndex) {
  Tensor x({1, 3, 2}, {2, 7, 2, 7, 2, 7});
  MaxPoolResult r = max_over_points(x);
  EXPECT_EQ(to_vec(r.values.data()), (std::vector<double>{2, 7}));
  EXPECT_EQ(r.argmax, (std::vector<std::size_t>{0, 0}));
}

TEST(MaxOverPoints, EmptyCloudThrows) {
  EXPECT_THROW(max_over_points(Tensor::zeros({1, 0, 4})), DimensionError);
}

TEST(MaxOverPoints, GradientOnlyToArgmax) {
  Tensor x({1, 3, 2}, {1, 5, 4, 2, 3, 3}, true);
  softmax_cross_entropy(max_over_points(x).values, std::vector<int>{0}).backward();
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_NE(x.grad()[2], 0.0);  // point 1 wins feature 0
  EXPECT_NE(x.grad()[1], 0.0);  // point 0 wins feature 1
  EXPECT_EQ(x.grad()[3], 0.0);
  EXPECT_EQ(x.grad()[4], 0.0);
  EXPECT_EQ(x.grad()[5], 0.0);
}

TEST(MaxOverPoints, PermutationInvariantBitwise) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 17, d = 5;
    Tensor x = random_tensor({1, k, d}, rng, false);
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> permuted(k * d);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < d; ++j) permuted[i * d + j] = x.data()[perm[i] * d + j];
    EXPECT_EQ(to_vec(max_over_points(x).values.data()),
              to_vec(max_over_points(Tensor({1, k, d}, permuted)).values.data()));
  }
}

TEST(SoftmaxCrossEntropy, Ln2) {
  Tensor l = softmax_cross_entropy(Tensor({1, 2}, {0, 0}), std::vector<int>{0});
  EXPECT_NEAR(l.item(), std::log(2.0), 1e-15);
}

TEST(SoftmaxCrossEntropy, StableForHugeLogits) {
  Tensor l = softmax_cross_entropy(Tensor({1, 2}, {1000, 0}), std::vector<int>{0});
  EXPECT_TRUE(std::isfinite(l.item()));
  EXPECT_NEAR(l.item(), 0.0, 1e-12);
}

TEST(SoftmaxCrossEntropy, TargetOutOfRange) {
  EXPECT_THROW(softmax_cross_entropy(Tensor({1, 2}, {0, 0}), std::vector<int>{2}), LabelError);
  EXPECT_THROW(softmax_cross_entropy(Tensor({1, 2}, {0, 0}), std::vector<int>{-1}), LabelError);
}

TEST(SoftmaxCrossEntropy, NonNegative) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    Tensor logits = random_tensor({4, 6}, rng, false, 5.0);
    EXPECT_GE(softmax_cross_entropy(logits, random_targets(4, 6, rng)).item(), 0.0);
  }
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  Tensor logits = random_tensor({5, 4}, rng);
  const auto targets = random_targets(5, 4, rng);
  const auto r = gradient_check([&] { return softmax_cross_entropy(logits, targets); }, {logits});
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_entry;
  EXPECT_EQ(r.checked, 20u);
}

TEST(Dropout, RateZeroIsIdentity) {
  std::mt19937_64 rng(1);
  Tensor x({4}, {1, 2, 3, 4});
  EXPECT_EQ(to_vec(dropout(x, 0.0, true, rng).data()), to_vec(x.data()));
}

TEST(Dropout, EvalModeIsIdentity) {
  std::mt19937_64 rng(1);
  Tensor x({4}, {1, 2, 3, 4});
  EXPECT_EQ(to_vec(dropout(x, 0.7, false, rng).data()), to_vec(x.data()));
}

TEST(Dropout, SurvivorFractionMonteCarlo) {
  std::mt19937_64 rng(2024);
  Tensor x({100000}, std::vector<double>(100000, 1.0));
  Tensor y = dropout(x, 0.5, true, rng);
  std::size_t survivors = 0;
  for (double v : y.data()) {
    if (v != 0.0) {
      ++survivors;
      EXPECT_EQ(v, 2.0);
    }
  }
  EXPECT_NEAR(static_cast<double>(survivors) / 100000.0, 0.5, 0.01);
}

TEST(Dropout, RateOneRejected) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(dropout(Tensor({1}, {1}), 1.0, true, rng), ConfigError);
}

TEST(Optimizer, AdamFirstStep) {
  ModelParams params;
  params.add("p", {}, ParamGroup::feature);
  params[0].tensor.mutable_grad()[0] = 1.0;
  OptimizerState state = make_adam(params, 0.001);
  optimizer_step(params, state, 0.001);
  // m_hat = 1, v_hat = 1, update = lr * 1 / (1 + 1e-8).
  EXPECT_NEAR(params[0].tensor.data()[0], -0.001, 1e-10);
  EXPECT_EQ(params[0].tensor.grad()[0], 0.0);
  EXPECT_EQ(state.step, 1u);
}

TEST(Optimizer, SgdMomentumTwoSteps) {
  ModelParams params;
  params.add("p", {}, ParamGroup::feature);
  OptimizerState state = make_sgd(params, 0.1);
  params[0].tensor.mutable_grad()[0] = 1.0;
  optimizer_step(params, state, 0.1);
  EXPECT_NEAR(params[0].tensor.data()[0], -0.1, 1e-15);
  params[0].tensor.mutable_grad()[0] = 1.0;
  optimizer_step(params, state, 0.1);
  // v = 0.9 * 1 + 1 = 1.9; p = -0.1 - 0.19.
  EXPECT_NEAR(params[0].tensor.data()[0], -0.29, 1e-15);
}

TEST(Optimizer, ZeroGradLeavesParameters) {
  std::mt19937_64 rng(8);
  ModelParams params;
  params.add("w", {3, 2}, ParamGroup::main_head);
  he_uniform(params[0].tensor, 3, rng);
  const auto before = to_vec(params[0].tensor.data());
  for (auto make : {0, 1}) {
    OptimizerState state = make ? make_sgd(params, 0.1) : make_adam(params, 0.1);
    optimizer_step(params, state, 0.1);
    EXPECT_EQ(to_vec(params[0].tensor.data()), before);
  }
}

TEST(Optimizer, MismatchedStateThrows) {
  ModelParams a, b;
  a.add("p", {2}, ParamGroup::feature);
  b.add("p", {2}, ParamGroup::feature);
  b.add("q", {2}, ParamGroup::feature);
  OptimizerState state = make_adam(a, 0.1);
  EXPECT_THROW(optimizer_step(b, state, 0.1), StateError);
}

TEST(Optimizer, Deterministic) {
  auto run = [] {
    std::mt19937_64 rng(4);
    ModelParams params;
    params.add("w", {4, 3}, ParamGroup::feature);
    he_uniform(params[0].tensor, 4, rng);
    OptimizerState state = make_adam(params, 0.01);
    for (int s = 0; s < 5; ++s) {
      for (double& g : params[0].tensor.mutable_grad()) g = std::sin(static_cast<double>(s) + g + 1.0);
      optimizer_step(params, state, 0.01);
    }
    return to_vec(params[0].tensor.data());
  };
  EXPECT_EQ(run(), run());
}

TEST(GradientCheck, LinearReluCrossEntropyChain) {
  std::mt19937_64 rng(21);
  Tensor x = random_tensor({3, 4, 5}, rng);
  Tensor w1 = random_tensor({5, 6}, rng);
  Tensor b1 = random_tensor({6}, rng);
  Tensor w2 = random_tensor({6, 3}, rng);
  Tensor b2 = random_tensor({3}, rng);
  const auto targets = random_targets(12, 3, rng);
  auto f = [&] { return softmax_cross_entropy(linear(relu(linear(x, w1, b1)), w2, b2), targets); };
  const auto r = gradient_check(f, {x, w1, b1, w2, b2});
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_entry;
  EXPECT_GT(r.checked, 100u);
}

TEST(GradientCheck, ConstantFunction) {
  Tensor w({3}, {1, 2, 3}, true);
  const auto r = gradient_check([] { return Tensor::scalar(2.5); }, {w});
  EXPECT_LT(r.max_absolute_error, 1e-8);
  EXPECT_EQ(r.checked, 3u);
}

TEST(GradientCheck, MaxPoolConcatAndScaledSum) {
  std::mt19937_64 rng(33);
  Tensor x = random_tensor({2, 6, 4}, rng);
  Tensor w = random_tensor({8, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  Tensor w2 = random_tensor({4, 3}, rng);
  Tensor b2 = random_tensor({3}, rng);
  const auto t_points = random_targets(12, 3, rng);
  const auto t_shapes = random_targets(2, 3, rng);
  auto f = [&] {
    Tensor global = max_over_points(x).values;
    Tensor per_point = linear(concat_global(x, global), w, b);
    Tensor a = softmax_cross_entropy(per_point, t_points);
    Tensor c = softmax_cross_entropy(linear(global, w2, b2), t_shapes);
    return add_scaled(a, c, 0.7);
  };
  const auto r = gradient_check(f, {x, w, b, w2, b2});
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_entry;
}

TEST(GradientCheck, BatchStandardizeTraining) {
  std::mt19937_64 rng(44);
  Tensor x = random_tensor({2, 5, 3}, rng);
  Tensor w = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4}, rng);
  const auto targets = random_targets(10, 4, rng);
  RunningStats stats{std::vector<double>(3, 0.0), std::vector<double>(3, 1.0)};
  auto f = [&] {
    return softmax_cross_entropy(linear(batch_standardize(x, stats, true, false), w, b), targets);
  };
  const auto r = gradient_check(f, {x, w, b});
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_entry;
  EXPECT_EQ(stats.mean, std::vector<double>(3, 0.0));  // update_stats off
}

TEST(BatchStandardize, RunningStatsMomentum) {
  RunningStats stats{{0.0}, {1.0}};
  Tensor x({4, 1}, {1, 2, 3, 4});
  batch_standardize(x, stats, true, true);
  EXPECT_NEAR(stats.mean[0], 0.1 * 2.5, 1e-15);
  EXPECT_NEAR(stats.variance[0], 0.9 + 0.1 * 1.25, 1e-15);
}

TEST(NumericErrors, NamedOp) {
  Tensor x({1, 1}, {1e200});
  Tensor w({1, 1}, {1e200});
  Tensor b({1}, {0});
  try {
    linear(x, w, b);
    FAIL() << "overflow not reported";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("linear"), std::string::npos) << e.what();
  }
}

TEST(NoGrad, BuildsNoGraph) {
  Tensor x({1, 2}, {1, 2}, true);
  Tensor w({2, 2}, {1, 0, 0, 1}, true);
  Tensor b({2}, {0, 0}, true);
  NoGradGuard guard;
  Tensor y = linear(x, w, b);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, ShapeDataMismatch) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor({1}, {std::nan("")}), NumericError);
}

TEST(ParameterGroups, DuplicateNameRejected) {
  ModelParams p;
  p.add("a", {1}, ParamGroup::feature);
  EXPECT_THROW(p.add("a", {1}, ParamGroup::main_head), ConfigError);
}
