#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>

#include "support/oracles.hpp"
#include "temcgl/mlp.hpp"

using namespace temcgl;

namespace {

// Recorded at first build: logits of init_mlp(3, {4}, 2, seed 0) on (1, -2, 0.5).
constexpr double kGoldenLogits[2] = {-0.403688768963617, -0.21065994547416414};

WeightedBatch random_batch(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> w(0.2, 3.0);
  std::uniform_int_distribution<ClassId> c(0, static_cast<ClassId>(classes - 1));
  WeightedBatch b{Matrix(n, dim), {}, {}};
  for (double& x : b.inputs.values()) x = g(rng);
  for (std::size_t i = 0; i < n; ++i) {
    b.labels.push_back(c(rng));
    b.weights.push_back(w(rng));
  }
  return b;
}

}  // namespace

TEST(Forward, ZeroParamsGiveUniformSoftmax) {
  const std::vector<std::size_t> hidden{5};
  MlpParams p = MlpParams::zeros_like(init_mlp(3, hidden, 4, 1));
  Matrix x(2, 3);
  x(0, 0) = 1.0, x(1, 2) = -7.0;
  const Matrix z = forward(p, x);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
  for (double s : softmax(z.row(0))) EXPECT_DOUBLE_EQ(s, 0.25);
}

TEST(Forward, IdentityLayer) {
  MlpParams p{{Layer{Matrix::identity(3), {0.0, 0.0, 0.0}}}};
  Matrix x(1, 3);
  x(0, 0) = 0.3, x(0, 1) = -1.2, x(0, 2) = 9.0;
  EXPECT_EQ(forward(p, x), x);
}

TEST(Forward, GoldenSeedZero) {
  const std::vector<std::size_t> hidden{4};
  const MlpParams p = init_mlp(3, hidden, 2, 0);
  Matrix x(1, 3);
  x(0, 0) = 1.0, x(0, 1) = -2.0, x(0, 2) = 0.5;
  const Matrix z = forward(p, x);
  EXPECT_DOUBLE_EQ(z(0, 0), kGoldenLogits[0]);
  EXPECT_DOUBLE_EQ(z(0, 1), kGoldenLogits[1]);
}

TEST(Forward, RejectsWrongInputDim) {
  const MlpParams p = init_mlp(3, std::vector<std::size_t>{}, 2, 0);
  EXPECT_THROW(forward(p, Matrix(1, 4)), std::invalid_argument);
}

TEST(Loss, ConfidentCorrectPredictionApproachesZero) {
  MlpParams p{{Layer{Matrix::identity(3), {0.0, 0.0, 0.0}}}};
  WeightedBatch b{Matrix(1, 3), {1}, {1.0}};
  b.inputs(0, 1) = 50.0;
  EXPECT_LT(loss_and_grad(p, b).loss, 1e-20);
}

TEST(Loss, UniformLogitsGiveLogC) {
  const MlpParams p = MlpParams::zeros_like(init_mlp(5, std::vector<std::size_t>{}, 4, 0));
  const WeightedBatch b = random_batch(7, 5, 4, 3);
  EXPECT_NEAR(loss_and_grad(p, b).loss, std::log(4.0), 1e-15);
  EXPECT_NEAR(std::log(4.0), 1.3863, 1e-4);
}

TEST(Loss, RejectsBadBatches) {
  const MlpParams p = init_mlp(2, std::vector<std::size_t>{}, 2, 0);
  EXPECT_THROW(loss_and_grad(p, WeightedBatch{Matrix(0, 2), {}, {}}), std::invalid_argument);
  EXPECT_THROW(loss_and_grad(p, WeightedBatch{Matrix(1, 2), {0}, {0.0}}), std::invalid_argument);
  EXPECT_THROW(loss_and_grad(p, WeightedBatch{Matrix(1, 2), {2}, {1.0}}), std::invalid_argument);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::vector<std::size_t> hidden{6, 5};
    const MlpParams p = init_mlp(4, hidden, 3, seed);
    const WeightedBatch b = random_batch(8, 4, 3, seed + 100);
    const auto analytic = oracle::flatten(loss_and_grad(p, b).grad);
    const auto numeric = oracle::finite_difference(p, [&](const MlpParams& q) { return oracle::weighted_ce(q, b); });
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
      EXPECT_LT(std::abs(analytic[i] - numeric[i]) / scale, 1e-5) << "seed " << seed << " param " << i;
    }
  }
}

TEST(Loss, LossMatchesOracle) {
  const std::vector<std::size_t> hidden{7};
  const MlpParams p = init_mlp(5, hidden, 4, 8);
  const WeightedBatch b = random_batch(20, 5, 4, 9);
  EXPECT_NEAR(loss_and_grad(p, b).loss, oracle::weighted_ce(p, b), 1e-12);
}

TEST(Loss, BitExactUnderBatchPermutation) {
  const std::vector<std::size_t> hidden{8};
  const MlpParams p = init_mlp(5, hidden, 3, 2);
  const WeightedBatch b = random_batch(30, 5, 3, 4);
  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  WeightedBatch q{Matrix(30, 5), {}, {}};
  for (std::size_t i = 0; i < 30; ++i) {
    std::copy(b.inputs.row(perm[i]).begin(), b.inputs.row(perm[i]).end(), q.inputs.row(i).begin());
    q.labels.push_back(b.labels[perm[i]]);
    q.weights.push_back(b.weights[perm[i]]);
  }
  const auto a = loss_and_grad(p, b), c = loss_and_grad(p, q);
  EXPECT_EQ(a.loss, c.loss);
  EXPECT_EQ(a.grad, c.grad);
}

TEST(ClassBalance, BalancedIsAllOnes) {
  const std::vector<ClassId> labels{0, 1, 2, 0, 1, 2};
  for (double w : class_balance_weights(labels)) EXPECT_DOUBLE_EQ(w, 1.0);
}

TEST(ClassBalance, NinetyTen) {
  std::vector<ClassId> labels(90, 0);
  labels.insert(labels.end(), 10, 1);
  const auto w = class_balance_weights(labels);
  EXPECT_NEAR(w.front(), 100.0 / 180.0, 1e-15);
  EXPECT_NEAR(w.back(), 5.0, 1e-15);
}

TEST(ClassBalance, PerClassTotalsEqualize) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClassId> labels;
    std::uniform_int_distribution<int> count(1, 200);
    const int classes = 2 + trial % 5;
    for (int c = 0; c < classes; ++c) labels.insert(labels.end(), count(rng), static_cast<ClassId>(c));
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto w = class_balance_weights(labels);
    std::map<ClassId, double> total;
    for (std::size_t i = 0; i < w.size(); ++i) total[labels[i]] += w[i];
    for (const auto& [c, t] : total) EXPECT_NEAR(t, static_cast<double>(labels.size()) / classes, 1e-9);
  }
}

TEST(Optimizer, ZeroGradientLeavesParams) {
  for (auto kind : {OptimizerKind::kSgd, OptimizerKind::kAdam}) {
    MlpParams p = init_mlp(3, std::vector<std::size_t>{4}, 2, 1);
    const MlpParams before = p;
    auto state = OptimizerState::make(kind, 0.1, p);
    optimizer_step(state, p, MlpParams::zeros_like(p));
    EXPECT_EQ(p, before);
  }
}

TEST(Optimizer, SgdStep) {
  MlpParams p = init_mlp(2, std::vector<std::size_t>{}, 2, 1);
  MlpParams g = MlpParams::zeros_like(p);
  g.layers[0].weight(1, 0) = 0.5;
  g.layers[0].bias[0] = -2.0;
  const MlpParams before = p;
  auto state = OptimizerState::make(OptimizerKind::kSgd, 0.1, p);
  optimizer_step(state, p, g);
  EXPECT_DOUBLE_EQ(p.layers[0].weight(1, 0), before.layers[0].weight(1, 0) - 0.05);
  EXPECT_DOUBLE_EQ(p.layers[0].bias[0], before.layers[0].bias[0] + 0.2);
  EXPECT_EQ(p.layers[0].weight(0, 0), before.layers[0].weight(0, 0));
}

TEST(Optimizer, AdamMinimizesQuadratic) {
  // f(x) = (x - 3)^2 on the single bias parameter.
  MlpParams p{{Layer{Matrix(1, 1), {0.0}}}};
  auto state = OptimizerState::make(OptimizerKind::kAdam, 0.1, p);
  for (int i = 0; i < 200; ++i) {
    MlpParams g = MlpParams::zeros_like(p);
    g.layers[0].bias[0] = 2.0 * (p.layers[0].bias[0] - 3.0);
    optimizer_step(state, p, g);
  }
  EXPECT_LT(std::abs(p.layers[0].bias[0] - 3.0), 1e-3);
}

TEST(Checkpoint, ModelRoundTrip) {
  const MlpParams p = init_mlp(6, std::vector<std::size_t>{5, 4}, 3, 9);
  const auto path = std::filesystem::temp_directory_path() / "temcgl_model.bin";
  save_model(p, path);
  EXPECT_EQ(load_model(path), p);
}

TEST(Hidden, RepresentationShape) {
  const MlpParams p = init_mlp(6, std::vector<std::size_t>{5, 4}, 3, 9);
  const Matrix h = hidden_representation(p, Matrix(2, 6));
  EXPECT_EQ(h.cols(), 4u);
  for (double x : h.values()) EXPECT_GE(x, 0.0);
  EXPECT_EQ(hidden_representation(init_mlp(6, std::vector<std::size_t>{}, 3, 9), Matrix(2, 6)).cols(), 6u);
}
