#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gridlab/train.hpp"
#include "support/finite_difference.hpp"

using namespace gridlab;

namespace {

SignalSpec constant_signal(double c) {
  return make_two_half(0, PiecewiseLinear({0, 0.5, 1}, {c, c, c}));
}

bool same_parameters(const Model& a, const Model& b) {
  const auto pa = parameter_tensors(a), pb = parameter_tensors(b);
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!std::equal(pa[i].begin(), pa[i].end(), pb[i].begin(), pb[i].end())) return false;
  return true;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

}  // namespace

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.epsilon = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.sample_grid = 399;
  EXPECT_THROW(c.validate_for(gen_fourier(0, 100)), ConfigError);
  c.sample_grid = 400;
  EXPECT_NO_THROW(c.validate_for(gen_fourier(0, 100)));
}

TEST(UniformSamples, EndpointsIncluded) {
  const auto xs = uniform_samples(5);
  EXPECT_EQ(xs, (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
}

TEST(LossAndGrads, PerfectFitHasZeroLossAndGrads) {
  Model m{make_grid(GridConfig::single_level(4)), make_zero_mlp(1, 2, 4)};
  const auto xs = uniform_samples(33);
  const auto [loss, grads] = loss_and_grads(m, constant_signal(0.0), xs);
  EXPECT_EQ(loss, 0.0);
  for (auto t : parameter_tensors(grads))
    for (double g : t) EXPECT_EQ(g, 0.0);
}

TEST(LossAndGrads, ZeroModelConstantTarget) {
  Model m{make_grid(GridConfig::single_level(4)), make_zero_mlp(1, 2, 4)};
  const auto [loss, grads] = loss_and_grads(m, constant_signal(0.7), uniform_samples(17));
  EXPECT_NEAR(loss, 0.49, 1e-15);
  EXPECT_NEAR(grads.mlp.layers.back().bias(0), -1.4, 1e-14);
}

TEST(LossAndGrads, MatchesReferenceLoss) {
  const auto signal = gen_fourier(3, 20);
  const auto xs = uniform_samples(128);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = gridlab::testing::gradient_test_model(seed);
    EXPECT_NEAR(loss_and_grads(m, signal, xs).first, gridlab::testing::reference_loss(m, signal, xs), 1e-12);
  }
}

TEST(LossAndGrads, FiniteDifferenceUnfrozen) {
  const auto signal = gen_fourier(1, 10);
  const auto xs = uniform_samples(48);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto r = gridlab::testing::check_gradients(gridlab::testing::gradient_test_model(seed), signal, xs, true);
    EXPECT_LT(r.worst_rel_error, 1e-4) << "seed " << seed << ": " << r.worst_where;
    EXPECT_GT(r.checked, 10 * r.skipped) << "seed " << seed;
  }
}

TEST(LossAndGrads, FiniteDifferenceVanilla) {
  const auto signal = gen_two_half(2);
  const auto xs = uniform_samples(48);
  const Model m = make_vanilla_model(2, 8, 5);
  const auto r = gridlab::testing::check_gradients(m, signal, xs, false);
  EXPECT_LT(r.worst_rel_error, 1e-4) << r.worst_where;
}

TEST(LossAndGrads, Errors) {
  const Model m = gridlab::testing::gradient_test_model(0);
  EXPECT_THROW(loss_and_grads(m, gen_fourier(0, 5), std::vector<double>{}), ConfigError);
  EXPECT_THROW(loss_and_grads(m, gen_fourier(0, 5), std::vector<double>{1.5}), DomainError);
  Model bad = m;
  bad.mlp.layers.back().bias(0) = 1e300;
  bad.mlp.layers.back().weight.setConstant(1e300);
  EXPECT_THROW(loss_and_grads(bad, gen_fourier(0, 5), uniform_samples(8)), DivergenceError);
}

TEST(AdamStep, ZeroGradientLeavesParameters) {
  Model p = gridlab::testing::gradient_test_model(1);
  const Model before = p;
  AdamState state(p);
  adam_step(p, zeros_like(p), state, TrainConfig{});
  EXPECT_TRUE(same_parameters(p, before));
  EXPECT_EQ(state.step, 1u);
}

TEST(AdamStep, FirstStepMovesBySignTimesLr) {
  Model p = gridlab::testing::gradient_test_model(2);
  const Model before = p;
  Model g = zeros_like(p);
  g.mlp.layers[0].weight(0, 0) = 3.0;
  g.mlp.layers[0].bias(0) = -0.02;
  AdamState state(p);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  adam_step(p, g, state, cfg);
  EXPECT_NEAR(p.mlp.layers[0].weight(0, 0) - before.mlp.layers[0].weight(0, 0), -0.01, 1e-9);
  EXPECT_NEAR(p.mlp.layers[0].bias(0) - before.mlp.layers[0].bias(0), 0.01, 1e-8);
}

TEST(AdamStep, DeterministicAndFrozenGrid) {
  Model a = gridlab::testing::gradient_test_model(3), b = a;
  const auto [loss, g] = loss_and_grads(a, gen_fourier(0, 5), uniform_samples(32));
  (void)loss;
  AdamState sa(a), sb(b);
  adam_step(a, g, sa, TrainConfig{}, false);
  adam_step(b, g, sb, TrainConfig{}, false);
  EXPECT_TRUE(same_parameters(a, b));
  EXPECT_EQ(a.grid->levels[0].features, gridlab::testing::gradient_test_model(3).grid->levels[0].features);
}

TEST(AdamStep, ShapeMismatch) {
  Model p = gridlab::testing::gradient_test_model(0);
  Model g = zeros_like(gridlab::testing::gradient_test_model(2));
  AdamState state(p);
  EXPECT_THROW(adam_step(p, g, state, TrainConfig{}), ShapeError);
}

TEST(TrainModel, ZeroTargetZeroModelStaysAtZero) {
  Model m{make_grid(GridConfig::single_level(4)), make_zero_mlp(1, 2, 4)};
  TrainConfig cfg;
  cfg.steps = 50;
  cfg.sample_grid = 64;
  const auto r = train_model(m, constant_signal(0.0), cfg);
  ASSERT_EQ(r.history.size(), 50u);
  for (double l : r.history) EXPECT_EQ(l, 0.0);
}

TEST(TrainModel, ConstantTargetConverges) {
  const Model m = make_model(GridConfig::single_level(8), 2, 16, InitMode::random, 4);
  TrainConfig cfg;
  cfg.steps = 2000;
  cfg.sample_grid = 256;
  const auto r = train_model(m, constant_signal(0.6), cfg);
  EXPECT_LT(evaluate_loss(r.model, constant_signal(0.6), 256), 1e-6);
}

TEST(TrainModel, BitIdenticalReruns) {
  const Model m = make_model(GridConfig::single_level(25), 2, 16, InitMode::random, 8);
  TrainConfig cfg;
  cfg.steps = 200;
  cfg.sample_grid = 256;
  const auto a = train_model(m, gen_fourier(1, 20), cfg);
  const auto b = train_model(m, gen_fourier(1, 20), cfg);
  EXPECT_TRUE(same_parameters(a.model, b.model));
  EXPECT_EQ(a.history, b.history);
}

TEST(TrainModel, MinibatchIsSeeded) {
  const Model m = make_model(GridConfig::single_level(25), 2, 16, InitMode::random, 8);
  TrainConfig cfg;
  cfg.steps = 100;
  cfg.sample_grid = 256;
  cfg.batch = 32;
  cfg.seed = 5;
  const auto a = train_model(m, gen_fourier(1, 20), cfg);
  const auto b = train_model(m, gen_fourier(1, 20), cfg);
  EXPECT_TRUE(same_parameters(a.model, b.model));
  cfg.seed = 6;
  EXPECT_FALSE(same_parameters(a.model, train_model(m, gen_fourier(1, 20), cfg).model));
}

TEST(TrainModel, FrozenGridNeverChanges) {
  const Model m = make_model(GridConfig::single_level(25), 2, 16, InitMode::random, 2);
  TrainConfig cfg;
  cfg.steps = 300;
  cfg.sample_grid = 256;
  cfg.freeze_grid = true;
  const auto r = train_model(m, gen_fourier(2, 20), cfg);
  EXPECT_EQ(r.model.grid->levels[0].features, m.grid->levels[0].features);
  EXPECT_NE(r.model.mlp.layers[0].weight, m.mlp.layers[0].weight);
}

TEST(TrainModel, LossTrendsDown) {
  const Model m = make_model(GridConfig::single_level(25), 4, 64, InitMode::random, 2);
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.sample_grid = 512;
  const auto r = train_model(m, gen_fourier(2, 30), cfg);
  const std::size_t w = r.history.size() / 10;
  const std::vector<double> head(r.history.begin(), r.history.begin() + w);
  const std::vector<double> tail(r.history.end() - w, r.history.end());
  EXPECT_LE(median(tail), median(head));
}

TEST(TrainModel, DivergenceReportsStep) {
  const Model m = make_model(GridConfig::single_level(8), 2, 16, InitMode::random, 2);
  TrainConfig cfg;
  cfg.steps = 100;
  cfg.sample_grid = 64;
  cfg.learning_rate = 1e300;
  try {
    train_model(m, gen_fourier(1, 5), cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.step(), 0u);
    EXPECT_LT(e.step(), 100u);
  }
}
