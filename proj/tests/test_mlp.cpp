#include <gtest/gtest.h>

#include <cmath>

#include "gridlab/mlp.hpp"

using namespace gridlab;

TEST(Mlp, ShapesFollowArchitecture) {
  const auto mlp = make_mlp(3, 4, 64, 1);
  ASSERT_EQ(mlp.layers.size(), 5u);
  EXPECT_EQ(mlp.input_width(), 3);
  EXPECT_EQ(mlp.output_width(), 1);
  EXPECT_EQ(mlp.hidden_layer_count(), 4u);
  EXPECT_EQ(mlp.layers[0].weight.rows(), 64);
  EXPECT_EQ(mlp.layers[4].weight.cols(), 64);
  EXPECT_NO_THROW(mlp.validate());
}

TEST(Mlp, InitRespectsFanInBound) {
  const auto mlp = make_mlp(1, 2, 16, 5);
  EXPECT_LE(mlp.layers[0].weight.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_LE(mlp.layers[1].weight.cwiseAbs().maxCoeff(), std::sqrt(1.0 / 16.0));
  EXPECT_LE(mlp.layers[2].bias.cwiseAbs().maxCoeff(), std::sqrt(1.0 / 16.0));
}

TEST(Mlp, SeededInitIsReproducible) {
  const auto a = make_mlp(1, 3, 8, 77);
  const auto b = make_mlp(1, 3, 8, 77);
  const auto c = make_mlp(1, 3, 8, 78);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    EXPECT_EQ(a.layers[l].weight, b.layers[l].weight);
    EXPECT_EQ(a.layers[l].bias, b.layers[l].bias);
  }
  EXPECT_NE(a.layers[0].weight, c.layers[0].weight);
}

TEST(Mlp, ForwardMatchesHandComputation) {
  MlpParams mlp;
  mlp.layers.push_back({Eigen::MatrixXd{{1.0}, {-1.0}}, Eigen::VectorXd{{-0.5, 0.25}}});
  mlp.layers.push_back({Eigen::MatrixXd{{2.0, 3.0}}, Eigen::VectorXd{{0.1}}});
  const double x = 0.8;
  const double expected = 2.0 * std::max(0.0, x - 0.5) + 3.0 * std::max(0.0, -x + 0.25) + 0.1;
  EXPECT_DOUBLE_EQ(mlp.forward_scalar(std::vector<double>{x}), expected);
  EXPECT_DOUBLE_EQ(mlp.forward_scalar(std::vector<double>{0.0}), 3.0 * 0.25 + 0.1);
}

TEST(Mlp, ZeroMlpIsZeroEverywhere) {
  const auto mlp = make_zero_mlp(2, 3, 8);
  EXPECT_EQ(mlp.forward(Eigen::MatrixXd::Random(2, 20)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Mlp, WidthMismatchIsShapeError) {
  const auto mlp = make_mlp(2, 1, 4, 0);
  EXPECT_THROW(mlp.forward(Eigen::MatrixXd::Zero(3, 1)), ShapeError);
}

TEST(Mlp, ValidateRejectsBrokenLayers) {
  auto mlp = make_mlp(1, 2, 4, 0);
  mlp.layers[1].bias.resize(3);
  EXPECT_THROW(mlp.validate(), ShapeError);
  mlp = make_mlp(1, 2, 4, 0);
  mlp.layers[1].weight(0, 0) = NAN;
  EXPECT_THROW(mlp.validate(), ShapeError);
  EXPECT_THROW(MlpParams{}.validate(), ShapeError);
  EXPECT_THROW(make_mlp(0, 1, 4, 0), ConfigError);
}
