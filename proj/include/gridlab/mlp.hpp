#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gridlab/error.hpp"
#include "gridlab/rng.hpp"

namespace gridlab {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// A ReLU perceptron with an affine output layer. Every layer but the last is
// followed by ReLU; relu'(0) is taken as 0 everywhere in the library.
struct MlpParams {
  std::vector<DenseLayer> layers;

  Eigen::Index input_width() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  Eigen::Index output_width() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
  std::size_t hidden_layer_count() const { return layers.empty() ? 0 : layers.size() - 1; }

  void validate() const {
    if (layers.empty()) throw ShapeError("MLP has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      if (layer.weight.rows() != layer.bias.size())
        throw ShapeError("layer " + std::to_string(l) + ": bias length does not match weight rows");
      if (l > 0 && layer.weight.cols() != layers[l - 1].weight.rows())
        throw ShapeError("layer " + std::to_string(l) + ": input width does not match previous layer");
      if (!layer.weight.allFinite() || !layer.bias.allFinite())
        throw ShapeError("layer " + std::to_string(l) + ": non-finite parameter");
    }
  }

  /// Batched forward pass. `inputs` is input_width x n; returns output_width x n.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != input_width())
      throw ShapeError("MLP input width " + std::to_string(input_width()) + ", got " +
                       std::to_string(inputs.rows()));
    Eigen::MatrixXd h = inputs;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Eigen::MatrixXd z = layers[l].weight * h;
      z.colwise() += layers[l].bias;
      if (l + 1 < layers.size()) z = z.cwiseMax(0.0);
      h = std::move(z);
    }
    return h;
  }

  double forward_scalar(std::span<const double> input) const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(input.size()), 1);
    for (std::size_t i = 0; i < input.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = input[i];
    const auto y = forward(x);
    if (y.rows() != 1) throw ShapeError("MLP output is not scalar");
    return y(0, 0);
  }
};

/// Layer sizes input -> width (x hidden_layers) -> 1, fan-in uniform init.
inline MlpParams make_mlp(Eigen::Index input_width, std::size_t hidden_layers, Eigen::Index width,
                          std::uint64_t seed) {
  if (input_width < 1 || (hidden_layers > 0 && width < 1))
    throw ConfigError("MLP widths must be positive");
  SplitMix64 rng(seed);
  MlpParams mlp;
  Eigen::Index fan_in = input_width;
  for (std::size_t l = 0; l <= hidden_layers; ++l) {
    const Eigen::Index out = (l == hidden_layers) ? 1 : width;
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    DenseLayer layer{Eigen::MatrixXd(out, fan_in), Eigen::VectorXd(out)};
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
    for (Eigen::Index r = 0; r < out; ++r) layer.bias(r) = rng.uniform(-bound, bound);
    mlp.layers.push_back(std::move(layer));
    fan_in = out;
  }
  return mlp;
}

/// Same shapes as make_mlp, all parameters zero.
inline MlpParams make_zero_mlp(Eigen::Index input_width, std::size_t hidden_layers, Eigen::Index width) {
  MlpParams mlp = make_mlp(input_width, hidden_layers, width, 0);
  for (auto& layer : mlp.layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  return mlp;
}

}  // namespace gridlab
