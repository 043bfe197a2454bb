#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "gridlab/error.hpp"
#include "gridlab/field.hpp"
#include "gridlab/rng.hpp"
#include "gridlab/signals.hpp"

namespace gridlab {

struct TrainConfig {
  std::size_t steps = 10000;
  double learning_rate = 1e-3;
  std::size_t batch = 0;  // 0 = full batch
  std::size_t sample_grid = 2048;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool freeze_grid = false;

  void validate() const {
    if (steps < 1) throw ConfigError("training needs at least one step");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
      throw ConfigError("Adam betas must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
    if (sample_grid < 2) throw ConfigError("sample grid needs at least 2 points");
  }

  /// sample_grid must be at least twice the Nyquist rate (2B) of a Fourier target.
  void validate_for(const SignalSpec& signal) const {
    validate();
    if (signal.kind == SignalKind::fourier && sample_grid < 4 * signal.bandwidth)
      throw ConfigError("sample grid " + std::to_string(sample_grid) + " is below 2x Nyquist for bandwidth " +
                        std::to_string(signal.bandwidth));
  }
};

/// x_i = i / (n - 1), i = 0..n-1.
inline std::vector<double> uniform_samples(std::size_t n) {
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  xs.back() = 1.0;
  return xs;
}

/// A zero-valued model with the same shapes; used for gradients and Adam moments.
inline Model zeros_like(const Model& model) {
  Model out = model;
  if (out.grid)
    for (auto& level : out.grid->levels) level.features.setZero();
  for (auto& layer : out.mlp.layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  return out;
}

/// Flat views of every parameter tensor: grid levels first, then per layer
/// weight and bias. Two models with equal shapes yield parallel lists.
template <class M>
auto parameter_tensors(M& model, bool include_grid = true) {
  using Value = std::conditional_t<std::is_const_v<M>, const double, double>;
  std::vector<std::span<Value>> out;
  if (model.grid && include_grid)
    for (auto& level : model.grid->levels)
      out.emplace_back(level.features.data(), static_cast<std::size_t>(level.features.size()));
  for (auto& layer : model.mlp.layers) {
    out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  return out;
}

// Full-batch MSE objective over a fixed sample set. Interpolation stencils and
// targets are computed once; forward/backward reuse preallocated activations.
class FitProblem {
 public:
  FitProblem(const Model& model, const SignalSpec& signal, std::span<const double> xs) {
    if (xs.empty()) throw ConfigError("empty sample set");
    model.validate();
    xs_.assign(xs.begin(), xs.end());
    targets_.resize(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t s = 0; s < xs.size(); ++s) targets_(static_cast<Eigen::Index>(s)) = eval_signal(signal, xs[s]);
    if (model.grid) {
      if (model.grid->config.dims != 1) throw UnsupportedError("training is implemented for 1D grids only");
      stencils_.resize(model.grid->levels.size());
      for (std::size_t l = 0; l < model.grid->levels.size(); ++l)
        for (double x : xs) {
          if (!(x >= 0.0 && x <= 1.0)) throw DomainError("training sample outside [0, 1]");
          stencils_[l].push_back(locate(model.grid->levels[l], model.grid->config.table_size, x));
        }
    }
  }

  std::size_t size() const { return xs_.size(); }
  std::span<const double> samples() const { return xs_; }

  /// Mean squared error; when `grads` is non-null it receives dLoss/dparam for
  /// every MLP parameter and, if `grid_grads`, every grid feature.
  double evaluate(const Model& model, Model* grads, bool grid_grads = true) {
    const auto n = static_cast<Eigen::Index>(xs_.size());
    const auto& layers = model.mlp.layers;
    acts_.resize(layers.size() + 1);
    encode_batch(model, acts_[0]);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& z = acts_[l + 1];
      z.noalias() = layers[l].weight * acts_[l];
      z.colwise() += layers[l].bias;
      if (l + 1 < layers.size()) z = z.cwiseMax(0.0);
    }
    residual_ = acts_.back().row(0).transpose() - targets_;
    const double loss = residual_.squaredNorm() / static_cast<double>(n);
    if (!std::isfinite(loss)) throw DivergenceError("non-finite loss", 0);
    if (grads == nullptr) return loss;

    // delta holds dLoss/d(pre-activation) of layer l, one column per sample.
    delta_ = (2.0 / static_cast<double>(n)) * residual_.transpose();
    for (std::size_t l = layers.size(); l-- > 0;) {
      auto& g = grads->mlp.layers[l];
      g.weight.noalias() = delta_ * acts_[l].transpose();
      g.bias = delta_.rowwise().sum();
      if (l == 0 && !(model.grid && grid_grads)) break;
      upstream_.noalias() = layers[l].weight.transpose() * delta_;
      if (l > 0) upstream_ = (acts_[l].array() > 0.0).select(upstream_, 0.0);
      std::swap(delta_, upstream_);
    }
    if (model.grid && grid_grads) scatter_grid_grads(model, *grads);
    return loss;
  }

 private:
  void encode_batch(const Model& model, Eigen::MatrixXd& out) const {
    const auto n = static_cast<Eigen::Index>(xs_.size());
    if (!model.grid) {
      out = Eigen::Map<const Eigen::RowVectorXd>(xs_.data(), n);
      return;
    }
    const auto F = static_cast<Eigen::Index>(model.grid->config.features);
    out.resize(static_cast<Eigen::Index>(model.grid->output_width()), n);
    for (std::size_t l = 0; l < stencils_.size(); ++l) {
      const auto& table = model.grid->levels[l].features;
      const auto row = static_cast<Eigen::Index>(l) * F;
      for (Eigen::Index s = 0; s < n; ++s) {
        const CellStencil& st = stencils_[l][static_cast<std::size_t>(s)];
        for (Eigen::Index f = 0; f < F; ++f)
          out(row + f, s) = (1.0 - st.t) * table(f, static_cast<Eigen::Index>(st.left)) +
                            st.t * table(f, static_cast<Eigen::Index>(st.right));
      }
    }
  }

  // delta_ holds dLoss/d(encoded input) here.
  void scatter_grid_grads(const Model& model, Model& grads) const {
    const auto F = static_cast<Eigen::Index>(model.grid->config.features);
    for (std::size_t l = 0; l < stencils_.size(); ++l) {
      auto& table = grads.grid->levels[l].features;
      table.setZero();
      const auto row = static_cast<Eigen::Index>(l) * F;
      for (std::size_t s = 0; s < stencils_[l].size(); ++s) {
        const CellStencil& st = stencils_[l][s];
        const auto col = static_cast<Eigen::Index>(s);
        for (Eigen::Index f = 0; f < F; ++f) {
          table(f, static_cast<Eigen::Index>(st.left)) += (1.0 - st.t) * delta_(row + f, col);
          table(f, static_cast<Eigen::Index>(st.right)) += st.t * delta_(row + f, col);
        }
      }
    }
  }

  std::vector<double> xs_;
  Eigen::VectorXd targets_;
  std::vector<std::vector<CellStencil>> stencils_;
  std::vector<Eigen::MatrixXd> acts_;
  Eigen::VectorXd residual_;
  Eigen::MatrixXd delta_;
  Eigen::MatrixXd upstream_;
};

/// MSE and exact gradients of `model` against `signal` at sample points xs.
inline std::pair<double, Model> loss_and_grads(const Model& model, const SignalSpec& signal,
                                               std::span<const double> xs, bool grid_grads = true) {
  FitProblem problem(model, signal, xs);
  Model grads = zeros_like(model);
  const double loss = problem.evaluate(model, &grads, grid_grads);
  return {loss, std::move(grads)};
}

struct AdamState {
  Model m;
  Model v;
  std::size_t step = 0;

  explicit AdamState(const Model& shape) : m(zeros_like(shape)), v(zeros_like(shape)) {}
};

/// One bias-corrected Adam update, in place. Grid tensors are skipped when
/// `update_grid` is false.
inline void adam_step(Model& params, const Model& grads, AdamState& state, const TrainConfig& config,
                      bool update_grid = true) {
  auto p = parameter_tensors(params, update_grid);
  auto g = parameter_tensors(grads, update_grid);
  auto m = parameter_tensors(state.m, update_grid);
  auto v = parameter_tensors(state.v, update_grid);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
    throw ShapeError("Adam: parameter, gradient and state layouts differ");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i].size() != g[i].size() || p[i].size() != m[i].size() || p[i].size() != v[i].size())
      throw ShapeError("Adam: tensor " + std::to_string(i) + " size mismatch");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t k = 0; k < p[i].size(); ++k) {
      const double gk = g[i][k];
      m[i][k] = config.beta1 * m[i][k] + (1.0 - config.beta1) * gk;
      v[i][k] = config.beta2 * v[i][k] + (1.0 - config.beta2) * gk * gk;
      p[i][k] -= config.learning_rate * (m[i][k] / c1) / (std::sqrt(v[i][k] / c2) + config.epsilon);
    }
  }
}

struct TrainResult {
  Model model;
  std::vector<double> history;  // loss before the update of each step
};

/// Adam on the fixed uniform sample grid. Deterministic in (model, signal, config).
inline TrainResult train_model(Model model, const SignalSpec& signal, const TrainConfig& config) {
  config.validate_for(signal);
  const bool grid_updates = model.grid.has_value() && !config.freeze_grid;
  const std::vector<double> xs = uniform_samples(config.sample_grid);
  const bool full_batch = config.batch == 0 || config.batch >= xs.size();

  FitProblem full(model, signal, xs);
  Model grads = zeros_like(model);
  AdamState state(model);
  SplitMix64 rng(config.seed);
  std::vector<double> batch_xs(full_batch ? 0 : config.batch);

  TrainResult result{std::move(model), {}};
  result.history.reserve(config.steps);
  for (std::size_t step = 0; step < config.steps; ++step) {
    double loss = 0.0;
    try {
      if (full_batch) {
        loss = full.evaluate(result.model, &grads, grid_updates);
      } else {
        for (double& x : batch_xs) x = xs[rng.below(xs.size())];
        FitProblem batch(result.model, signal, batch_xs);
        loss = batch.evaluate(result.model, &grads, grid_updates);
      }
    } catch (const DivergenceError&) {
      throw DivergenceError("training diverged", step);
    }
    result.history.push_back(loss);
    adam_step(result.model, grads, state, config, grid_updates);
  }
  return result;
}

/// MSE of `model` on the uniform grid of `sample_grid` points.
inline double evaluate_loss(const Model& model, const SignalSpec& signal, std::size_t sample_grid) {
  const auto xs = uniform_samples(sample_grid);
  FitProblem problem(model, signal, xs);
  return problem.evaluate(model, nullptr);
}

}  // namespace gridlab
