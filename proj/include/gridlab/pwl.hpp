#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gridlab/error.hpp"
#include "gridlab/mlp.hpp"

namespace gridlab {

/// Slope tolerance used when merging pieces of exactly-constructed functions.
inline constexpr double kSlopeTol = 1e-9;
/// Breakpoints closer than this (in domain coordinates) are treated as one.
inline constexpr double kDedupeTol = 1e-12;

// A continuous piecewise-linear function on [breakpoints.front(),
// breakpoints.back()], stored as sorted breakpoints with the value at each.
class PiecewiseLinear {
 public:
  PiecewiseLinear(std::vector<double> breakpoints, std::vector<double> values)
      : xs_(std::move(breakpoints)), ys_(std::move(values)) {
    if (xs_.size() < 2) throw MalformedError("piecewise-linear function needs at least 2 breakpoints");
    if (xs_.size() != ys_.size()) throw MalformedError("breakpoint and value counts differ");
    for (std::size_t i = 0; i < xs_.size(); ++i) {
      if (!std::isfinite(xs_[i]) || !std::isfinite(ys_[i]))
        throw MalformedError("non-finite breakpoint or value");
      if (i > 0 && !(xs_[i] > xs_[i - 1])) throw MalformedError("breakpoints not strictly increasing");
    }
  }

  std::span<const double> breakpoints() const noexcept { return xs_; }
  std::span<const double> values() const noexcept { return ys_; }
  std::size_t size() const noexcept { return xs_.size(); }
  std::size_t piece_count() const noexcept { return xs_.size() - 1; }
  double domain_min() const noexcept { return xs_.front(); }
  double domain_max() const noexcept { return xs_.back(); }

  double slope(std::size_t piece) const { return (ys_[piece + 1] - ys_[piece]) / (xs_[piece + 1] - xs_[piece]); }

  /// Index of the piece containing x (the left piece at an interior breakpoint).
  std::size_t piece_of(double x) const {
    auto it = std::lower_bound(xs_.begin() + 1, xs_.end() - 1, x);
    return static_cast<std::size_t>(it - xs_.begin()) - 1;
  }

  double eval(double x) const {
    if (!(x >= xs_.front() && x <= xs_.back()))
      throw DomainError("x=" + std::to_string(x) + " outside [" + std::to_string(xs_.front()) + ", " +
                        std::to_string(xs_.back()) + "]");
    const std::size_t i = piece_of(x);
    if (x == xs_[i]) return ys_[i];
    if (x == xs_[i + 1]) return ys_[i + 1];
    const double t = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
    return ys_[i] + t * (ys_[i + 1] - ys_[i]);
  }

  std::pair<double, double> range() const {
    const auto [lo, hi] = std::minmax_element(ys_.begin(), ys_.end());
    return {*lo, *hi};
  }

  friend bool operator==(const PiecewiseLinear&, const PiecewiseLinear&) = default;

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
};

namespace detail {

// One merging pass: an interior breakpoint survives when the slope of the run
// ending at it differs from the slope of the next piece by more than tol.
inline bool merge_pass(std::vector<double>& xs, std::vector<double>& ys, double tol) {
  std::vector<double> kx{xs.front()};
  std::vector<double> ky{ys.front()};
  for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
    const double run = (ys[i] - ky.back()) / (xs[i] - kx.back());
    const double next = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    if (std::abs(run - next) > tol) {
      kx.push_back(xs[i]);
      ky.push_back(ys[i]);
    }
  }
  kx.push_back(xs.back());
  ky.push_back(ys.back());
  const bool changed = kx.size() != xs.size();
  xs = std::move(kx);
  ys = std::move(ky);
  return changed;
}

// Sorts and collapses points closer than kDedupeTol, keeping the first.
inline std::vector<double> sorted_unique(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs)
    if (out.empty() || x - out.back() > kDedupeTol) out.push_back(x);
  return out;
}

}  // namespace detail

/// Merges adjacent pieces whose slopes agree within slope_tol. Repeats until
/// nothing merges, so the result is a fixed point (idempotent).
inline PiecewiseLinear canonicalize(const PiecewiseLinear& f, double slope_tol = kSlopeTol) {
  std::vector<double> xs(f.breakpoints().begin(), f.breakpoints().end());
  std::vector<double> ys(f.values().begin(), f.values().end());
  while (xs.size() > 2 && detail::merge_pass(xs, ys, slope_tol)) {
  }
  return PiecewiseLinear(std::move(xs), std::move(ys));
}

inline std::size_t count_segments(const PiecewiseLinear& f) { return f.piece_count(); }

namespace detail {

// Activations after `depth` layers (ReLU applied to hidden layers) for scalar
// inputs xs; depth 0 returns the inputs themselves.
inline Eigen::MatrixXd prefix_forward(const MlpParams& mlp, std::size_t depth, const std::vector<double>& xs) {
  Eigen::MatrixXd h = Eigen::Map<const Eigen::RowVectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  for (std::size_t l = 0; l < depth; ++l) {
    Eigen::MatrixXd z = mlp.layers[l].weight * h;
    z.colwise() += mlp.layers[l].bias;
    h = (l + 1 < mlp.layers.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

// d(output)/dx at each input, with the activation pattern of the input point.
inline Eigen::RowVectorXd forward_slopes(const MlpParams& mlp, const std::vector<double>& xs) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd h = Eigen::Map<const Eigen::RowVectorXd>(xs.data(), n);
  Eigen::MatrixXd dh = Eigen::MatrixXd::Ones(1, n);
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    Eigen::MatrixXd z = mlp.layers[l].weight * h;
    z.colwise() += mlp.layers[l].bias;
    Eigen::MatrixXd dz = mlp.layers[l].weight * dh;
    if (l + 1 < mlp.layers.size()) {
      dz = (z.array() > 0.0).select(dz, 0.0);
      z = z.cwiseMax(0.0);
    }
    h = std::move(z);
    dh = std::move(dz);
  }
  return dh.row(0);
}

}  // namespace detail

/// Exact piecewise-linear form of a scalar ReLU MLP restricted to [lo, hi].
///
/// Layer by layer, every hidden unit's pre-activation is affine on each current
/// sub-interval, so its zero crossing is found in closed form from the values
/// at the sub-interval endpoints and inserted as a new breakpoint. After the
/// last hidden layer the network is affine on every sub-interval. Breakpoints
/// where the exact slopes on both sides agree (units whose switch does not
/// reach the output) are dropped before canonicalization.
inline PiecewiseLinear mlp_to_pwl(const MlpParams& mlp, double lo, double hi) {
  mlp.validate();
  if (mlp.input_width() != 1 || mlp.output_width() != 1)
    throw ShapeError("mlp_to_pwl requires a scalar-input scalar-output MLP");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw DomainError("mlp_to_pwl requires an interval of positive length");

  std::vector<double> xs{lo, hi};
  for (std::size_t l = 0; l < mlp.hidden_layer_count(); ++l) {
    Eigen::MatrixXd z = mlp.layers[l].weight * detail::prefix_forward(mlp, l, xs);
    z.colwise() += mlp.layers[l].bias;
    std::vector<double> crossings;
    for (Eigen::Index j = 0; j + 1 < static_cast<Eigen::Index>(xs.size()); ++j) {
      const double x0 = xs[static_cast<std::size_t>(j)];
      const double x1 = xs[static_cast<std::size_t>(j) + 1];
      for (Eigen::Index u = 0; u < z.rows(); ++u) {
        const double z0 = z(u, j);
        const double z1 = z(u, j + 1);
        if ((z0 > 0.0 && z1 < 0.0) || (z0 < 0.0 && z1 > 0.0)) {
          const double x = x0 + (x1 - x0) * (z0 / (z0 - z1));
          if (x - x0 > kDedupeTol && x1 - x > kDedupeTol) crossings.push_back(x);
        }
      }
    }
    if (crossings.empty()) continue;
    crossings.insert(crossings.end(), xs.begin(), xs.end());
    xs = detail::sorted_unique(std::move(crossings));
    xs.back() = hi;
  }

  std::vector<double> mids(xs.size() - 1);
  for (std::size_t j = 0; j + 1 < xs.size(); ++j) mids[j] = 0.5 * (xs[j] + xs[j + 1]);
  const Eigen::RowVectorXd slopes = detail::forward_slopes(mlp, mids);

  std::vector<double> kept{xs.front()};
  for (std::size_t j = 1; j + 1 < xs.size(); ++j)
    if (std::abs(slopes(static_cast<Eigen::Index>(j - 1)) - slopes(static_cast<Eigen::Index>(j))) > kSlopeTol)
      kept.push_back(xs[j]);
  kept.push_back(xs.back());

  const Eigen::MatrixXd out = mlp.forward(Eigen::Map<const Eigen::RowVectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size())));
  std::vector<double> ys(out.data(), out.data() + out.size());
  return canonicalize(PiecewiseLinear(std::move(kept), std::move(ys)));
}

/// Exact composition x -> mlp_fn(grid_fn(x)).
///
/// Every breakpoint of mlp_fn lying inside the image of a non-constant grid
/// piece is pulled back through that piece's inverse affine map; constant grid
/// pieces produce constant composite pieces.
inline PiecewiseLinear compose_grid_mlp(const PiecewiseLinear& grid_fn, const PiecewiseLinear& mlp_fn) {
  const auto [g_lo, g_hi] = grid_fn.range();
  if (g_lo < mlp_fn.domain_min() - kDedupeTol || g_hi > mlp_fn.domain_max() + kDedupeTol)
    throw DomainError("grid range [" + std::to_string(g_lo) + ", " + std::to_string(g_hi) +
                      "] not inside MLP domain [" + std::to_string(mlp_fn.domain_min()) + ", " +
                      std::to_string(mlp_fn.domain_max()) + "]");

  const auto gx = grid_fn.breakpoints();
  const auto gy = grid_fn.values();
  const auto mx = mlp_fn.breakpoints();
  std::vector<double> xs(gx.begin(), gx.end());
  for (std::size_t i = 0; i + 1 < gx.size(); ++i) {
    if (std::abs(grid_fn.slope(i)) <= kSlopeTol) continue;
    const double lo = std::min(gy[i], gy[i + 1]);
    const double hi = std::max(gy[i], gy[i + 1]);
    auto first = std::upper_bound(mx.begin(), mx.end(), lo);
    auto last = std::lower_bound(mx.begin(), mx.end(), hi);
    for (auto it = first; it < last; ++it) {
      const double x = gx[i] + (*it - gy[i]) / (gy[i + 1] - gy[i]) * (gx[i + 1] - gx[i]);
      if (x > gx[i] && x < gx[i + 1]) xs.push_back(x);
    }
  }
  xs = detail::sorted_unique(std::move(xs));
  xs.back() = gx.back();

  std::vector<double> ys(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double t = std::clamp(grid_fn.eval(xs[j]), mlp_fn.domain_min(), mlp_fn.domain_max());
    ys[j] = mlp_fn.eval(t);
  }
  return canonicalize(PiecewiseLinear(std::move(xs), std::move(ys)));
}

}  // namespace gridlab
