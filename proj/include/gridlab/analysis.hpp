#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gridlab/error.hpp"
#include "gridlab/field.hpp"
#include "gridlab/pwl.hpp"
#include "gridlab/signals.hpp"
#include "gridlab/train.hpp"

namespace gridlab {

/// Feature differences at or below this magnitude make a vertex "flat".
inline constexpr double kFlatTol = 1e-7;
/// Collinearity tolerance of the feature-path overlap test.
inline constexpr double kCollinearTol = 1e-12;

struct VertexCounts {
  std::size_t flips = 0;
  std::size_t scales = 0;
  std::size_t flats = 0;

  friend bool operator==(const VertexCounts&, const VertexCounts&) = default;
};

/// Classifies every interior vertex of a grid function by its neighbouring
/// feature differences: opposite signs flip the domain, equal signs scale it,
/// a (near) zero difference is flat.
inline VertexCounts classify_vertices(const PiecewiseLinear& grid_fn, double tol = kFlatTol) {
  if (grid_fn.size() < 3) throw TooCoarseError("vertex classification needs at least 3 breakpoints");
  if (tol < 0.0) throw ConfigError("flat tolerance must be >= 0");
  const auto v = grid_fn.values();
  VertexCounts counts;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    const double left = v[i] - v[i - 1];
    const double right = v[i + 1] - v[i];
    if (std::abs(left) <= tol || std::abs(right) <= tol)
      ++counts.flats;
    else if (left * right < 0.0)
      ++counts.flips;
    else
      ++counts.scales;
  }
  return counts;
}

struct SegmentReport {
  std::size_t n_flips = 0;
  std::size_t n_scales = 0;
  std::size_t n_flat = 0;
  std::size_t n_mlp = 0;
  std::size_t n_prediction = 0;
  std::size_t n_res = 0;
  double final_loss = 0.0;
  bool bound_ok = false;
};

inline bool segment_bound_holds(std::size_t n_prediction, std::size_t n_res, std::size_t n_mlp) {
  return n_prediction <= n_res * std::max<std::size_t>(n_mlp, 1);
}

/// Exact segment counts of a single-level, scalar-feature model.
///
/// N_mlp is counted over [min feature, max feature], the part of the MLP
/// domain the grid actually reaches. A constant grid reaches a single point,
/// giving N_mlp = 0 and a constant prediction.
inline SegmentReport measure_model(const Model& model, const SignalSpec& signal, std::size_t sample_grid) {
  if (!model.grid || model.grid->levels.size() != 1 || model.grid->config.features != 1)
    throw UnsupportedError("measure_model requires a single-level grid with F = 1");
  model.validate();
  const PiecewiseLinear grid_fn = grid_to_pwl(*model.grid);
  const VertexCounts vertices = classify_vertices(grid_fn);

  SegmentReport report;
  report.n_flips = vertices.flips;
  report.n_scales = vertices.scales;
  report.n_flat = vertices.flats;
  report.n_res = model.grid->levels.front().resolution;
  const auto [lo, hi] = grid_fn.range();
  if (hi > lo) {
    const PiecewiseLinear mlp_fn = mlp_to_pwl(model.mlp, lo, hi);
    report.n_mlp = count_segments(mlp_fn);
    report.n_prediction = count_segments(compose_grid_mlp(grid_fn, mlp_fn));
  } else {
    report.n_mlp = 0;
    report.n_prediction = 1;
  }
  report.final_loss = evaluate_loss(model, signal, sample_grid);
  report.bound_ok = segment_bound_holds(report.n_prediction, report.n_res, report.n_mlp);
  return report;
}

/// Vanilla MLP on raw x: the identity input map is a one-cell grid, so
/// n_res = 1 and prediction segments equal MLP segments.
inline SegmentReport measure_vanilla(const Model& model, const SignalSpec& signal, std::size_t sample_grid) {
  if (model.grid) throw UnsupportedError("measure_vanilla expects a model without a grid");
  SegmentReport report;
  report.n_res = 1;
  report.n_mlp = count_segments(mlp_to_pwl(model.mlp, 0.0, 1.0));
  report.n_prediction = report.n_mlp;
  report.final_loss = evaluate_loss(model, signal, sample_grid);
  report.bound_ok = segment_bound_holds(report.n_prediction, report.n_res, report.n_mlp);
  return report;
}

using Point2 = std::array<double, 2>;

namespace detail {

inline double cross(const Point2& a, const Point2& b) { return a[0] * b[1] - a[1] * b[0]; }
inline double dot(const Point2& a, const Point2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline Point2 sub(const Point2& a, const Point2& b) { return {a[0] - b[0], a[1] - b[1]}; }

// True when segments pq and rs share a piece of positive length.
inline bool overlap_positive_length(const Point2& p, const Point2& q, const Point2& r, const Point2& s) {
  const Point2 d = sub(q, p);
  const Point2 e = sub(s, r);
  const double len_d = std::sqrt(dot(d, d));
  const double len_e = std::sqrt(dot(e, e));
  if (len_d <= kCollinearTol || len_e <= kCollinearTol) return false;
  // Parallel directions and r on the line through p, q.
  if (std::abs(cross(d, e)) > kCollinearTol * len_d * len_e) return false;
  if (std::abs(cross(d, sub(r, p))) > kCollinearTol * len_d * std::max(1.0, len_d)) return false;
  // Project r, s onto pq's parameter line and intersect with [0, |d|].
  const double t0 = dot(sub(r, p), d) / len_d;
  const double t1 = dot(sub(s, p), d) / len_d;
  const double lo = std::max(0.0, std::min(t0, t1));
  const double hi = std::min(len_d, std::max(t0, t1));
  return hi - lo > kCollinearTol * std::max(1.0, len_d);
}

}  // namespace detail

/// Number of unordered pairs of path segments that overlap in a set of
/// positive length. Crossings and shared endpoints do not count; adjacent
/// segments only count when the path folds back on itself.
inline std::size_t count_path_overlaps(std::span<const Point2> path) {
  if (path.size() < 3) throw TooCoarseError("feature path needs at least 3 points");
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i)
    for (std::size_t j = i + 1; j + 1 < path.size(); ++j)
      if (detail::overlap_positive_length(path[i], path[i + 1], path[j], path[j + 1])) ++count;
  return count;
}

/// Feature path of an F = 2 single-level grid: vertex features in x order.
inline std::vector<Point2> feature_path(const Grid& grid) {
  if (grid.config.features != 2 || grid.levels.size() != 1 || grid.config.dims != 1)
    throw UnsupportedError("feature paths are defined for single-level 1D grids with F = 2");
  const auto& level = grid.levels.front();
  std::vector<Point2> path;
  for (std::uint64_t i = 0; i <= level.resolution; ++i) {
    const auto col = static_cast<Eigen::Index>(hash_index(level, std::span(&i, 1), grid.config.table_size));
    path.push_back({level.features(0, col), level.features(1, col)});
  }
  return path;
}

inline std::size_t count_path_overlaps(const Grid& grid) { return count_path_overlaps(feature_path(grid)); }

}  // namespace gridlab
