#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridlab/error.hpp"
#include "gridlab/mlp.hpp"
#include "gridlab/pwl.hpp"
#include "gridlab/rng.hpp"

namespace gridlab {

// Hash encoding hyperparameters. The defaults are the single-level, scalar
// feature, dense grid used by every quantitative experiment here.
struct GridConfig {
  std::size_t levels = 1;               // L
  std::uint64_t table_size = 1u << 16;  // T, entries per level
  std::size_t features = 1;             // F
  std::size_t n_min = 16;               // coarsest resolution
  std::size_t n_max = 16;               // finest resolution
  bool hashing = false;
  std::size_t dims = 1;  // input dimension d

  /// Instant-NGP's published defaults (T chosen in the middle of 2^16..2^24).
  static GridConfig instant_ngp() {
    return GridConfig{.levels = 16, .table_size = 1u << 19, .features = 2, .n_min = 16, .n_max = 512, .hashing = true};
  }

  static GridConfig single_level(std::size_t resolution, std::size_t features = 1) {
    return GridConfig{.levels = 1, .table_size = 1u << 16, .features = features, .n_min = resolution, .n_max = resolution};
  }

  void validate() const {
    if (levels < 1) throw ConfigError("grid needs at least one level");
    if (features < 1) throw ConfigError("grid needs at least one feature per entry");
    if (dims < 1) throw ConfigError("grid input dimension must be >= 1");
    if (n_min < 1 || n_min > n_max) throw ConfigError("grid resolutions need 1 <= n_min <= n_max");
    if (table_size == 0 || (table_size & (table_size - 1)) != 0)
      throw ConfigError("table size T must be a power of two");
    if (levels == 1 && n_min != n_max) throw ConfigError("single-level grid needs n_min == n_max");
    for (std::size_t l = 0; l < levels; ++l)
      if (!hashing && dense_vertices(resolution(l)) > table_size)
        throw ConfigError("level " + std::to_string(l) + " needs more than T entries without hashing");
  }

  double growth_factor() const {
    if (levels <= 1) return 1.0;
    return std::exp((std::log(static_cast<double>(n_max)) - std::log(static_cast<double>(n_min))) /
                    static_cast<double>(levels - 1));
  }

  /// floor(n_min * b^l); the 1e-9 guard keeps the top level at n_max despite
  /// rounding in b^(L-1).
  std::size_t resolution(std::size_t level) const {
    if (level == 0) return n_min;
    return static_cast<std::size_t>(
        std::floor(static_cast<double>(n_min) * std::pow(growth_factor(), static_cast<double>(level)) + 1e-9));
  }

  std::uint64_t dense_vertices(std::size_t resolution) const {
    std::uint64_t count = 1;
    for (std::size_t d = 0; d < dims; ++d) {
      count *= resolution + 1;
      if (count > (std::uint64_t{1} << 40)) break;
    }
    return count;
  }

  std::size_t entries(std::size_t level) const {
    const std::uint64_t dense = dense_vertices(resolution(level));
    return static_cast<std::size_t>(hashing ? std::min<std::uint64_t>(dense, table_size) : dense);
  }

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct GridLevel {
  std::size_t resolution = 0;  // cells per axis
  Eigen::MatrixXd features;    // F x entries; column i is entry i
};

struct Grid {
  GridConfig config;
  std::vector<GridLevel> levels;

  std::size_t output_width() const { return config.levels * config.features; }
};

inline constexpr std::array<std::uint32_t, 3> kHashPrimes{1u, 2654435761u, 805459861u};

/// Table index of a grid vertex: dense row-major (axis 0 fastest) when the
/// level fits in T, otherwise XOR of coordinate*prime products modulo T.
inline std::size_t hash_index(const GridLevel& level, std::span<const std::uint64_t> coords, std::uint64_t table_size) {
  if (coords.empty() || coords.size() > kHashPrimes.size())
    throw IndexError("hash_index supports 1 to 3 coordinates");
  std::uint64_t dense = 1;
  for (std::uint64_t c : coords) {
    if (c > level.resolution) throw IndexError("vertex coordinate " + std::to_string(c) + " out of range");
    if (dense <= table_size) dense *= level.resolution + 1;
  }
  if (dense <= table_size) {
    std::uint64_t index = 0;
    std::uint64_t stride = 1;
    for (std::uint64_t c : coords) {
      index += c * stride;
      stride *= level.resolution + 1;
    }
    return static_cast<std::size_t>(index);
  }
  std::uint32_t h = 0;
  for (std::size_t i = 0; i < coords.size(); ++i) h ^= static_cast<std::uint32_t>(coords[i]) * kHashPrimes[i];
  return static_cast<std::size_t>(h % table_size);
}

/// All-zero feature tables for `config`.
inline Grid make_grid(const GridConfig& config) {
  config.validate();
  Grid grid{config, {}};
  for (std::size_t l = 0; l < config.levels; ++l) {
    const auto features = static_cast<Eigen::Index>(config.features);
    const auto entries = static_cast<Eigen::Index>(config.entries(l));
    grid.levels.push_back(GridLevel{config.resolution(l), Eigen::MatrixXd::Zero(features, entries)});
  }
  return grid;
}

// Interpolation stencil of x on one 1D level.
struct CellStencil {
  std::size_t left = 0;   // table index of vertex i
  std::size_t right = 0;  // table index of vertex i + 1
  double t = 0.0;         // weight of the right vertex
};

/// Cell i = min(floor(x N), N - 1) and t = x N - i; x = 1 lands in the last cell.
inline CellStencil locate(const GridLevel& level, std::uint64_t table_size, double x) {
  const double scaled = x * static_cast<double>(level.resolution);
  const auto cell = std::min(static_cast<std::uint64_t>(std::floor(scaled)), std::uint64_t{level.resolution - 1});
  const std::uint64_t left = cell;
  const std::uint64_t right = cell + 1;
  return CellStencil{hash_index(level, std::span(&left, 1), table_size),
                     hash_index(level, std::span(&right, 1), table_size), scaled - static_cast<double>(cell)};
}

/// Concatenated per-level interpolated features, length L*F.
inline Eigen::VectorXd encode(const Grid& grid, double x) {
  if (grid.config.dims != 1) throw UnsupportedError("encode is implemented for 1D inputs only");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("encode input outside [0, 1]: x=" + std::to_string(x));
  const auto F = static_cast<Eigen::Index>(grid.config.features);
  Eigen::VectorXd out(static_cast<Eigen::Index>(grid.output_width()));
  for (std::size_t l = 0; l < grid.levels.size(); ++l) {
    const auto& level = grid.levels[l];
    const CellStencil s = locate(level, grid.config.table_size, x);
    out.segment(static_cast<Eigen::Index>(l) * F, F) =
        (1.0 - s.t) * level.features.col(static_cast<Eigen::Index>(s.left)) +
        s.t * level.features.col(static_cast<Eigen::Index>(s.right));
  }
  return out;
}

// A neural field: optional feature grid followed by a ReLU MLP. Without a grid
// the MLP reads the raw coordinate (the vanilla baseline).
struct Model {
  std::optional<Grid> grid;
  MlpParams mlp;

  Eigen::Index encoded_width() const {
    return grid ? static_cast<Eigen::Index>(grid->output_width()) : Eigen::Index{1};
  }

  void validate() const {
    if (grid) grid->config.validate();
    mlp.validate();
    if (mlp.input_width() != encoded_width())
      throw ShapeError("MLP input width " + std::to_string(mlp.input_width()) + " does not match encoding width " +
                       std::to_string(encoded_width()));
    if (mlp.output_width() != 1) throw ShapeError("MLP output must be scalar");
  }
};

inline double model_forward(const Model& model, double x) {
  if (model.mlp.input_width() != model.encoded_width())
    throw ShapeError("MLP input width does not match encoding width");
  if (!model.grid) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("model input outside [0, 1]");
    return model.mlp.forward_scalar(std::span(&x, 1));
  }
  const Eigen::VectorXd features = encode(*model.grid, x);
  return model.mlp.forward_scalar(std::span(features.data(), static_cast<std::size_t>(features.size())));
}

/// The level as a function of x: breakpoint i/N carries vertex i's feature.
inline PiecewiseLinear grid_to_pwl(const GridLevel& level, std::uint64_t table_size) {
  if (level.features.rows() != 1) throw UnsupportedError("grid_to_pwl requires F = 1");
  const std::size_t n = level.resolution;
  std::vector<double> xs(n + 1);
  std::vector<double> ys(n + 1);
  for (std::uint64_t i = 0; i <= n; ++i) {
    xs[i] = static_cast<double>(i) / static_cast<double>(n);
    ys[i] = level.features(0, static_cast<Eigen::Index>(hash_index(level, std::span(&i, 1), table_size)));
  }
  return PiecewiseLinear(std::move(xs), std::move(ys));
}

inline PiecewiseLinear grid_to_pwl(const Grid& grid) {
  if (grid.levels.size() != 1 || grid.config.dims != 1)
    throw UnsupportedError("grid_to_pwl requires a single-level 1D grid");
  return grid_to_pwl(grid.levels.front(), grid.config.table_size);
}

enum class InitMode { random, ordered };

inline std::string_view to_string(InitMode mode) { return mode == InitMode::random ? "random" : "ordered"; }

inline constexpr double kGridInitRange = 1e-4;

/// random: features uniform(-1e-4, 1e-4); ordered: 1D scalar features i/N, an
/// identity-like map with no flips.
inline void init_grid(Grid& grid, InitMode mode, std::uint64_t seed) {
  if (mode == InitMode::ordered) {
    if (grid.config.features != 1 || grid.config.dims != 1)
      throw UnsupportedError("ordered initialization requires F = 1 and 1D input");
    for (auto& level : grid.levels) {
      const auto n = static_cast<Eigen::Index>(level.resolution);
      if (level.features.cols() != n + 1) throw UnsupportedError("ordered initialization requires a dense level");
      for (Eigen::Index i = 0; i <= n; ++i) level.features(0, i) = static_cast<double>(i) / static_cast<double>(n);
    }
    return;
  }
  SplitMix64 rng(seed);
  for (auto& level : grid.levels)
    for (Eigen::Index e = 0; e < level.features.cols(); ++e)
      for (Eigen::Index f = 0; f < level.features.rows(); ++f)
        level.features(f, e) = rng.uniform(-kGridInitRange, kGridInitRange);
}

/// Grid + MLP with both parts seeded from `seed`.
inline Model make_model(const GridConfig& config, std::size_t hidden_layers, Eigen::Index width, InitMode mode,
                        std::uint64_t seed) {
  Grid grid = make_grid(config);
  init_grid(grid, mode, derive_seed(seed, 0));
  const auto in = static_cast<Eigen::Index>(grid.output_width());
  return Model{std::move(grid), make_mlp(in, hidden_layers, width, derive_seed(seed, 1))};
}

inline Model make_vanilla_model(std::size_t hidden_layers, Eigen::Index width, std::uint64_t seed) {
  return Model{std::nullopt, make_mlp(1, hidden_layers, width, derive_seed(seed, 1))};
}

}  // namespace gridlab
