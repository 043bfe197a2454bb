#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "gridlab/analysis.hpp"
#include "gridlab/checkpoint.hpp"
#include "gridlab/error.hpp"
#include "gridlab/field.hpp"
#include "gridlab/harness/config.hpp"
#include "gridlab/harness/csv.hpp"
#include "gridlab/harness/svg.hpp"
#include "gridlab/pwl.hpp"
#include "gridlab/rng.hpp"
#include "gridlab/signals.hpp"
#include "gridlab/train.hpp"

namespace gridlab {

inline constexpr const char* kToolVersion = "gridlab 0.1.0";
inline constexpr std::size_t kTurningPointGrid = 4096;

enum class Experiment { scale_sweep, bandwidth_sweep, relu_baseline, overlap_mc, fit };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::scale_sweep: return "scale_sweep";
    case Experiment::bandwidth_sweep: return "bandwidth_sweep";
    case Experiment::relu_baseline: return "relu_baseline";
    case Experiment::overlap_mc: return "overlap_mc";
    case Experiment::fit: return "fit";
  }
  return "unknown";
}

inline Experiment parse_experiment(const std::string& name) {
  for (auto e : {Experiment::scale_sweep, Experiment::bandwidth_sweep, Experiment::relu_baseline,
                 Experiment::overlap_mc, Experiment::fit})
    if (to_string(e) == name) return e;
  throw ConfigError("unknown experiment '" + name + "'");
}

struct ExperimentConfig {
  Experiment experiment = Experiment::bandwidth_sweep;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::string output_dir = "out";
  std::size_t workers = 1;
  bool record_runtime = false;
  bool write_histories = true;

  // model
  std::size_t resolution = 25;
  std::size_t features = 1;
  std::size_t hidden_layers = 4;
  std::size_t width = 64;

  TrainConfig train;

  // sweeps
  std::vector<std::uint64_t> bandwidths{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::vector<double> centers{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<InitMode> init_modes{InitMode::random, InitMode::ordered};
  std::size_t left_segments = 5;
  std::size_t right_segments = 15;

  // overlap Monte Carlo
  std::size_t trials = 1000;
  std::size_t path_length = 26;

  // fit
  std::string signal_kind = "fourier";
  std::size_t bandwidth = 50;
  InitMode init_mode = InitMode::random;
  bool vanilla = false;

  /// Per-experiment defaults. Training budgets are sized so the full
  /// bandwidth sweep plus its baseline finish within the runtime budget on a
  /// single desktop core.
  static ExperimentConfig defaults(Experiment e) {
    ExperimentConfig c;
    c.experiment = e;
    c.train.steps = 2000;
    c.train.sample_grid = 1024;
    switch (e) {
      case Experiment::scale_sweep:
        c.resolution = 2;
        c.hidden_layers = 2;
        c.width = 64;
        c.train.freeze_grid = true;
        break;
      case Experiment::fit:
        c.train = TrainConfig{};
        c.seeds = {0};
        break;
      default:
        break;
    }
    return c;
  }

  void validate() const {
    if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    train.validate();
    switch (experiment) {
      case Experiment::scale_sweep:
        if (resolution != 2 || features != 1) throw ConfigError("scale sweep needs a resolution-2 grid with F = 1");
        if (!train.freeze_grid) throw ConfigError("scale sweep trains the MLP on a frozen grid");
        if (centers.empty()) throw ConfigError("scale sweep needs center values");
        for (double c : centers)
          if (!(c > 0.0 && c < 1.0)) throw ConfigError("center values must lie in (0, 1)");
        break;
      case Experiment::bandwidth_sweep:
      case Experiment::relu_baseline:
        if (bandwidths.empty()) throw ConfigError("sweep needs bandwidths");
        if (features != 1) throw ConfigError("segment analysis needs F = 1");
        if (experiment == Experiment::bandwidth_sweep && init_modes.empty()) throw ConfigError("sweep needs init modes");
        break;
      case Experiment::overlap_mc:
        if (trials < 1) throw ConfigError("overlap Monte Carlo needs at least one trial");
        if (path_length < 3) throw ConfigError("feature paths need at least 3 points");
        break;
      case Experiment::fit:
        if (signal_kind != "fourier" && signal_kind != "two_half_pwl")
          throw ConfigError("signal.kind must be fourier or two_half_pwl");
        break;
    }
  }

  /// Reads `experiment` first, starts from its defaults, then applies every
  /// other key. Unknown keys are rejected.
  static ExperimentConfig from_kv(const KeyValueConfig& kv, std::optional<Experiment> forced = std::nullopt) {
    const Experiment e = forced ? *forced : parse_experiment(kv.get_string("experiment", "bandwidth_sweep"));
    if (forced && kv.contains("experiment") && kv.get_string("experiment", "") != to_string(*forced))
      throw ConfigError("config file is for experiment '" + kv.get_string("experiment", "") + "', not '" +
                        to_string(*forced) + "'");
    kv.get_string("experiment", "");
    ExperimentConfig c = defaults(e);
    c.master_seed = kv.get_u64("master_seed", c.master_seed);
    c.seeds = kv.get_u64_list("seeds", c.seeds);
    c.output_dir = kv.get_string("output_dir", c.output_dir);
    c.workers = kv.get_u64("workers", c.workers);
    c.record_runtime = kv.get_bool("record_runtime", c.record_runtime);
    c.write_histories = kv.get_bool("write_histories", c.write_histories);
    c.resolution = kv.get_u64("grid.resolution", c.resolution);
    c.features = kv.get_u64("grid.features", c.features);
    c.hidden_layers = kv.get_u64("mlp.hidden_layers", c.hidden_layers);
    c.width = kv.get_u64("mlp.width", c.width);
    c.train.steps = kv.get_u64("train.steps", c.train.steps);
    c.train.learning_rate = kv.get_double("train.learning_rate", c.train.learning_rate);
    c.train.batch = kv.get_u64("train.batch", c.train.batch);
    c.train.sample_grid = kv.get_u64("train.sample_grid", c.train.sample_grid);
    c.train.beta1 = kv.get_double("train.beta1", c.train.beta1);
    c.train.beta2 = kv.get_double("train.beta2", c.train.beta2);
    c.train.epsilon = kv.get_double("train.epsilon", c.train.epsilon);
    c.train.freeze_grid = kv.get_bool("train.freeze_grid", c.train.freeze_grid);
    c.bandwidths = kv.get_u64_list("sweep.bandwidths", c.bandwidths);
    c.centers = kv.get_double_list("sweep.centers", c.centers);
    if (kv.contains("sweep.init_modes")) {
      c.init_modes.clear();
      std::string modes = kv.get_string("sweep.init_modes", "");
      for (std::size_t start = 0; start <= modes.size();) {
        auto comma = modes.find(',', start);
        if (comma == std::string::npos) comma = modes.size();
        std::string item = modes.substr(start, comma - start);
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (!item.empty()) c.init_modes.push_back(parse_init_mode(item));
        start = comma + 1;
      }
    }
    c.left_segments = kv.get_u64("signal.left_segments", c.left_segments);
    c.right_segments = kv.get_u64("signal.right_segments", c.right_segments);
    c.signal_kind = kv.get_string("signal.kind", c.signal_kind);
    c.bandwidth = kv.get_u64("signal.bandwidth", c.bandwidth);
    c.init_mode = parse_init_mode(kv.get_string("grid.init", std::string(to_string(c.init_mode))));
    c.vanilla = kv.get_bool("mlp.vanilla", c.vanilla);
    c.trials = kv.get_u64("overlap.trials", c.trials);
    c.path_length = kv.get_u64("overlap.path_length", c.path_length);
    if (const auto unused = kv.unused_keys(); !unused.empty()) throw ConfigError("unknown config key '" + unused.front() + "'");
    c.validate();
    return c;
  }

  static InitMode parse_init_mode(const std::string& s) {
    if (s == "random") return InitMode::random;
    if (s == "ordered") return InitMode::ordered;
    throw ConfigError("unknown init mode '" + s + "'");
  }
};

struct SweepRow {
  Experiment experiment = Experiment::bandwidth_sweep;
  std::uint64_t seed = 0;
  double variable = 0.0;     // bandwidth or center value
  std::string init_mode;     // random / ordered / vanilla / frozen
  SegmentReport report;
  std::size_t signal_turning_points = 0;
  std::optional<double> runtime_s;
  std::optional<std::size_t> diverged_at;
  std::vector<double> history;
};

struct SweepResult {
  Experiment experiment = Experiment::bandwidth_sweep;
  std::vector<SweepRow> rows;
  std::vector<std::pair<std::string, std::string>> metadata;
};

/// Runs fn(i) for i in [0, count) on `workers` threads. Each index is claimed
/// once; the first exception is rethrown after all threads join.
template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i = next++; i < count && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < std::min(workers, count); ++w) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
}

namespace detail {

inline std::vector<std::pair<std::string, std::string>> common_metadata(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, std::string>> m;
  auto add = [&m](std::string k, std::string v) { m.emplace_back(std::move(k), std::move(v)); };
  std::string seeds;
  for (auto s : c.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  add("tool_version", kToolVersion);
  add("experiment", to_string(c.experiment));
  add("master_seed", std::to_string(c.master_seed));
  add("seeds", seeds);
  add("rng", "splitmix64; run stream = derive_seed(master_seed, run_index); model init = derive_seed(master_seed, seed)");
  add("slope_tol", csv_number(kSlopeTol));
  add("dedupe_tol", csv_number(kDedupeTol));
  add("flat_tol", csv_number(kFlatTol));
  add("collinear_tol", csv_number(kCollinearTol));
  add("grid_init_range", csv_number(kGridInitRange));
  add("grid", "levels=1 F=" + std::to_string(c.features) + " resolution=" + std::to_string(c.resolution) + " dense");
  add("mlp", std::to_string(c.hidden_layers) + "x" + std::to_string(c.width) +
                 " relu, affine output, init uniform(+-sqrt(1/fan_in))");
  add("train", "adam lr=" + csv_number(c.train.learning_rate) + " beta1=" + csv_number(c.train.beta1) +
                   " beta2=" + csv_number(c.train.beta2) + " eps=" + csv_number(c.train.epsilon) +
                   " steps=" + std::to_string(c.train.steps) + " sample_grid=" + std::to_string(c.train.sample_grid) +
                   " batch=" + (c.train.batch == 0 ? std::string("full") : std::to_string(c.train.batch)) +
                   " schedule=none loss=mse relu_grad_at_0=0" + (c.train.freeze_grid ? " frozen_grid" : ""));
  add("signal_distribution", "fourier coefficients uniform(-1,1), k=1..100, masked above bandwidth; max|f| on x=i/4096 normalized to 1");
  add("feature_dims_note", "F=1 for all segment analysis");
  add("runtime", c.record_runtime ? "measured wall-clock seconds" : "not recorded (NA) for byte-stable output");
  return m;
}

inline std::string run_id(const SweepRow& row) {
  std::string v = csv_number(row.variable);
  return to_string(row.experiment) + "_seed" + std::to_string(row.seed) + "_" + v + "_" + row.init_mode;
}

inline void sort_rows(std::vector<SweepRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.seed, a.variable, a.init_mode) < std::tie(b.seed, b.variable, b.init_mode);
  });
}

template <class Body>
SweepRow timed_row(const ExperimentConfig& c, SweepRow row, Body&& body) {
  const auto start = std::chrono::steady_clock::now();
  try {
    body(row);
  } catch (const DivergenceError& e) {
    row.diverged_at = e.step();
    row.report.final_loss = std::numeric_limits<double>::quiet_NaN();
  }
  if (c.record_runtime)
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

inline void add_divergence_metadata(SweepResult& result) {
  std::string diverged;
  for (const auto& row : result.rows)
    if (row.diverged_at) diverged += (diverged.empty() ? "" : ";") + run_id(row) + "@" + std::to_string(*row.diverged_at);
  result.metadata.emplace_back("diverged_runs", diverged.empty() ? "none" : diverged);
}

}  // namespace detail

/// Frozen grid [0, c, 1] at resolution 2, MLP trained on the two-half target
/// for every center value c.
inline SweepResult run_scale_sweep(const ExperimentConfig& c) {
  c.validate();
  struct Job {
    std::uint64_t seed;
    double center;
    std::size_t index;
  };
  std::vector<Job> jobs;
  for (auto seed : c.seeds)
    for (double center : c.centers) jobs.push_back({seed, center, jobs.size()});

  std::vector<SweepRow> rows(jobs.size());
  parallel_for(jobs.size(), c.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    SweepRow row{Experiment::scale_sweep, job.seed, job.center, "frozen", {}, 0, std::nullopt, std::nullopt, {}};
    rows[i] = detail::timed_row(c, std::move(row), [&](SweepRow& r) {
      const SignalSpec signal = gen_two_half(job.seed, c.left_segments, c.right_segments);
      Model model = make_model(GridConfig::single_level(2), c.hidden_layers, static_cast<Eigen::Index>(c.width),
                               InitMode::ordered, derive_seed(c.master_seed, job.seed));
      model.grid->levels.front().features << 0.0, job.center, 1.0;
      TrainConfig tc = c.train;
      tc.seed = derive_seed(c.master_seed, job.index);
      TrainResult trained = train_model(std::move(model), signal, tc);
      r.report = measure_model(trained.model, signal, tc.sample_grid);
      r.history = std::move(trained.history);
    });
  });

  SweepResult result{Experiment::scale_sweep, std::move(rows), detail::common_metadata(c)};
  detail::sort_rows(result.rows);
  result.metadata.emplace_back("left_segments", std::to_string(c.left_segments));
  result.metadata.emplace_back("right_segments", std::to_string(c.right_segments));
  result.metadata.emplace_back("left_right_segment_ratio",
                               csv_number(static_cast<double>(c.left_segments) / static_cast<double>(c.right_segments)));
  for (auto seed : c.seeds)
    result.metadata.emplace_back("signal_seed_" + std::to_string(seed),
                                 to_record(gen_two_half(seed, c.left_segments, c.right_segments)));
  detail::add_divergence_metadata(result);
  return result;
}

/// Single-level grid + MLP trained jointly for every (seed, bandwidth, init).
inline SweepResult run_bandwidth_sweep(const ExperimentConfig& c) {
  c.validate();
  struct Job {
    std::uint64_t seed;
    std::size_t bandwidth;
    InitMode mode;
    std::size_t index;
  };
  std::vector<Job> jobs;
  for (auto seed : c.seeds)
    for (auto bw : c.bandwidths)
      for (auto mode : c.init_modes) jobs.push_back({seed, static_cast<std::size_t>(bw), mode, jobs.size()});

  std::vector<SweepRow> rows(jobs.size());
  std::atomic<std::size_t> ordered_initial_flips{0};
  parallel_for(jobs.size(), c.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    SweepRow row{Experiment::bandwidth_sweep, job.seed, static_cast<double>(job.bandwidth),
                 std::string(to_string(job.mode)), {}, 0, std::nullopt, std::nullopt, {}};
    rows[i] = detail::timed_row(c, std::move(row), [&](SweepRow& r) {
      const SignalSpec signal = gen_fourier(job.seed, job.bandwidth);
      r.signal_turning_points = signal_turning_points(signal, kTurningPointGrid);
      Model model = make_model(GridConfig::single_level(c.resolution), c.hidden_layers,
                               static_cast<Eigen::Index>(c.width), job.mode, derive_seed(c.master_seed, job.seed));
      if (job.mode == InitMode::ordered) ordered_initial_flips += classify_vertices(grid_to_pwl(*model.grid)).flips;
      TrainConfig tc = c.train;
      tc.seed = derive_seed(c.master_seed, job.index);
      TrainResult trained = train_model(std::move(model), signal, tc);
      r.report = measure_model(trained.model, signal, tc.sample_grid);
      r.history = std::move(trained.history);
    });
  });

  SweepResult result{Experiment::bandwidth_sweep, std::move(rows), detail::common_metadata(c)};
  detail::sort_rows(result.rows);
  result.metadata.emplace_back("ordered_init_flips_at_step0", std::to_string(ordered_initial_flips.load()));
  result.metadata.emplace_back("turning_point_grid", std::to_string(kTurningPointGrid));
  for (auto seed : c.seeds)
    result.metadata.emplace_back("signal_seed_" + std::to_string(seed), to_record(gen_fourier(seed, kMaxFrequency)));
  detail::add_divergence_metadata(result);
  return result;
}

/// Vanilla MLP on raw x, same signals and architecture as the bandwidth sweep.
inline SweepResult run_relu_baseline(const ExperimentConfig& c) {
  c.validate();
  struct Job {
    std::uint64_t seed;
    std::size_t bandwidth;
    std::size_t index;
  };
  std::vector<Job> jobs;
  for (auto seed : c.seeds)
    for (auto bw : c.bandwidths) jobs.push_back({seed, static_cast<std::size_t>(bw), jobs.size()});

  std::vector<SweepRow> rows(jobs.size());
  parallel_for(jobs.size(), c.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    SweepRow row{Experiment::relu_baseline, job.seed, static_cast<double>(job.bandwidth), "vanilla", {}, 0,
                 std::nullopt, std::nullopt, {}};
    rows[i] = detail::timed_row(c, std::move(row), [&](SweepRow& r) {
      const SignalSpec signal = gen_fourier(job.seed, job.bandwidth);
      r.signal_turning_points = signal_turning_points(signal, kTurningPointGrid);
      Model model = make_vanilla_model(c.hidden_layers, static_cast<Eigen::Index>(c.width),
                                       derive_seed(c.master_seed, job.seed));
      TrainConfig tc = c.train;
      tc.seed = derive_seed(c.master_seed, job.index);
      TrainResult trained = train_model(std::move(model), signal, tc);
      r.report = measure_vanilla(trained.model, signal, tc.sample_grid);
      r.history = std::move(trained.history);
    });
  });

  SweepResult result{Experiment::relu_baseline, std::move(rows), detail::common_metadata(c)};
  detail::sort_rows(result.rows);
  result.metadata.emplace_back("vanilla_n_res", "1 (raw x is an identity map with a single cell)");
  for (auto seed : c.seeds)
    result.metadata.emplace_back("signal_seed_" + std::to_string(seed), to_record(gen_fourier(seed, kMaxFrequency)));
  detail::add_divergence_metadata(result);
  return result;
}

struct OverlapSummary {
  std::size_t trials = 0;
  std::size_t path_length = 0;
  std::size_t paths_with_overlap = 0;
  std::size_t total_overlaps = 0;

  double frequency() const { return static_cast<double>(paths_with_overlap) / static_cast<double>(trials); }
};

/// Random F = 2 feature paths: every vertex uniform in [-1, 1]^2.
inline std::vector<Point2> random_feature_path(std::uint64_t seed, std::size_t length) {
  SplitMix64 rng(seed);
  std::vector<Point2> path(length);
  for (auto& p : path) p = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return path;
}

inline OverlapSummary run_overlap_mc(const ExperimentConfig& c) {
  if (c.trials < 1) throw ConfigError("overlap Monte Carlo needs at least one trial");
  if (c.path_length < 3) throw ConfigError("feature paths need at least 3 points");
  std::vector<std::size_t> overlaps(c.trials);
  parallel_for(c.trials, c.workers, [&](std::size_t i) {
    overlaps[i] = count_path_overlaps(random_feature_path(derive_seed(c.master_seed, i), c.path_length));
  });
  OverlapSummary s{c.trials, c.path_length, 0, 0};
  for (auto n : overlaps) {
    s.paths_with_overlap += n > 0;
    s.total_overlaps += n;
  }
  return s;
}

struct FitResult {
  Checkpoint checkpoint;
  SegmentReport report;
  std::vector<double> history;
  std::optional<std::size_t> diverged_at;
};

/// One training run on the first configured seed's signal.
inline FitResult run_fit(const ExperimentConfig& c) {
  c.validate();
  const std::uint64_t seed = c.seeds.front();
  const SignalSpec signal = c.signal_kind == "fourier" ? gen_fourier(seed, c.bandwidth)
                                                       : gen_two_half(seed, c.left_segments, c.right_segments);
  const std::uint64_t init_seed = derive_seed(c.master_seed, seed);
  Model model = c.vanilla ? make_vanilla_model(c.hidden_layers, static_cast<Eigen::Index>(c.width), init_seed)
                          : make_model(GridConfig::single_level(c.resolution, c.features), c.hidden_layers,
                                       static_cast<Eigen::Index>(c.width), c.init_mode, init_seed);
  TrainConfig tc = c.train;
  tc.seed = derive_seed(c.master_seed, 0);
  FitResult out;
  try {
    TrainResult trained = train_model(model, signal, tc);
    model = std::move(trained.model);
    out.history = std::move(trained.history);
  } catch (const DivergenceError& e) {
    out.diverged_at = e.step();
  }
  if (!out.diverged_at && (c.vanilla || c.features == 1))
    out.report = c.vanilla ? measure_vanilla(model, signal, tc.sample_grid) : measure_model(model, signal, tc.sample_grid);
  else
    out.report.final_loss = out.diverged_at ? std::numeric_limits<double>::quiet_NaN()
                                            : evaluate_loss(model, signal, tc.sample_grid);
  out.checkpoint = Checkpoint{std::move(model), signal, tc.sample_grid};
  return out;
}

inline const std::vector<std::string>& segment_header(Experiment e) {
  static const std::vector<std::string> bandwidth{"experiment", "seed", "bandwidth", "init_mode", "n_flips",
                                                  "n_scales", "n_flat", "n_mlp", "n_prediction", "n_res",
                                                  "final_loss", "bound_ok", "signal_turning_points", "runtime_s"};
  static const std::vector<std::string> scale{"experiment", "seed", "center_value", "n_flips", "n_scales",
                                              "n_flat", "n_mlp", "n_prediction", "n_res", "final_loss",
                                              "bound_ok", "runtime_s"};
  return e == Experiment::scale_sweep ? scale : bandwidth;
}

inline CsvTable to_csv_table(const SweepResult& result) {
  CsvTable table;
  table.metadata = result.metadata;
  table.header = segment_header(result.experiment);
  for (const auto& r : result.rows) {
    const auto& rep = r.report;
    std::vector<std::string> cells{to_string(r.experiment), std::to_string(r.seed)};
    if (result.experiment == Experiment::scale_sweep) {
      cells.push_back(csv_number(r.variable));
    } else {
      cells.push_back(std::to_string(static_cast<std::size_t>(r.variable)));
      cells.push_back(r.init_mode);
    }
    for (std::size_t v : {rep.n_flips, rep.n_scales, rep.n_flat, rep.n_mlp, rep.n_prediction, rep.n_res})
      cells.push_back(std::to_string(v));
    cells.push_back(csv_number(rep.final_loss));
    cells.push_back(rep.bound_ok ? "true" : "false");
    if (result.experiment != Experiment::scale_sweep) cells.push_back(std::to_string(r.signal_turning_points));
    cells.push_back(r.runtime_s ? csv_number(*r.runtime_s) : "NA");
    table.rows.push_back(std::move(cells));
  }
  return table;
}

inline CsvTable to_csv_table(const OverlapSummary& s, const ExperimentConfig& c) {
  CsvTable table;
  table.metadata = detail::common_metadata(c);
  table.metadata.emplace_back("path_distribution", "vertices uniform in [-1,1]^2, one stream per trial");
  table.header = {"experiment", "master_seed", "trials", "path_length", "paths_with_overlap", "total_overlaps",
                  "overlap_frequency"};
  table.rows.push_back({"overlap_mc", std::to_string(c.master_seed), std::to_string(s.trials),
                        std::to_string(s.path_length), std::to_string(s.paths_with_overlap),
                        std::to_string(s.total_overlaps), csv_number(s.frequency())});
  return table;
}

inline CsvTable loss_history_table(const std::vector<double>& history) {
  CsvTable table;
  table.header = {"step", "loss"};
  for (std::size_t i = 0; i < history.size(); ++i) table.rows.push_back({std::to_string(i), csv_number(history[i])});
  return table;
}

/// Median of column `y` grouped by `group` (empty = one series) over `x`.
inline std::vector<Series> median_series(const CsvTable& table, const std::string& x, const std::string& y,
                                         const std::string& group) {
  const std::size_t xi = table.column(x);
  const std::size_t yi = table.column(y);
  const std::optional<std::size_t> gi = group.empty() ? std::nullopt : std::optional(table.column(group));
  std::map<std::string, std::map<double, std::vector<double>>> buckets;
  for (const auto& row : table.rows) {
    const std::string key = gi ? row[*gi] : y;
    buckets[key][detail::parse_double(row[xi])].push_back(row[yi] == "true"    ? 1.0
                                                          : row[yi] == "false" ? 0.0
                                                                               : detail::parse_double(row[yi]));
  }
  std::vector<Series> out;
  for (auto& [name, by_x] : buckets) {
    Series s{name, {}};
    for (auto& [xv, ys] : by_x) {
      std::sort(ys.begin(), ys.end());
      const std::size_t n = ys.size();
      s.points.emplace_back(xv, n % 2 ? ys[n / 2] : 0.5 * (ys[n / 2 - 1] + ys[n / 2]));
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Writes <out>/<experiment>.csv, per-run loss histories and summary charts.
inline void write_sweep_outputs(const SweepResult& result, const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());
  const std::string name = to_string(result.experiment);
  const CsvTable table = to_csv_table(result);
  emit_csv(table, (dir / (name + ".csv")).string());
  if (c.write_histories) {
    for (const auto& row : result.rows) {
      if (row.history.empty()) continue;
      const fs::path run_dir = dir / "runs" / detail::run_id(row);
      fs::create_directories(run_dir, ec);
      if (ec) throw IoError("cannot create " + run_dir.string());
      emit_csv(loss_history_table(row.history), (run_dir / "loss.csv").string());
    }
  }
  if (result.experiment == Experiment::scale_sweep) {
    render_svg(median_series(table, "center_value", "final_loss", "seed"), (dir / (name + "_loss.svg")).string(),
               {"Converged loss vs center vertex value", "center value", "final MSE"});
    return;
  }
  const std::string group = "init_mode";
  for (const char* y : {"n_flips", "n_mlp", "n_prediction"})
    render_svg(median_series(table, "bandwidth", y, group), (dir / (name + "_" + y + ".svg")).string(),
               {std::string("Median ") + y + " vs bandwidth", "bandwidth", y});
}

}  // namespace gridlab
