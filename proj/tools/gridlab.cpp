// gridlab command line: experiment runners plus checkpoint analysis and plotting.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gridlab/gridlab.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  std::vector<std::string> overrides;
};

gridlab::ExperimentConfig resolve(const GlobalOptions& g, gridlab::Experiment e) {
  gridlab::KeyValueConfig kv = g.config_path.empty() ? gridlab::KeyValueConfig{} : gridlab::KeyValueConfig::load(g.config_path);
  for (const auto& item : g.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw gridlab::ConfigError("--set expects key=value, got '" + item + "'");
    kv.set(item.substr(0, eq), item.substr(eq + 1));
  }
  if (g.seed) kv.set("master_seed", std::to_string(*g.seed));
  if (g.out) kv.set("output_dir", *g.out);
  if (g.workers) kv.set("workers", std::to_string(*g.workers));
  return gridlab::ExperimentConfig::from_kv(kv, e);
}

void print_report(const gridlab::SegmentReport& r) {
  std::cout << "n_flips       " << r.n_flips << '\n'
            << "n_scales      " << r.n_scales << '\n'
            << "n_flat        " << r.n_flat << '\n'
            << "n_mlp         " << r.n_mlp << '\n'
            << "n_prediction  " << r.n_prediction << '\n'
            << "n_res         " << r.n_res << '\n'
            << "final_loss    " << gridlab::csv_number(r.final_loss) << '\n'
            << "bound_ok      " << (r.bound_ok ? "true" : "false") << '\n';
}

int run_sweep(const GlobalOptions& g, gridlab::Experiment e) {
  const auto cfg = resolve(g, e);
  gridlab::SweepResult result;
  switch (e) {
    case gridlab::Experiment::scale_sweep: result = gridlab::run_scale_sweep(cfg); break;
    case gridlab::Experiment::bandwidth_sweep: result = gridlab::run_bandwidth_sweep(cfg); break;
    default: result = gridlab::run_relu_baseline(cfg); break;
  }
  gridlab::write_sweep_outputs(result, cfg);
  std::size_t violations = 0;
  for (const auto& row : result.rows) violations += !row.report.bound_ok;
  std::cout << result.rows.size() << " rows written to "
            << (std::filesystem::path(cfg.output_dir) / (gridlab::to_string(e) + ".csv")).string() << '\n';
  if (violations) std::cerr << "warning: " << violations << " rows violate the segment bound\n";
  return 0;
}

int run_overlap(const GlobalOptions& g) {
  const auto cfg = resolve(g, gridlab::Experiment::overlap_mc);
  const auto summary = gridlab::run_overlap_mc(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  const auto path = (std::filesystem::path(cfg.output_dir) / "overlap_mc.csv").string();
  gridlab::emit_csv(gridlab::to_csv_table(summary, cfg), path);
  std::cout << summary.paths_with_overlap << " of " << summary.trials << " paths overlap (frequency "
            << gridlab::csv_number(summary.frequency()) << "), written to " << path << '\n';
  return 0;
}

int run_fit(const GlobalOptions& g) {
  const auto cfg = resolve(g, gridlab::Experiment::fit);
  const auto fit = gridlab::run_fit(cfg);
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  gridlab::save_checkpoint((dir / "model.ckpt").string(), fit.checkpoint);
  if (!fit.history.empty()) gridlab::emit_csv(gridlab::loss_history_table(fit.history), (dir / "loss.csv").string());
  if (fit.diverged_at) {
    std::cerr << "training diverged at step " << *fit.diverged_at << '\n';
    return 3;
  }
  print_report(fit.report);
  std::cout << "checkpoint    " << (dir / "model.ckpt").string() << '\n';
  return 0;
}

int run_analyze(const std::string& path, bool breakpoints) {
  const auto ckpt = gridlab::load_checkpoint(path);
  if (!ckpt.signal) throw gridlab::ConfigError("checkpoint has no target signal record; cannot report loss");
  const std::size_t samples = ckpt.sample_grid ? ckpt.sample_grid : gridlab::TrainConfig{}.sample_grid;
  const auto report = ckpt.model.grid ? gridlab::measure_model(ckpt.model, *ckpt.signal, samples)
                                      : gridlab::measure_vanilla(ckpt.model, *ckpt.signal, samples);
  print_report(report);
  if (breakpoints) {
    gridlab::PiecewiseLinear prediction = [&] {
      if (!ckpt.model.grid) return gridlab::mlp_to_pwl(ckpt.model.mlp, 0.0, 1.0);
      const auto grid_fn = gridlab::grid_to_pwl(*ckpt.model.grid);
      const auto [lo, hi] = grid_fn.range();
      if (!(hi > lo)) return gridlab::PiecewiseLinear({0.0, 1.0}, {gridlab::model_forward(ckpt.model, 0.0),
                                                                    gridlab::model_forward(ckpt.model, 1.0)});
      return gridlab::compose_grid_mlp(grid_fn, gridlab::mlp_to_pwl(ckpt.model.mlp, lo, hi));
    }();
    std::cout << "x,y\n";
    for (std::size_t i = 0; i < prediction.size(); ++i)
      std::cout << gridlab::csv_number(prediction.breakpoints()[i]) << ',' << gridlab::csv_number(prediction.values()[i])
                << '\n';
  }
  return 0;
}

int run_plot(const std::string& csv_path, std::string x, const std::string& y, const std::string& group,
             std::string output) {
  const auto table = gridlab::load_csv(csv_path);
  if (table.rows.empty()) throw gridlab::EmptyDataError(csv_path + " has no rows");
  if (x.empty()) {
    for (const char* candidate : {"bandwidth", "center_value", "step"})
      for (const auto& h : table.header)
        if (x.empty() && h == candidate) x = candidate;
    if (x.empty()) throw gridlab::ConfigError("cannot infer x column; pass --x");
  }
  if (output.empty()) output = std::filesystem::path(csv_path).replace_extension(".svg").string();
  gridlab::render_svg(gridlab::median_series(table, x, y, group), output, {y + " vs " + x, x, y});
  std::cout << "wrote " << output << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Piecewise-linear analysis of grid-based neural fields"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Key/value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--workers", g.workers, "Parallel runs")->check(CLI::PositiveNumber);
  app.add_option("--set", g.overrides, "Override a config key (key=value), repeatable");

  auto* fit = app.add_subcommand("fit", "Train one model and save a checkpoint");
  auto* scale = app.add_subcommand("sweep-scale", "Center-value sweep on a frozen resolution-2 grid");
  auto* bandwidth = app.add_subcommand("sweep-bandwidth", "Grid + MLP segment counts across signal bandwidths");
  auto* baseline = app.add_subcommand("baseline-mlp", "Vanilla ReLU MLP segment counts across bandwidths");
  auto* overlap = app.add_subcommand("overlap-mc", "Monte Carlo estimate of F = 2 feature path overlaps");

  std::string ckpt_path;
  bool breakpoints = false;
  auto* analyze = app.add_subcommand("analyze", "Segment report for a saved checkpoint");
  analyze->add_option("checkpoint", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  analyze->add_flag("--breakpoints", breakpoints, "Also print the prediction breakpoints as x,y");

  std::string csv_path, plot_x, plot_y = "n_prediction", plot_group, plot_output;
  auto* plot = app.add_subcommand("plot", "Render medians from a result CSV as an SVG line chart");
  plot->add_option("csv", csv_path, "Result CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("--x", plot_x, "x column (default: bandwidth, center_value or step)");
  plot->add_option("--y", plot_y, "y column")->capture_default_str();
  plot->add_option("--group", plot_group, "Column that splits rows into series");
  plot->add_option("-o,--output", plot_output, "SVG path (default: next to the CSV)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return run_fit(g);
    if (*scale) return run_sweep(g, gridlab::Experiment::scale_sweep);
    if (*bandwidth) return run_sweep(g, gridlab::Experiment::bandwidth_sweep);
    if (*baseline) return run_sweep(g, gridlab::Experiment::relu_baseline);
    if (*overlap) return run_overlap(g);
    if (*analyze) return run_analyze(ckpt_path, breakpoints);
    if (*plot) {
      if (plot_y == "loss" && plot_x.empty()) plot_x = "step";
      return run_plot(csv_path, plot_x, plot_y, plot_group, plot_output);
    }
  } catch (const gridlab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
