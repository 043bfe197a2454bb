#pragma once

// Text checkpoints. Line oriented, whitespace separated, doubles written in
// shortest round-trip form (so a reload is bit-exact and byte order never
// matters). Layout:
//
//   gridlab-checkpoint 1
//   grid <0|1>
//   grid_config <L> <T> <F> <n_min> <n_max> <hashing> <dims>   (if grid 1)
//   level <index> <resolution> <entries> <entries*F values, entry-major>
//   mlp <layer count>
//   layer <index> <rows> <cols> <rows*cols weights, row-major> <rows biases>
//   signal <record>                                             (optional)
//   sample_grid <n>                                             (optional)
//   end

#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "gridlab/error.hpp"
#include "gridlab/field.hpp"
#include "gridlab/signals.hpp"

namespace gridlab {

struct Checkpoint {
  Model model;
  std::optional<SignalSpec> signal;
  std::size_t sample_grid = 0;
};

inline std::string checkpoint_to_string(const Checkpoint& ckpt) {
  using detail::format_double;
  std::ostringstream out;
  out << "gridlab-checkpoint 1\n";
  const auto& model = ckpt.model;
  out << "grid " << (model.grid ? 1 : 0) << '\n';
  if (model.grid) {
    const auto& c = model.grid->config;
    out << "grid_config " << c.levels << ' ' << c.table_size << ' ' << c.features << ' ' << c.n_min << ' '
        << c.n_max << ' ' << (c.hashing ? 1 : 0) << ' ' << c.dims << '\n';
    for (std::size_t l = 0; l < model.grid->levels.size(); ++l) {
      const auto& level = model.grid->levels[l];
      out << "level " << l << ' ' << level.resolution << ' ' << level.features.cols();
      for (Eigen::Index e = 0; e < level.features.cols(); ++e)
        for (Eigen::Index f = 0; f < level.features.rows(); ++f) out << ' ' << format_double(level.features(f, e));
      out << '\n';
    }
  }
  out << "mlp " << model.mlp.layers.size() << '\n';
  for (std::size_t l = 0; l < model.mlp.layers.size(); ++l) {
    const auto& layer = model.mlp.layers[l];
    out << "layer " << l << ' ' << layer.weight.rows() << ' ' << layer.weight.cols();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) out << ' ' << format_double(layer.weight(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out << ' ' << format_double(layer.bias(r));
    out << '\n';
  }
  if (ckpt.signal) out << "signal " << to_record(*ckpt.signal) << '\n';
  if (ckpt.sample_grid > 0) out << "sample_grid " << ckpt.sample_grid << '\n';
  out << "end\n";
  return out.str();
}

namespace detail {

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw MalformedError("checkpoint truncated");
    return w;
  }

  void expect(const std::string& keyword) {
    const std::string w = word();
    if (w != keyword) throw MalformedError("checkpoint: expected '" + keyword + "', got '" + w + "'");
  }

  std::size_t size() { return static_cast<std::size_t>(parse_u64(word())); }
  double number() { return parse_double(word()); }

 private:
  std::istream& in_;
};

}  // namespace detail

inline Checkpoint checkpoint_from_string(const std::string& text) {
  std::istringstream in(text);
  detail::TokenReader rd(in);
  rd.expect("gridlab-checkpoint");
  if (rd.size() != 1) throw MalformedError("unsupported checkpoint version");
  Checkpoint ckpt;
  rd.expect("grid");
  if (rd.size() == 1) {
    rd.expect("grid_config");
    GridConfig c;
    c.levels = rd.size();
    c.table_size = rd.size();
    c.features = rd.size();
    c.n_min = rd.size();
    c.n_max = rd.size();
    c.hashing = rd.size() != 0;
    c.dims = rd.size();
    Grid grid = make_grid(c);
    for (std::size_t l = 0; l < c.levels; ++l) {
      rd.expect("level");
      if (rd.size() != l) throw MalformedError("checkpoint levels out of order");
      auto& level = grid.levels[l];
      if (rd.size() != level.resolution || rd.size() != static_cast<std::size_t>(level.features.cols()))
        throw MalformedError("checkpoint level shape does not match its grid config");
      for (Eigen::Index e = 0; e < level.features.cols(); ++e)
        for (Eigen::Index f = 0; f < level.features.rows(); ++f) level.features(f, e) = rd.number();
    }
    ckpt.model.grid = std::move(grid);
  }
  rd.expect("mlp");
  const std::size_t layer_count = rd.size();
  for (std::size_t l = 0; l < layer_count; ++l) {
    rd.expect("layer");
    if (rd.size() != l) throw MalformedError("checkpoint layers out of order");
    const auto rows = static_cast<Eigen::Index>(rd.size());
    const auto cols = static_cast<Eigen::Index>(rd.size());
    DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = rd.number();
    for (Eigen::Index r = 0; r < rows; ++r) layer.bias(r) = rd.number();
    ckpt.model.mlp.layers.push_back(std::move(layer));
  }
  for (std::string key = rd.word(); key != "end"; key = rd.word()) {
    if (key == "signal")
      ckpt.signal = parse_record(rd.word());
    else if (key == "sample_grid")
      ckpt.sample_grid = rd.size();
    else
      throw MalformedError("checkpoint: unknown section '" + key + "'");
  }
  ckpt.model.validate();
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << checkpoint_to_string(ckpt);
  if (!out) throw IoError("failed writing checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return checkpoint_from_string(text.str());
}

}  // namespace gridlab
