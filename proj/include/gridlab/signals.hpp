#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gridlab/error.hpp"
#include "gridlab/pwl.hpp"
#include "gridlab/rng.hpp"

namespace gridlab {

inline constexpr std::size_t kMaxFrequency = 100;
/// Fourier targets are rescaled so max |f| over x = i/4096, i < 4096, is 1.
inline constexpr std::size_t kNormalizationPoints = 4096;
inline constexpr double kMinTurningSpacing = 0.01;

enum class SignalKind { fourier, two_half_pwl };

inline std::string_view to_string(SignalKind kind) {
  return kind == SignalKind::fourier ? "fourier" : "two_half_pwl";
}

struct SignalSpec {
  SignalKind kind = SignalKind::fourier;
  std::uint64_t seed = 0;

  // fourier: f(x) = scale * sum_k a_k sin(2 pi k x) + b_k cos(2 pi k x)
  std::size_t bandwidth = 0;
  std::array<double, kMaxFrequency> a{};
  std::array<double, kMaxFrequency> b{};
  double scale = 1.0;

  // two_half_pwl
  std::size_t left_segments = 0;
  std::size_t right_segments = 0;
  std::optional<PiecewiseLinear> pwl;

  friend bool operator==(const SignalSpec&, const SignalSpec&) = default;
};

namespace detail {

inline double fourier_sum(const SignalSpec& s, double x) {
  double sum = 0.0;
  for (std::size_t k = 0; k < s.bandwidth; ++k) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(k + 1) * x;
    sum += s.a[k] * std::sin(phase) + s.b[k] * std::cos(phase);
  }
  return sum;
}

}  // namespace detail

/// Fourier target from explicit coefficients (entries beyond `bandwidth` are
/// zeroed), normalized to unit peak on the normalization grid.
inline SignalSpec make_fourier(std::uint64_t seed, std::size_t bandwidth, std::array<double, kMaxFrequency> a,
                               std::array<double, kMaxFrequency> b) {
  if (bandwidth < 1 || bandwidth > kMaxFrequency)
    throw ConfigError("bandwidth must be in [1, 100], got " + std::to_string(bandwidth));
  SignalSpec s;
  s.kind = SignalKind::fourier;
  s.seed = seed;
  s.bandwidth = bandwidth;
  for (std::size_t k = bandwidth; k < kMaxFrequency; ++k) a[k] = b[k] = 0.0;
  s.a = a;
  s.b = b;
  double peak = 0.0;
  for (std::size_t i = 0; i < kNormalizationPoints; ++i)
    peak = std::max(peak, std::abs(detail::fourier_sum(s, static_cast<double>(i) / kNormalizationPoints)));
  if (!(peak > 0.0)) throw ConfigError("fourier signal is identically zero on the normalization grid");
  s.scale = 1.0 / peak;
  return s;
}

/// Draws a_1, b_1, ..., a_100, b_100 from uniform(-1, 1) and masks k > bandwidth,
/// so one seed yields nested signals across bandwidths.
inline SignalSpec gen_fourier(std::uint64_t seed, std::size_t bandwidth) {
  if (bandwidth < 1 || bandwidth > kMaxFrequency)
    throw ConfigError("bandwidth must be in [1, 100], got " + std::to_string(bandwidth));
  SplitMix64 rng(seed);
  std::array<double, kMaxFrequency> a{};
  std::array<double, kMaxFrequency> b{};
  for (std::size_t k = 0; k < kMaxFrequency; ++k) {
    a[k] = rng.uniform(-1.0, 1.0);
    b[k] = rng.uniform(-1.0, 1.0);
  }
  return make_fourier(seed, bandwidth, a, b);
}

/// Wraps an explicit continuous PWL on [0, 1] with a breakpoint at 0.5.
inline SignalSpec make_two_half(std::uint64_t seed, const PiecewiseLinear& f) {
  if (f.domain_min() != 0.0 || f.domain_max() != 1.0)
    throw ConfigError("two-half target must be defined on [0, 1]");
  const auto xs = f.breakpoints();
  const auto mid = std::find(xs.begin(), xs.end(), 0.5);
  if (mid == xs.end()) throw ConfigError("two-half target needs a breakpoint at exactly 0.5");
  SignalSpec s;
  s.kind = SignalKind::two_half_pwl;
  s.seed = seed;
  s.left_segments = static_cast<std::size_t>(mid - xs.begin());
  s.right_segments = f.piece_count() - s.left_segments;
  s.pwl = f;
  return s;
}

namespace detail {

// count-1 sorted interior positions in (lo, hi), every gap >= kMinTurningSpacing.
inline std::vector<double> spaced_positions(SplitMix64& rng, double lo, double hi, std::size_t count) {
  double slack = (hi - lo) - static_cast<double>(count) * kMinTurningSpacing;
  if (slack > -1e-12) slack = std::max(slack, 0.0);
  if (slack < 0.0)
    throw ConfigError(std::to_string(count) + " segments in a half force spacing below 0.01");
  std::vector<double> u(count - 1);
  for (double& v : u) v = rng.uniform(0.0, slack);
  std::sort(u.begin(), u.end());
  std::vector<double> pos(count - 1);
  for (std::size_t j = 0; j + 1 < count; ++j)
    pos[j] = lo + static_cast<double>(j + 1) * kMinTurningSpacing + u[j];
  return pos;
}

}  // namespace detail

/// Continuous PWL target with `left` pieces on [0, 0.5] and `right` on
/// [0.5, 1]. Values alternate in sign with magnitude uniform in [0.2, 1], so
/// every interior breakpoint (0.5 included) is a local extremum.
inline SignalSpec gen_two_half(std::uint64_t seed, std::size_t left = 5, std::size_t right = 15) {
  if (left < 1 || right < 1) throw ConfigError("two-half segment counts must be >= 1");
  SplitMix64 rng(seed);
  std::vector<double> xs{0.0};
  for (double x : detail::spaced_positions(rng, 0.0, 0.5, left)) xs.push_back(x);
  xs.push_back(0.5);
  for (double x : detail::spaced_positions(rng, 0.5, 1.0, right)) xs.push_back(x);
  xs.push_back(1.0);

  std::vector<double> ys(xs.size());
  double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  for (double& y : ys) {
    y = sign * rng.uniform(0.2, 1.0);
    sign = -sign;
  }
  return make_two_half(seed, PiecewiseLinear(std::move(xs), std::move(ys)));
}

inline double eval_signal(const SignalSpec& s, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("signal evaluated outside [0, 1]: x=" + std::to_string(x));
  if (s.kind == SignalKind::fourier) return s.scale * detail::fourier_sum(s, x);
  return s.pwl->eval(x);
}

/// Number of local extrema seen as sign changes of the first difference on a
/// uniform grid of `grid_points` samples over [0, 1].
inline std::size_t signal_turning_points(const SignalSpec& s, std::size_t grid_points) {
  if (grid_points < kNormalizationPoints)
    throw ResolutionError("turning-point grid needs >= 4096 points, got " + std::to_string(grid_points));
  const double step = 1.0 / static_cast<double>(grid_points - 1);
  int last_sign = 0;
  std::size_t count = 0;
  double prev = eval_signal(s, 0.0);
  for (std::size_t i = 1; i < grid_points; ++i) {
    const double cur = eval_signal(s, i + 1 == grid_points ? 1.0 : static_cast<double>(i) * step);
    const double d = cur - prev;
    prev = cur;
    const int sign = (d > 0.0) - (d < 0.0);
    if (sign == 0) continue;
    if (last_sign != 0 && sign != last_sign) ++count;
    last_sign = sign;
  }
  return count;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw MalformedError("not a number: '" + std::string(s) + "'");
  return v;
}

inline std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw MalformedError("not an unsigned integer: '" + std::string(s) + "'");
  return v;
}

template <class Range>
std::string join_doubles(const Range& values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += ',';
    out += format_double(v);
  }
  return out;
}

inline std::vector<double> split_doubles(std::string_view s) {
  std::vector<double> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    out.push_back(parse_double(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace detail

/// Single-line self-describing record: `key=value` fields separated by ';'.
/// Doubles use the shortest round-trip decimal form.
inline std::string to_record(const SignalSpec& s) {
  std::string out = "kind=" + std::string(to_string(s.kind)) + ";seed=" + std::to_string(s.seed);
  if (s.kind == SignalKind::fourier) {
    out += ";bandwidth=" + std::to_string(s.bandwidth) + ";scale=" + detail::format_double(s.scale);
    out += ";a=" + detail::join_doubles(std::span(s.a).first(s.bandwidth));
    out += ";b=" + detail::join_doubles(std::span(s.b).first(s.bandwidth));
  } else {
    out += ";left_segments=" + std::to_string(s.left_segments) +
           ";right_segments=" + std::to_string(s.right_segments);
    out += ";x=" + detail::join_doubles(s.pwl->breakpoints());
    out += ";y=" + detail::join_doubles(s.pwl->values());
  }
  return out;
}

inline SignalSpec parse_record(std::string_view record) {
  std::vector<std::pair<std::string, std::string>> fields;
  while (!record.empty()) {
    const auto semi = record.find(';');
    const auto field = record.substr(0, semi);
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) throw MalformedError("signal record field without '='");
    fields.emplace_back(std::string(field.substr(0, eq)), std::string(field.substr(eq + 1)));
    if (semi == std::string_view::npos) break;
    record.remove_prefix(semi + 1);
  }
  auto get = [&](std::string_view key) -> const std::string& {
    for (const auto& [k, v] : fields)
      if (k == key) return v;
    throw MalformedError("signal record missing '" + std::string(key) + "'");
  };
  const std::uint64_t seed = detail::parse_u64(get("seed"));
  const std::string& kind = get("kind");
  if (kind == "fourier") {
    const auto bandwidth = static_cast<std::size_t>(detail::parse_u64(get("bandwidth")));
    const auto a = detail::split_doubles(get("a"));
    const auto b = detail::split_doubles(get("b"));
    if (a.size() != bandwidth || b.size() != bandwidth)
      throw MalformedError("signal record coefficient count does not match bandwidth");
    SignalSpec s;
    s.kind = SignalKind::fourier;
    s.seed = seed;
    s.bandwidth = bandwidth;
    std::copy(a.begin(), a.end(), s.a.begin());
    std::copy(b.begin(), b.end(), s.b.begin());
    s.scale = detail::parse_double(get("scale"));
    return s;
  }
  if (kind == "two_half_pwl")
    return make_two_half(seed, PiecewiseLinear(detail::split_doubles(get("x")), detail::split_doubles(get("y"))));
  throw MalformedError("unknown signal kind '" + kind + "'");
}

}  // namespace gridlab
