#include <gtest/gtest.h>

#include <cmath>

#include "gridlab/harness/svg.hpp"

using namespace gridlab;

namespace {

std::size_t occurrences(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Svg, TwoPointSeriesHasOnePolyline) {
  const auto svg = render_svg_string({{"s", {{0, 0}, {1, 1}}}}, {"t", "x", "y"});
  EXPECT_EQ(occurrences(svg, "<polyline"), 1u);
  EXPECT_NE(svg.find("version=\"1.1\""), std::string::npos);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Svg, OnePolylinePerSeriesAndLabelsEscaped) {
  const auto svg = render_svg_string({{"a<b", {{0, 1}, {1, 2}}}, {"c", {{0, 3}, {2, 1}}}}, {"x & y", "x", "y"});
  EXPECT_EQ(occurrences(svg, "<polyline"), 2u);
  EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
  EXPECT_NE(svg.find("x &amp; y"), std::string::npos);
}

TEST(Svg, Deterministic) {
  const std::vector<Series> s{{"a", {{0, 0.123456789}, {1, 1e-9}, {2, NAN}}}};
  EXPECT_EQ(render_svg_string(s), render_svg_string(s));
}

TEST(Svg, Errors) {
  EXPECT_THROW(render_svg_string({}), EmptyDataError);
  EXPECT_THROW(render_svg_string({{"a", {}}}), EmptyDataError);
  EXPECT_THROW(render_svg_string({{"a", {{NAN, 1}}}}), EmptyDataError);
  EXPECT_THROW(render_svg({{"a", {{0, 1}, {1, 1}}}}, "/nonexistent/dir/x.svg"), IoError);
}
