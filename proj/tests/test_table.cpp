#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>

#include "lindistill/svg.hpp"
#include "lindistill/table.hpp"
#include "test_util.hpp"

using namespace lindistill;

TEST_CASE("format_double round trips exactly") {
  const double values[] = {0.1,     1.0 / 3.0, 12345.678, -0.0,   1e300,
                           5e-300,  3.141592653589793,    -42.25, 0.0,
                           1e-17};
  for (double v : values) {
    const std::string s = format_double(v);
    const double back = std::strtod(s.c_str(), nullptr);
    CHECK(back == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  const std::string nan_s = format_double(std::nan(""));
  CHECK(nan_s == "nan");
}

TEST_CASE("table round trips through csv") {
  ResultTable t;
  t.columns = {"name", "value", "note"};
  t.append_row({"plain", "1.5", "ok"});
  t.append_row({"comma, inside", "-2", "quote \" inside"});
  t.append_row({"multi\nline", "0", ""});

  const std::string csv = t.to_csv();
  const ResultTable back = ResultTable::from_csv(csv);
  CHECK(back == t);
  CHECK(back.to_csv() == csv);
}

TEST_CASE("table rejects malformed input") {
  ResultTable t;
  t.columns = {"a", "b"};
  CHECK_THROWS_AS(t.append_row({"only one"}), std::invalid_argument);
  CHECK_THROWS_AS(ResultTable::from_csv("a,b\n1,2,3\n"), format_error);
  CHECK_THROWS_AS(ResultTable::from_csv(""), format_error);
}

TEST_CASE("atomic writes create directories and replace content") {
  testutil::TempDir tmp;
  const std::string path = tmp.file("nested/deep/out.csv");
  write_file_atomic(path, "first");
  CHECK(read_file(path) == "first");
  write_file_atomic(path, "second");
  CHECK(read_file(path) == "second");
  CHECK_THROWS_AS(read_file(tmp.file("missing.txt")), std::runtime_error);
}

TEST_CASE("chart renders balanced svg with one group per series") {
  Chart chart;
  chart.title = "risk <by> kappa & n";
  chart.x_label = "kappa";
  chart.y_label = "risk";
  Series a;
  a.label = "n=5";
  a.xs = {0.5, 1, 2, 4};
  a.ys = {0.3, 0.2, 0.1, 0.05};
  a.point_xs = {0.5, 0.5, 1.0};
  a.point_ys = {0.28, 0.33, 0.19};
  Series b;
  b.label = "n=20 <tight>";
  b.xs = {0.5, 1, 2, 4};
  b.ys = {0.2, 0.12, 0.06, 0.02};
  b.point_xs = {2.0, std::nan("")};
  b.point_ys = {0.07, 0.5};
  chart.series = {a, b};

  const std::string svg = chart.render();
  CHECK(svg.find("<svg") == 0);
  testutil::check_xml_balanced(svg);

  std::size_t groups = 0, from = 0;
  while ((from = svg.find("class=\"series\"", from)) != std::string::npos) {
    ++groups;
    ++from;
  }
  CHECK(groups == 2);
  CHECK(svg.find("&lt;tight&gt;") != std::string::npos);
  CHECK(svg.find("&amp;") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
}

TEST_CASE("chart tolerates empty and degenerate data") {
  Chart chart;
  Series s;
  s.label = "flat";
  s.xs = {1.0, 1.0};
  s.ys = {2.0, 2.0};
  chart.series = {s};
  const std::string svg = chart.render();
  testutil::check_xml_balanced(svg);

  Chart empty;
  testutil::check_xml_balanced(empty.render());

  Chart mismatched;
  Series bad;
  bad.xs = {1.0};
  mismatched.series = {bad};
  CHECK_THROWS_AS(mismatched.render(), std::invalid_argument);
}
