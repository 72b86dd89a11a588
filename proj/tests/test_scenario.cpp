#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "deform/scenario.hpp"

using namespace deform;

namespace {

// Cheap flat-pair scenario used by several cases below.
Scenario reduced_r1() {
  Scenario s;
  s.name = "reduced-r1";
  s.groupoid = "pair-r1";
  auto gauss = [](double sigma, double center, const char* nm) {
    FieldConfig c;
    c.xi_center = {center};
    c.xi_sigma = {sigma};
    c.x_window = Box{{-6.0}, {6.0}};
    c.x_margin = 1.5;
    c.instance = "pair-r1";
    c.name = nm;
    return c;
  };
  s.fields = {gauss(0.75, 0.2, "f"), gauss(0.6, -0.1, "g"),
              gauss(0.9, 0.05, "h")};
  s.t_grid = {0.0, 0.5};
  s.checks = {"associativity", "homomorphism", "support"};
  s.seed = 42;
  return s;
}

Scenario reduced_q1() {
  Scenario s;
  s.name = "reduced-q1";
  s.groupoid = "abelian-q1";
  auto gauss = [](double sigma, const char* nm) {
    FieldConfig c;
    c.base_dim = 0;
    c.xi_sigma = {sigma};
    c.instance = "abelian-q1";
    c.name = nm;
    return c;
  };
  s.fields = {gauss(0.9, "f"), gauss(1.1, "g"), gauss(0.8, "h")};
  s.t_grid = {0.0, 1.0};
  s.checks = {"associativity", "homomorphism"};
  s.seed = 1;
  return s;
}

// Report CSV with the wall-time column blanked, for determinism diffs.
std::string mask_runtime(const std::string& csv) {
  std::string out;
  size_t start = 0;
  while (start < csv.size()) {
    size_t eol = csv.find('\n', start);
    if (eol == std::string::npos) eol = csv.size();
    std::string line = csv.substr(start, eol - start);
    const size_t cut = line.rfind(',');
    if (start > 0 && cut != std::string::npos) line.resize(cut);
    out += line;
    out += '\n';
    start = eol + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("builtin scenarios are valid and named uniquely") {
  const std::vector<Scenario> all = builtin_scenarios();
  CHECK(all.size() >= 5);
  std::set<std::string> names;
  for (const Scenario& s : all) {
    CHECK_NOTHROW(s.validate());
    CHECK(names.insert(s.name).second);
  }
  CHECK(names.count("gaussian-pair-r1") == 1);
  CHECK(names.count("kernel-oracle-t1") == 1);
  CHECK(names.count("continuity-pair-r1") == 1);
  CHECK(builtin_scenario("gaussian-pair-r1").groupoid == "pair-r1");
  CHECK_THROWS_AS(builtin_scenario("no-such-thing"), ConfigError);
}

TEST_CASE("scenario JSON round-trips") {
  const Scenario s = builtin_scenario("gaussian-pair-r1");
  const std::string text = scenario_to_json(s);
  const Scenario r = scenario_from_json(text);
  CHECK(r.name == s.name);
  CHECK(r.groupoid == s.groupoid);
  CHECK(r.seed == s.seed);
  CHECK(r.t_grid == s.t_grid);
  CHECK(r.checks == s.checks);
  CHECK(r.fields.size() == s.fields.size());
  for (size_t i = 0; i < s.fields.size(); ++i) {
    CHECK(r.fields[i].family == s.fields[i].family);
    CHECK(r.fields[i].amplitude == s.fields[i].amplitude);
    CHECK(r.fields[i].xi_sigma == s.fields[i].xi_sigma);
    CHECK(r.fields[i].x_window.lo == s.fields[i].x_window.lo);
    CHECK(r.fields[i].x_window.hi == s.fields[i].x_window.hi);
  }
  CHECK(r.quadrature.base_nodes == s.quadrature.base_nodes);
  CHECK(r.quadrature.target_rel_tol == s.quadrature.target_rel_tol);
  CHECK(r.lattice_sizes == s.lattice_sizes);
}

TEST_CASE("scenario JSON rejects unknown keys by name") {
  const std::string good = scenario_to_json(builtin_scenario("gaussian-pair-r1"));

  auto expect_mentions = [](const std::string& text, const char* key) {
    try {
      scenario_from_json(text);
      FAIL("expected ConfigError for key ", key);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(key) != std::string::npos);
    }
  };

  SUBCASE("top level") {
    std::string bad = good;
    bad.insert(bad.find("\"name\""), "\"speed_mode\": true, ");
    expect_mentions(bad, "speed_mode");
  }
  SUBCASE("field level") {
    std::string bad = good;
    bad.insert(bad.find("\"family\""), "\"wobble\": 3, ");
    expect_mentions(bad, "wobble");
  }
  SUBCASE("quadrature level") {
    std::string bad = good;
    bad.insert(bad.find("\"base_nodes\""), "\"mesh\": 2, ");
    expect_mentions(bad, "mesh");
  }
  SUBCASE("unparseable text") {
    CHECK_THROWS_AS(scenario_from_json("{nope"), ConfigError);
  }
  SUBCASE("unknown groupoid key surfaces its name") {
    std::string bad = good;
    const size_t pos = bad.find("\"pair-r1\"");
    bad.replace(pos, 9, "\"pair-r9\"");
    expect_mentions(bad, "pair-r9");
  }
  SUBCASE("unknown field family surfaces its name") {
    std::string bad = good;
    const size_t pos = bad.find("\"gaussian\"");
    bad.replace(pos, 10, "\"wavelet\"");
    expect_mentions(bad, "wavelet");
  }
}

TEST_CASE("scenario validation rejects malformed configs") {
  const Scenario base = reduced_r1();
  auto mutated = [&](auto&& fn) {
    Scenario s = base;
    fn(s);
    return s;
  };
  CHECK_THROWS_AS(mutated([](Scenario& s) { s.name = "has space"; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(mutated([](Scenario& s) { s.name = ""; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(mutated([](Scenario& s) { s.fields.clear(); }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(mutated([](Scenario& s) { s.t_grid = {0.3, 0.3}; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(mutated([](Scenario& s) { s.t_grid = {0.5, 1.2}; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(mutated([](Scenario& s) { s.t_grid = {-0.1, 0.5}; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(mutated([](Scenario& s) { s.checks = {}; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(
      mutated([](Scenario& s) { s.checks = {"associativity", "associativity"}; })
          .validate(),
      ConfigError);
  CHECK_THROWS_AS(mutated([](Scenario& s) { s.checks = {"vibes"}; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(
      mutated([](Scenario& s) { s.checks = {"kernel-oracle"}; }).validate(),
      ConfigError);  // t grid contains 0
  CHECK_THROWS_AS(mutated([](Scenario& s) {
                    s.checks = {"kernel-oracle"};
                    s.t_grid = {0.3};
                    s.lattice_sizes = {32};
                  }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(mutated([](Scenario& s) {
                    s.quadrature.base_nodes = 4;
                  }).validate(),
                  ConfigError);
}

TEST_CASE("reduced scenario runs green with canonically ordered rows") {
  const Scenario s = reduced_r1();
  const std::vector<ReportRow> rows = run_scenario(s);
  // associativity x2 t, homomorphism x2 t, support x1
  CHECK(rows.size() == 5);
  CHECK(all_rows_pass(rows));
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto key = [](const ReportRow& r) {
      return std::make_tuple(r.scenario, r.check, r.t, r.grid_size);
    };
    CHECK(key(rows[i - 1]) < key(rows[i]));
  }
  for (const ReportRow& r : rows) {
    CHECK(r.scenario == "reduced-r1");
    CHECK(r.pass == (r.metric <= r.threshold));
    CHECK(r.runtime_ms >= 0.0);
    if (r.check == "associativity" || r.check == "homomorphism") {
      CHECK(r.threshold == 1e-6);
      CHECK(r.metric < 1e-6);
    }
    if (r.check == "support") {
      CHECK(r.threshold == 0.0);
      CHECK(r.metric == 0.0);
    }
  }
}

TEST_CASE("identical config and seed reproduce the report byte for byte") {
  const Scenario s = reduced_q1();
  const std::string a = mask_runtime(rows_to_csv(run_scenario(s)));
  const std::string b = mask_runtime(rows_to_csv(run_scenario(s)));
  CHECK(a == b);
  CHECK(a.find("reduced-q1,associativity,0,") != std::string::npos);
}

TEST_CASE("seed changes move the samples but not the verdicts") {
  Scenario s = reduced_q1();
  std::vector<std::vector<ReportRow>> runs;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    s.seed = seed;
    runs.push_back(run_scenario(s));
  }
  bool any_metric_moved = false;
  for (size_t i = 0; i < runs.size(); ++i) {
    CHECK(runs[i].size() == runs[0].size());
    for (size_t r = 0; r < runs[i].size(); ++r) {
      CHECK(runs[i][r].pass == runs[0][r].pass);
      CHECK(runs[i][r].pass);
      if (runs[i][r].metric != runs[0][r].metric) any_metric_moved = true;
    }
  }
  CHECK(any_metric_moved);
}

TEST_CASE("report CSV round-trips") {
  std::vector<ReportRow> rows;
  ReportRow r;
  r.scenario = "zeta";
  r.check = "associativity";
  r.t = 0.25;
  r.grid_size = 128;
  r.metric = 3.25e-9;
  r.threshold = 1e-6;
  r.pass = true;
  r.runtime_ms = 17.25;
  rows.push_back(r);
  r.scenario = "alpha";
  r.check = "support";
  r.t = 0.0;
  r.grid_size = 1450;
  r.metric = 0.0;
  r.threshold = 0.0;
  r.runtime_ms = 2.5;
  rows.push_back(r);

  const std::string csv = rows_to_csv(rows);
  CHECK(csv.rfind("scenario,check,t,grid_size,metric,threshold,pass,runtime_ms\n",
                  0) == 0);
  // canonical order puts alpha first
  CHECK(csv.find("alpha") < csv.find("zeta"));
  CHECK(csv.find("\r") == std::string::npos);

  const std::vector<ReportRow> back = rows_from_csv(csv);
  REQUIRE(back.size() == 2);
  CHECK(back[0].scenario == "alpha");
  CHECK(back[1].scenario == "zeta");
  CHECK(back[1].t == 0.25);
  CHECK(back[1].grid_size == 128);
  CHECK(back[1].metric == doctest::Approx(3.25e-9).epsilon(1e-9));
  CHECK(back[1].pass);
  CHECK(back[1].runtime_ms == doctest::Approx(17.25));

  CHECK_THROWS_AS(rows_from_csv("bogus\n"), ConfigError);
  CHECK_THROWS_AS(rows_from_csv(csv + "short,row\n"), ConfigError);
  CHECK_THROWS_AS(
      rows_from_csv(csv + "a,b,x.y,1,0,0,1,0\n"), ConfigError);
}

TEST_CASE("an unreachable quadrature tolerance fails rows without crashing") {
  Scenario s;
  s.name = "starved";
  s.groupoid = "pair-r1";
  FieldConfig f;
  f.family = "windowed-polynomial";
  f.poly_coeffs = {1.0, 0.0, -0.05};
  f.x_window = Box{{-6.0}, {6.0}};
  f.x_margin = 1.5;
  f.instance = "pair-r1";
  s.fields = {f, f};
  s.t_grid = {0.5};
  s.checks = {"homomorphism"};
  s.quadrature.base_nodes = 8;
  s.quadrature.box_nodes = 8;
  s.quadrature.max_refinements = 0;
  s.quadrature.target_rel_tol = 1e-14;

  const std::vector<ReportRow> rows = run_scenario(s);
  REQUIRE(rows.size() == 1);
  CHECK_FALSE(rows[0].pass);
  CHECK(std::isinf(rows[0].metric));
  CHECK_FALSE(all_rows_pass(rows));
  // and the failing metric still serializes and parses
  const std::vector<ReportRow> back = rows_from_csv(rows_to_csv(rows));
  CHECK(std::isinf(back[0].metric));
  CHECK_FALSE(back[0].pass);
}

TEST_CASE("checks that need structure reject fields without it") {
  Scenario s = reduced_q1();
  s.checks = {"continuity"};
  s.t_grid = {0.0, 0.5};
  CHECK_THROWS_AS(run_scenario(s), ConfigError);  // no base window to probe

  Scenario two = reduced_r1();
  two.fields.resize(1);
  two.checks = {"associativity"};
  CHECK_THROWS_AS(run_scenario(two), ConfigError);

  Scenario fr = reduced_q1();
  fr.fields[0].normal_dim = 2;
  fr.fields[0].xi_sigma = {0.9, 0.9};
  fr.checks = {"fourier"};
  CHECK_THROWS_AS(fr.validate(), ConfigError);
}

TEST_CASE("series emission fits the log-log slope") {
  std::vector<ReportRow> rows;
  for (double t : {1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1}) {
    ReportRow r;
    r.scenario = "c";
    r.check = "continuity";
    r.t = t;
    r.grid_size = 64;
    r.metric = 2.0 * std::pow(t, 0.95);
    r.threshold = 10.0 * std::pow(t, 0.9);
    r.pass = true;
    rows.push_back(r);
  }
  const std::string series = emit_series(rows, "continuity-curve");
  CHECK(series.find("# kind: continuity-curve\n") != std::string::npos);
  CHECK(series.find("# columns: t metric\n") != std::string::npos);
  const size_t pos = series.find("slope: ");
  REQUIRE(pos != std::string::npos);
  const double slope = std::strtod(series.c_str() + pos + 7, nullptr);
  CHECK(slope == doctest::Approx(0.95).epsilon(1e-6));
  // six data lines, three header comments
  int lines = 0;
  for (char c : series)
    if (c == '\n') ++lines;
  CHECK(lines == 9);

  SUBCASE("convergence kind reads lattice sizes") {
    std::vector<ReportRow> ko;
    for (int n : {64, 128, 256, 512}) {
      ReportRow r;
      r.scenario = "k";
      r.check = "kernel-oracle";
      r.t = 0.3;
      r.grid_size = n;
      r.metric = 50.0 / (static_cast<double>(n) * n);
      rows.push_back(r);  // continuity rows must be ignored
      ko.push_back(r);
    }
    const std::string conv = emit_series(ko, "convergence-curve");
    CHECK(conv.find("# columns: grid_size metric\n") != std::string::npos);
    const size_t p2 = conv.find("slope: ");
    REQUIRE(p2 != std::string::npos);
    CHECK(std::strtod(conv.c_str() + p2 + 7, nullptr) ==
          doctest::Approx(-2.0).epsilon(1e-6));
  }
  SUBCASE("too few points is a series error") {
    rows.resize(2);
    CHECK_THROWS_AS(emit_series(rows, "continuity-curve"), SeriesError);
    CHECK_THROWS_AS(emit_series(rows, "convergence-curve"), SeriesError);
    CHECK_THROWS_AS(emit_series(rows, "mystery-curve"), SeriesError);
  }
}

TEST_CASE("log-log slope fit recovers exact power laws") {
  std::vector<std::pair<double, double>> pts;
  for (double x : {0.5, 1.0, 2.0, 4.0}) pts.emplace_back(x, 3.0 * x * x);
  CHECK(loglog_slope(pts) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(loglog_slope({{1.0, 1.0}}), SeriesError);
  CHECK_THROWS_AS(loglog_slope({{1.0, 1.0}, {2.0, -1.0}}), SeriesError);
  CHECK_THROWS_AS(loglog_slope({{1.0, 1.0}, {1.0, 2.0}}), SeriesError);
}
