#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "deform/fields.hpp"
#include "deform/rng.hpp"
#include "deform/schwartz.hpp"

using namespace deform;

namespace {

// Windowed Gaussian on one base and one fiber axis; sigma picked so the
// fiber profile is exp(-xi^2).
FieldConfig windowed_cfg() {
  FieldConfig cfg;
  cfg.base_dim = 1;
  cfg.normal_dim = 1;
  cfg.xi_sigma = {1.0 / std::sqrt(2.0)};
  cfg.x_window = Box{{-2.0}, {2.0}};
  cfg.x_margin = 1.0;
  return cfg;
}

// Pure fiber field exp(-|xi|^2 / (2 sigma^2)) with no base axes.
SchwartzDncField pure_gaussian(double sigma) {
  FieldConfig cfg;
  cfg.base_dim = 0;
  cfg.normal_dim = 1;
  cfg.xi_sigma = {sigma};
  return field_from_config(cfg);
}

PairMorphism identity_morphism() {
  PairMorphism f;
  f.in_base = f.out_base = 1;
  f.in_normal = f.out_normal = 1;
  f.f_base = [](SpanD x, SpanD) { return to_vec({x[0]}); };
  f.f_normal = [](SpanD, SpanD xi) { return to_vec({xi[0]}); };
  f.jac_normal = [](SpanD) { return Mat::identity(1); };
  return f;
}

// xi' = 2 xi, base untouched.
PairMorphism doubling_morphism() {
  PairMorphism f = identity_morphism();
  f.f_normal = [](SpanD, SpanD xi) { return to_vec({2.0 * xi[0]}); };
  f.jac_normal = [](SpanD) {
    Mat j(1, 1);
    j.at(0, 0) = 2.0;
    return j;
  };
  return f;
}

PairMorphism sine_morphism() {
  PairMorphism f = identity_morphism();
  f.f_normal = [](SpanD, SpanD xi) { return to_vec({std::sin(xi[0])}); };
  return f;
}

// xi' = e^x xi: x-dependent but fiberwise linear.
PairMorphism scaling_morphism() {
  PairMorphism f = identity_morphism();
  f.f_normal = [](SpanD x, SpanD xi) { return to_vec({std::exp(x[0]) * xi[0]}); };
  f.jac_normal = [](SpanD x) {
    Mat j(1, 1);
    j.at(0, 0) = std::exp(x[0]);
    return j;
  };
  return f;
}

}  // namespace

TEST_CASE("ramp and plateau hit their flat values exactly") {
  CHECK(smooth01(0.0) == 0.0);
  CHECK(smooth01(-3.0) == 0.0);
  CHECK(smooth01(1.0) == 1.0);
  CHECK(smooth01(7.0) == 1.0);
  double a = smooth01(0.3), b = smooth01(0.5), c = smooth01(0.7);
  CHECK(a > 0.0);
  CHECK(c < 1.0);
  CHECK(a < b);
  CHECK(b < c);

  CHECK(plateau(0.0, -2.0, -1.0, 1.0, 2.0) == 1.0);
  CHECK(plateau(-1.0, -2.0, -1.0, 1.0, 2.0) == 1.0);
  CHECK(plateau(1.0, -2.0, -1.0, 1.0, 2.0) == 1.0);
  CHECK(plateau(-2.0, -2.0, -1.0, 1.0, 2.0) == 0.0);
  CHECK(plateau(2.4, -2.0, -1.0, 1.0, 2.0) == 0.0);
  double r = plateau(1.5, -2.0, -1.0, 1.0, 2.0);
  CHECK(r > 0.0);
  CHECK(r < 1.0);
  CHECK_THROWS_AS(plateau(0.0, -1.0, -1.0, 1.0, 2.0), DomainViolation);
  CHECK_THROWS_AS(plateau(0.0, -2.0, 1.0, -1.0, 2.0), DomainViolation);
}

TEST_CASE("conic sets answer membership exactly") {
  ConicPiece low{Box{{-3.0, -2.5}, {3.0, 2.5}}, 0.0, 0.25};
  ConicPiece high{Box{{-3.0, -5.0}, {3.0, 5.0}}, 0.25, 0.5};
  ConicCompactSet k = ConicCompactSet::from_pieces(1, {low, high});

  CHECK(k.pieces.size() == 2);
  CHECK(k.traces.size() == 1);  // only the piece touching t = 0
  CHECK(k.traces[0].lo[1] == 0.0);
  CHECK(k.traces[0].hi[1] == 0.0);

  CHECK(k.allows_interior(to_vec({0.0, 2.5}), 0.2));   // box edge inclusive
  CHECK(k.allows_interior(to_vec({0.0, 4.0}), 0.3));   // second piece
  CHECK_FALSE(k.allows_interior(to_vec({0.0, 4.0}), 0.2));
  CHECK_FALSE(k.allows_interior(to_vec({0.0, 0.0}), 0.7));  // t uncovered
  CHECK_FALSE(k.allows_interior(to_vec({0.0, 0.0}), 0.0));  // boundary stratum
  CHECK(k.allows_boundary(to_vec({3.0})));
  CHECK_FALSE(k.allows_boundary(to_vec({3.1})));

  CHECK(k.boundary_trace_within(Box{{-3.0, 0.0}, {3.0, 0.0}}));
  CHECK_FALSE(k.boundary_trace_within(Box{{-2.9, 0.0}, {3.0, 0.0}}));

  Box hull = k.ambient_hull();
  CHECK(hull.lo[1] == -5.0);
  CHECK(hull.hi[1] == 5.0);

  ConicPiece bad_t{Box{{-1.0, -1.0}, {1.0, 1.0}}, 0.5, 1.5};
  CHECK_THROWS_AS(ConicCompactSet::from_pieces(1, {bad_t}), DomainViolation);
  ConicPiece no_normal{Box{{-1.0}, {1.0}}, 0.0, 1.0};
  CHECK_THROWS_AS(ConicCompactSet::from_pieces(1, {no_normal}), DomainViolation);
  ConicPiece unbounded{Box{{-1.0, -INFINITY}, {1.0, 1.0}}, 0.0, 1.0};
  CHECK_THROWS_AS(ConicCompactSet::from_pieces(1, {unbounded}), DomainViolation);
}

TEST_CASE("field families match their closed forms and vanish exactly") {
  FieldConfig cfg = windowed_cfg();
  cfg.amplitude = 2.0;
  cfg.xi_sigma = {1.0};
  SchwartzDncField f = field_from_config(cfg);

  CHECK(f.eval(to_vec({0.0}), to_vec({0.0}), 0.3) == 2.0);
  CHECK(f.eval(to_vec({0.0}), to_vec({1.0}), 0.0) == 2.0 * std::exp(-0.5));
  // Exactly zero past the outer cutoff and past the window margin.
  CHECK(f.eval(to_vec({0.0}), to_vec({10.5}), 0.0) == 0.0);
  CHECK(f.eval(to_vec({3.2}), to_vec({0.0}), 0.0) == 0.0);
  CHECK(f.eval(to_vec({-3.0001}), to_vec({0.0}), 0.5) == 0.0);
  // Plateau region multiplies by exactly one.
  CHECK(f.eval(to_vec({1.7}), to_vec({0.5}), 0.9) ==
        f.eval(to_vec({-0.3}), to_vec({0.5}), 0.9));

  FieldConfig hg = windowed_cfg();
  hg.family = "hermite-gaussian";
  hg.xi_sigma = {1.0};
  hg.hermite_orders = {1};
  SchwartzDncField h = field_from_config(hg);
  CHECK(h.eval(to_vec({0.0}), to_vec({2.0}), 0.0) ==
        doctest::Approx(2.0 * std::exp(-2.0)).epsilon(1e-14));
  CHECK(h.eval(to_vec({0.0}), to_vec({0.0}), 0.0) == 0.0);  // He_1(0) = 0

  FieldConfig wp = windowed_cfg();
  wp.family = "windowed-polynomial";
  wp.xi_sigma = {1.0};
  wp.poly_coeffs = {1.0, -0.25};
  SchwartzDncField w = field_from_config(wp);
  CHECK(w.eval(to_vec({0.0}), to_vec({1.0}), 0.0) == 0.75);
  CHECK(w.eval(to_vec({0.0}), to_vec({11.0}), 0.0) == 0.0);  // window wins

  FieldConfig bad = windowed_cfg();
  bad.family = "lorentzian";
  CHECK_THROWS_AS(field_from_config(bad), ConfigError);
  bad = windowed_cfg();
  bad.cutoff_inner = 10.0;
  bad.cutoff_outer = 8.0;
  CHECK_THROWS_AS(field_from_config(bad), ConfigError);
  bad = windowed_cfg();
  bad.xi_sigma = {0.0};
  CHECK_THROWS_AS(field_from_config(bad), ConfigError);
  bad = windowed_cfg();
  bad.x_window = Box{{-2.0, -2.0}, {2.0, 2.0}};
  CHECK_THROWS_AS(field_from_config(bad), ConfigError);
  bad = windowed_cfg();
  bad.x_period = {1.0, 1.0};
  CHECK_THROWS_AS(field_from_config(bad), ConfigError);
  bad = windowed_cfg();
  bad.x_period = {-1.0};
  CHECK_THROWS_AS(field_from_config(bad), ConfigError);
}

TEST_CASE("declared supports contain every nonzero sample") {
  SchwartzDncField f = field_from_config(windowed_cfg());
  REQUIRE(f.support.has_value());
  CHECK(conic_support_check(f, 4096, 11).empty());

  FieldConfig off = windowed_cfg();
  off.family = "hermite-gaussian";
  off.hermite_orders = {2};
  off.xi_center = {0.5};
  off.xi_sigma = {0.7};
  CHECK(conic_support_check(field_from_config(off), 4096, 12).empty());

  CHECK(conic_support_check(pure_gaussian(1.0), 4096, 13).empty());

  FieldConfig two = windowed_cfg();
  two.normal_dim = 2;
  two.xi_center = {0.3, -0.2};
  two.xi_sigma = {1.0, 0.6};
  CHECK(conic_support_check(field_from_config(two), 4096, 14).empty());
}

TEST_CASE("support checker reports witnesses when the claim is too small") {
  SchwartzDncField f = field_from_config(windowed_cfg());
  ConicPiece tiny{Box{{-0.1, -0.1}, {0.1, 0.1}}, 0.0, 1.0};
  f.support = ConicCompactSet::from_pieces(1, {tiny});
  auto bad = conic_support_check(f, 4096, 21);
  REQUIRE_FALSE(bad.empty());
  for (const auto& v : bad) {
    CHECK(v.value != 0.0);
    CHECK(f.eval(v.x, v.xi, v.t) == v.value);
    if (v.t == 0.0) {
      CHECK_FALSE(f.support->allows_boundary(v.x));
    } else {
      VecD m = {v.x[0], v.t * v.xi[0]};
      CHECK_FALSE(f.support->allows_interior(m, v.t));
    }
  }

  // The zero field satisfies any support claim.
  FieldConfig zc = windowed_cfg();
  zc.amplitude = 0.0;
  SchwartzDncField z = field_from_config(zc);
  z.support = ConicCompactSet::from_pieces(1, {tiny});
  CHECK(conic_support_check(z, 4096, 22).empty());
}

TEST_CASE("periodic base axes wrap into the fundamental cell") {
  CHECK(wrap_base(to_vec({1.25}), {1.0})[0] == 0.25);
  CHECK(wrap_base(to_vec({-0.75}), {1.0})[0] == 0.25);
  CHECK(wrap_base(to_vec({1.0}), {1.0})[0] == 0.0);
  CHECK(wrap_base(to_vec({0.4}), {})[0] == 0.4);     // empty = aperiodic
  CHECK(wrap_base(to_vec({-0.4}), {0.0})[0] == -0.4);  // zero = flat axis

  FieldConfig cfg;
  cfg.base_dim = 1;
  cfg.normal_dim = 1;
  cfg.x_window = Box{{0.2}, {0.8}};
  cfg.x_margin = 0.1;
  cfg.x_period = {1.0};
  cfg.xi_sigma = {0.3};
  SchwartzDncField f = field_from_config(cfg);
  CHECK(f.eval(to_vec({1.25}), to_vec({0.1}), 0.2) ==
        f.eval(to_vec({0.25}), to_vec({0.1}), 0.2));
  CHECK(f.eval(to_vec({-0.75}), to_vec({0.1}), 0.2) ==
        f.eval(to_vec({0.25}), to_vec({0.1}), 0.2));
  CHECK(f.meta.x_window.lo[0] == 0.0);
  CHECK(f.meta.x_window.hi[0] == 1.0);
  REQUIRE(f.support.has_value());
  CHECK(conic_support_check(f, 4096, 31).empty());

  // Fully periodic base needs no window bump to carry a support claim.
  FieldConfig nb = cfg;
  nb.x_margin = 0.0;
  SchwartzDncField g = field_from_config(nb);
  REQUIRE(g.support.has_value());
  CHECK(conic_support_check(g, 4096, 32).empty());
}

TEST_CASE("sampled sups match closed forms for the Gaussian") {
  SchwartzDncField f = pure_gaussian(1.0 / std::sqrt(2.0));  // exp(-xi^2)
  SeminormGrid grid;

  SeminormEstimate e0 = seminorm_estimate(f, 0, 0, {}, {0}, grid);
  CHECK(e0.bounded);
  CHECK(e0.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e0.samples > 0);

  // (1 + xi^2) exp(-xi^2) also peaks at the origin.
  SeminormEstimate e1 = seminorm_estimate(f, 1, 0, {}, {0}, grid);
  CHECK(e1.value == doctest::Approx(1.0).epsilon(1e-12));

  // (1 + xi^2)^2 exp(-xi^2) peaks at xi^2 = 1 with value 4/e.
  SeminormEstimate e2 = seminorm_estimate(f, 2, 0, {}, {0}, grid);
  CHECK(e2.bounded);
  CHECK(e2.value > 1.40);
  CHECK(e2.value < 4.0 / std::exp(1.0) + 1e-9);

  // Families are constant in t, so the t-derivative vanishes identically.
  SeminormEstimate et = seminorm_estimate(f, 0, 1, {}, {0}, grid);
  CHECK(et.value == 0.0);
  CHECK(et.bounded);

  // |d/dxi exp(-xi^2)| has supremum sqrt(2) e^{-1/2}; the grid sees a
  // lower bound of it.
  SeminormEstimate ed = seminorm_estimate(f, 0, 0, {}, {1}, grid);
  CHECK(ed.bounded);
  CHECK(ed.value > 0.70);
  CHECK(ed.value < std::sqrt(2.0) * std::exp(-0.5) + 1e-6);

  // Base derivative of the windowed family: bounded ramp slope.
  SchwartzDncField wf = field_from_config(windowed_cfg());
  SeminormEstimate ex = seminorm_estimate(wf, 0, 0, {1}, {0}, grid);
  CHECK(ex.bounded);
  CHECK(ex.value > 0.0);
  CHECK(ex.value < 1e3);
}

TEST_CASE("seminorm preconditions reject bad multi-indices") {
  SchwartzDncField f = pure_gaussian(1.0);
  SeminormGrid grid;
  CHECK_THROWS_AS(seminorm_estimate(f, 7, 0, {}, {0}, grid), DomainViolation);
  CHECK_THROWS_AS(seminorm_estimate(f, 3, 0, {}, {4}, grid), DomainViolation);
  CHECK_THROWS_AS(seminorm_estimate(f, -1, 0, {}, {0}, grid), DomainViolation);
  CHECK_THROWS_AS(seminorm_estimate(f, 0, 0, {}, {5}, grid), DomainViolation);
  CHECK_THROWS_AS(seminorm_estimate(f, 0, 0, {0}, {0}, grid), DomainViolation);
}

TEST_CASE("slow fiber decay is reported unbounded, never thrown") {
  SchwartzDncField f;
  f.base_dim = 0;
  f.normal_dim = 1;
  f.eval = [](SpanD, SpanD xi, double) { return 1.0 / (1.0 + xi[0] * xi[0]); };
  f.meta.xi_center = {0.0};
  f.meta.xi_scale = {1.0};
  SeminormGrid grid;

  SeminormEstimate ok = seminorm_estimate(f, 0, 0, {}, {0}, grid);
  CHECK(ok.bounded);
  CHECK(ok.value == doctest::Approx(1.0).epsilon(1e-12));

  SeminormEstimate div = seminorm_estimate(f, 2, 0, {}, {0}, grid);
  CHECK_FALSE(div.bounded);
  CHECK(div.value > 1.0);
  CHECK(std::isfinite(div.value));
}

TEST_CASE("estimates grow monotonically under nested grid refinement") {
  FieldConfig cfg = windowed_cfg();
  cfg.xi_center = {0.3};
  cfg.xi_sigma = {0.8};
  SchwartzDncField f = field_from_config(cfg);

  SeminormGrid coarse;
  SeminormGrid fine = coarse;
  fine.x_per_axis = 2 * coarse.x_per_axis - 1;        // nested x points
  fine.xi_core_per_axis = 2 * coarse.xi_core_per_axis - 1;  // nested core

  struct Case {
    int k, m;
    std::vector<int> l, alpha;
  };
  for (const Case& c : {Case{0, 0, {0}, {0}}, Case{1, 0, {0}, {1}},
                        Case{2, 0, {1}, {0}}, Case{0, 1, {0}, {0}},
                        Case{1, 1, {1}, {1}}}) {
    SeminormEstimate a = seminorm_estimate(f, c.k, c.m, c.l, c.alpha, coarse);
    SeminormEstimate b = seminorm_estimate(f, c.k, c.m, c.l, c.alpha, fine);
    CHECK(b.value >= a.value - 1e-12);
    CHECK(b.samples > a.samples);
  }
}

TEST_CASE("seminorm scan covers the budget and prints well-formed rows") {
  SchwartzDncField f = pure_gaussian(1.0);
  SeminormGrid grid;
  SeminormReport rep = seminorm_scan(f, 2, 2, grid);
  CHECK(rep.entries.size() == 18);  // 6 (alpha,m) combos x 3 weights
  CHECK(rep.all_bounded);
  CHECK(rep.grid_size > 0);
  double mx = 0.0;
  for (const auto& e : rep.entries) mx = std::max(mx, e.value);
  CHECK(rep.max_value == mx);

  std::string csv = seminorm_csv(rep);
  std::istringstream is(csv);
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "k,m,l,alpha,estimate,grid_size");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    int commas = 0;
    for (char ch : line) commas += ch == ',';
    CHECK(commas == 5);
    CHECK(line.find(",-,") != std::string::npos);  // empty l prints a dash
  }
  CHECK(rows == 18);

  SchwartzDncField slow;
  slow.base_dim = 0;
  slow.normal_dim = 1;
  slow.eval = [](SpanD, SpanD xi, double) { return 1.0 / (1.0 + xi[0] * xi[0]); };
  slow.meta.xi_center = {0.0};
  slow.meta.xi_scale = {1.0};
  SeminormReport srep = seminorm_scan(slow, 2, 0, grid);
  CHECK_FALSE(srep.all_bounded);
  CHECK(seminorm_csv(srep).find("inf") != std::string::npos);
}

TEST_CASE("decay certificates validate with five percent slack") {
  SchwartzDncField f = pure_gaussian(1.0 / std::sqrt(2.0));
  SeminormGrid grid;

  CHECK(validate_certificate(f, grid).empty());  // no claim, nothing to check

  DecayCertificate cert;
  cert.entries.push_back({0, 0, {}, {0}, 1.0});
  f.certificate = cert;
  CHECK(validate_certificate(f, grid).empty());

  cert.entries[0].constant = 0.9;  // estimate 1.0 > 1.05 * 0.9
  f.certificate = cert;
  auto fails = validate_certificate(f, grid);
  REQUIRE(fails.size() == 1);
  CHECK(fails[0].find("exceeds") != std::string::npos);

  SchwartzDncField slow;
  slow.base_dim = 0;
  slow.normal_dim = 1;
  slow.eval = [](SpanD, SpanD xi, double) { return 1.0 / (1.0 + xi[0] * xi[0]); };
  slow.meta.xi_center = {0.0};
  slow.meta.xi_scale = {1.0};
  DecayCertificate scert;
  scert.entries.push_back({2, 0, {}, {0}, 100.0});
  slow.certificate = scert;
  auto sfails = validate_certificate(slow, grid);
  REQUIRE(sfails.size() == 1);
  CHECK(sfails[0].find("unbounded") != std::string::npos);
}

TEST_CASE("pullback through the identity is the field itself") {
  SchwartzDncField f = field_from_config(windowed_cfg());
  SchwartzDncField pb = pullback(identity_morphism(), f);
  CounterRng rng(77);
  for (std::uint64_t i = 0; i < 60; ++i) {
    VecD x = {rng.uniform(4 * i, -3.0, 3.0)};
    VecD xi = {rng.uniform(4 * i + 1, -4.0, 4.0)};
    double t = rng.uniform01(4 * i + 2);
    CHECK(pb.eval(x, xi, t) ==
          doctest::Approx(f.eval(x, xi, t)).epsilon(1e-12));
  }
  CHECK(pb.eval(to_vec({0.5}), to_vec({1.0}), 0.0) ==
        f.eval(to_vec({0.5}), to_vec({1.0}), 0.0));
}

TEST_CASE("pullback composes the field with the induced transition") {
  SchwartzDncField f = field_from_config(windowed_cfg());  // exp(-xi^2) fiber
  SchwartzDncField pb2 = pullback(doubling_morphism(), f);
  // At the boundary the fiber map is the jacobian: xi = 1 lands at 2.
  CHECK(pb2.eval(to_vec({0.0}), to_vec({1.0}), 0.0) ==
        doctest::Approx(std::exp(-4.0)).epsilon(1e-12));
  // Linear fiber maps induce a t-independent transition.
  CHECK(pb2.eval(to_vec({0.0}), to_vec({1.0}), 0.5) ==
        doctest::Approx(std::exp(-4.0)).epsilon(1e-12));
  REQUIRE(pb2.support.has_value());
  CHECK(conic_support_check(pb2, 4096, 41).empty());

  // Nonlinear fiber map at t = 0.5: the difference quotient of sin.
  FieldConfig nosupp = windowed_cfg();
  nosupp.x_margin = 0.0;  // no window bump, no support claim to transport
  SchwartzDncField g = field_from_config(nosupp);
  SchwartzDncField pbs = pullback(sine_morphism(), g);
  double got = pbs.eval(to_vec({0.0}), to_vec({2.0}), 0.5);
  double quotient = std::sin(1.0) / 0.5;
  CHECK(got == doctest::Approx(std::exp(-quotient * quotient)).epsilon(1e-12));
  CHECK(got == doctest::Approx(0.058878).epsilon(1e-4));
}

TEST_CASE("pullbacks compose contravariantly") {
  FieldConfig nosupp = windowed_cfg();
  nosupp.x_margin = 0.0;
  SchwartzDncField g = field_from_config(nosupp);

  PairMorphism F = scaling_morphism();
  PairMorphism G = sine_morphism();
  SchwartzDncField nested = pullback(F, pullback(G, g));
  SchwartzDncField direct = pullback(compose(G, F), g);

  CounterRng rng(99);
  for (std::uint64_t i = 0; i < 200; ++i) {
    VecD x = {rng.uniform(4 * i, -0.5, 0.5)};
    VecD xi = {rng.uniform(4 * i + 1, -2.0, 2.0)};
    double t = (i % 3 == 0) ? 0.0 : rng.uniform(4 * i + 2, 0.05, 1.0);
    double a = nested.eval(x, xi, t);
    double b = direct.eval(x, xi, t);
    CHECK(a == doctest::Approx(b).epsilon(1e-10));
  }
}

TEST_CASE("pullback rejects singular fiber jacobians") {
  SchwartzDncField f = field_from_config(windowed_cfg());
  PairMorphism crush = identity_morphism();
  crush.f_normal = [](SpanD, SpanD) { return to_vec({0.0}); };
  crush.jac_normal = [](SpanD) {
    Mat j(1, 1);
    j.at(0, 0) = 0.0;
    return j;
  };
  CHECK_THROWS_AS(pullback(crush, f), DomainViolation);
}

TEST_CASE("partition parts sum back to the field") {
  FieldConfig cfg = windowed_cfg();
  cfg.xi_sigma = {0.8};
  SchwartzDncField f = field_from_config(cfg);

  PartitionOfUnity pu;
  pu.ambient_dim = 2;
  pu.bumps.push_back({Box{{-3.2, -9.0}, {0.5, 9.0}}, 0.2});
  pu.bumps.push_back({Box{{-0.5, -9.0}, {3.2, 9.0}}, 0.2});
  PartitionParts parts = partition_decompose(f, pu);
  REQUIRE(parts.parts.size() == 2);

  CounterRng rng(123);
  for (std::uint64_t i = 0; i < 500; ++i) {
    VecD x = {rng.uniform(4 * i, -3.2, 3.2)};
    VecD xi = {rng.uniform(4 * i + 1, -6.0, 6.0)};
    double t;
    switch (i % 4) {
      case 0: t = 0.0; break;
      case 1: t = 0.2; break;
      case 2: t = rng.uniform(4 * i + 2, 0.0, 1.0); break;
      default: t = 1.0; break;
    }
    double fv = f.eval(x, xi, t);
    double sum = parts.tail.eval(x, xi, t);
    for (const auto& part : parts.parts) sum += part.eval(x, xi, t);
    CHECK(sum == doctest::Approx(fv).epsilon(1e-12));
  }

  // The tail ramp is exactly zero at and below its floor.
  CHECK(parts.tail.eval(to_vec({0.0}), to_vec({1.0}), 0.2) == 0.0);
  CHECK(parts.tail.eval(to_vec({0.0}), to_vec({1.0}), 0.25) == 0.0);
  CHECK(parts.tail.eval(to_vec({0.0}), to_vec({1.0}), 0.6) != 0.0);

  // Every part respects its localized support claim.
  for (const auto& part : parts.parts) {
    REQUIRE(part.support.has_value());
    CHECK(conic_support_check(part, 2048, 51).empty());
  }
  REQUIRE(parts.tail.support.has_value());
  CHECK(conic_support_check(parts.tail, 2048, 52).empty());
  for (const auto& piece : parts.tail.support->pieces)
    CHECK(piece.t_lo >= pu.tail_floor);
}

TEST_CASE("a single covering chart reproduces the field exactly") {
  SchwartzDncField f = field_from_config(windowed_cfg());
  PartitionOfUnity pu;
  pu.ambient_dim = 2;
  pu.bumps.push_back({Box{{-4.0, -12.0}, {4.0, 12.0}}, 0.5});
  pu.use_tail = false;
  PartitionParts parts = partition_decompose(f, pu);
  REQUIRE(parts.parts.size() == 1);

  CounterRng rng(321);
  for (std::uint64_t i = 0; i < 200; ++i) {
    VecD x = {rng.uniform(3 * i, -3.5, 3.5)};
    VecD xi = {rng.uniform(3 * i + 1, -11.0, 11.0)};
    double t = rng.uniform01(3 * i + 2);
    CHECK(parts.parts[0].eval(x, xi, t) == f.eval(x, xi, t));
    CHECK(parts.tail.eval(x, xi, t) == 0.0);
  }
}

TEST_CASE("uncovered support regions raise a witnessed error") {
  SchwartzDncField f = field_from_config(windowed_cfg());
  PartitionOfUnity pu;
  pu.ambient_dim = 2;
  pu.bumps.push_back({Box{{-3.2, -9.0}, {-0.5, 9.0}}, 0.2});  // left half only
  pu.use_tail = false;
  CHECK_THROWS_AS(partition_decompose(f, pu), UncoveredRegionError);
  try {
    partition_decompose(f, pu);
  } catch (const UncoveredRegionError& e) {
    CHECK(std::string(e.what()).find("does not cover") != std::string::npos);
  }

  PartitionOfUnity bad_dim = pu;
  bad_dim.ambient_dim = 3;
  CHECK_THROWS_AS(partition_decompose(f, bad_dim), ConfigError);

  PartitionOfUnity bad_margin;
  bad_margin.ambient_dim = 2;
  bad_margin.bumps.push_back({Box{{-1.0, -1.0}, {1.0, 1.0}}, 1.0});
  CHECK_THROWS_AS(partition_decompose(f, bad_margin), ConfigError);

  PartitionOfUnity bad_tail;
  bad_tail.ambient_dim = 2;
  bad_tail.bumps.push_back({Box{{-4.0, -12.0}, {4.0, 12.0}}, 0.5});
  bad_tail.tail_floor = 0.6;
  bad_tail.tail_full = 0.5;
  CHECK_THROWS_AS(partition_decompose(f, bad_tail), ConfigError);
}

TEST_CASE("products of decaying fields keep bounded seminorms") {
  SchwartzDncField a = pure_gaussian(1.0);
  FieldConfig hc;
  hc.base_dim = 0;
  hc.normal_dim = 1;
  hc.family = "hermite-gaussian";
  hc.hermite_orders = {2};
  hc.xi_sigma = {0.9};
  SchwartzDncField b = field_from_config(hc);

  SchwartzDncField prod;
  prod.base_dim = 0;
  prod.normal_dim = 1;
  auto ae = a.eval, be = b.eval;
  prod.eval = [ae, be](SpanD x, SpanD xi, double t) {
    return ae(x, xi, t) * be(x, xi, t);
  };
  prod.meta.xi_center = {0.0};
  prod.meta.xi_scale = {0.9};

  SeminormGrid grid;
  SeminormReport rep = seminorm_scan(prod, 3, 3, grid);
  CHECK(rep.all_bounded);
  for (const auto& e : rep.entries) {
    CHECK(e.bounded);
    CHECK(std::isfinite(e.value));
  }
  CHECK(rep.max_value > 0.0);
  CHECK(rep.max_value < 1e4);
}

TEST_CASE("bundle fields check their compact base support") {
  BundleSchwartzField b;
  b.base_dim = 1;
  b.fiber_dim = 1;
  b.eval = [](SpanD x, SpanD xi) {
    return plateau(x[0], -3.0, -2.0, 2.0, 3.0) * std::exp(-xi[0] * xi[0]);
  };
  b.meta.xi_center = {0.0};
  b.meta.xi_scale = {1.0};
  b.base_support = Box{{-3.0}, {3.0}};
  CHECK(bundle_support_check(b, 4096, 61).empty());

  b.base_support = Box{{-0.5}, {0.5}};
  auto bad = bundle_support_check(b, 4096, 62);
  REQUIRE_FALSE(bad.empty());
  for (const auto& v : bad) CHECK(std::abs(v.x[0]) > 0.5);

  b.base_support.reset();
  CHECK(bundle_support_check(b, 4096, 63).empty());
}
