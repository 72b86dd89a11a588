#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "deform/common.hpp"
#include "deform/quadrature.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace deform;

namespace {
const double kSqrtPi = 1.7724538509055160;
const double kSqrt2Pi = 2.5066282746310002;

GhHint unit_hint(int dim) {
  return GhHint{VecD(dim, 0.0), VecD(dim, 1.0)};
}

QuadratureSpec default_spec() { return QuadratureSpec{}; }
}  // namespace

TEST_CASE("small decay rules match closed forms") {
  const GaussRule& r1 = hermite_rule(1);
  REQUIRE(r1.nodes.size() == 1);
  CHECK(r1.nodes[0] == 0.0);
  CHECK(r1.weights[0] == doctest::Approx(kSqrtPi).epsilon(1e-14));

  const GaussRule& r2 = hermite_rule(2);
  CHECK(r2.nodes[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(r2.nodes[0] == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-14));
  // Total weight w * e^{x^2} at x = 1/sqrt(2): sqrt(pi) e^{1/2} / 2.
  double w2 = std::sqrt(kPi) * std::exp(0.5) / 2.0;
  CHECK(r2.weights[0] == doctest::Approx(w2).epsilon(1e-14));
  CHECK(r2.weights[1] == doctest::Approx(w2).epsilon(1e-14));
}

TEST_CASE("large decay rules stay finite and ordered") {
  for (int n : {64, 128, 512}) {
    const GaussRule& r = hermite_rule(n);
    REQUIRE(static_cast<int>(r.nodes.size()) == n);
    for (int i = 0; i < n; ++i) {
      CHECK(std::isfinite(r.nodes[i]));
      CHECK(std::isfinite(r.weights[i]));
      CHECK(r.weights[i] > 0.0);
      if (i > 0) CHECK(r.nodes[i] > r.nodes[i - 1]);
    }
  }
  CHECK_THROWS_AS(hermite_rule(513), ConfigError);
  CHECK_THROWS_AS(hermite_rule(0), ConfigError);
}

TEST_CASE("box rules match closed forms") {
  const GaussRule& r1 = legendre_rule(1);
  CHECK(r1.nodes[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(r1.weights[0] == doctest::Approx(2.0).epsilon(1e-14));

  const GaussRule& r5 = legendre_rule(5);
  double wsum = 0.0;
  for (double w : r5.weights) wsum += w;
  CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(legendre_rule(4097), ConfigError);
}

TEST_CASE("gaussian integrals against closed forms") {
  QuadratureSpec spec = default_spec();

  auto g1 = [](SpanD x) { return std::exp(-x[0] * x[0]); };
  QuadResult q = integrate_decay(g1, 1, spec, unit_hint(1));
  CHECK(q.converged);
  CHECK(q.value == doctest::Approx(kSqrtPi).epsilon(1e-12));

  auto g2 = [](SpanD x) { return std::exp(-0.5 * x[0] * x[0]); };
  q = integrate_decay(g2, 1, spec, unit_hint(1));
  CHECK(q.value == doctest::Approx(kSqrt2Pi).epsilon(1e-12));

  // cos modulation: integral cos(x) e^{-x^2} dx = sqrt(pi) e^{-1/4}
  auto g3 = [](SpanD x) { return std::cos(x[0]) * std::exp(-x[0] * x[0]); };
  q = integrate_decay(g3, 1, spec, unit_hint(1));
  CHECK(q.value == doctest::Approx(kSqrtPi * std::exp(-0.25)).epsilon(1e-12));
}

TEST_CASE("decay hint recenters and rescales the rule") {
  QuadratureSpec spec = default_spec();
  // N(3, 0.25): integral = sqrt(2 pi) * 0.5
  auto g = [](SpanD x) {
    double u = (x[0] - 3.0) / 0.5;
    return std::exp(-0.5 * u * u);
  };
  GhHint hint{to_vec({3.0}), to_vec({0.5})};
  QuadResult q = integrate_decay(g, 1, spec, hint);
  CHECK(q.converged);
  CHECK(q.value == doctest::Approx(kSqrt2Pi * 0.5).epsilon(1e-12));

  // Without the hint the narrow bump is still caught via refinement.
  QuadResult q2 = integrate_decay(g, 1, spec, unit_hint(1));
  CHECK(q2.value == doctest::Approx(kSqrt2Pi * 0.5).epsilon(1e-8));
}

TEST_CASE("non-gaussian decay converges through refinement") {
  QuadratureSpec spec = default_spec();
  // integral e^{-x^4} dx = 2 Gamma(5/4)
  auto g = [](SpanD x) { return std::exp(-std::pow(x[0], 4)); };
  QuadResult q = integrate_decay(g, 1, spec, unit_hint(1));
  CHECK(q.value == doctest::Approx(1.8128049541109541).epsilon(1e-8));
}

TEST_CASE("two-dimensional decay integral") {
  QuadratureSpec spec = default_spec();
  auto g = [](SpanD x) { return std::exp(-(x[0] * x[0] + x[1] * x[1])); };
  QuadResult q = integrate_decay(g, 2, spec, unit_hint(2));
  CHECK(q.converged);
  CHECK(q.value == doctest::Approx(kPi).epsilon(1e-12));
}

TEST_CASE("refinement reports failure instead of a silent bad value") {
  QuadratureSpec spec = default_spec();
  spec.base_nodes = 8;
  spec.max_refinements = 0;
  auto g = [](SpanD x) { return std::cos(50.0 * x[0]) * std::exp(-x[0] * x[0]); };
  QuadResult q = integrate_decay(g, 1, spec, unit_hint(1));
  CHECK(!q.converged);
  CHECK(q.error_estimate > spec.target_rel_tol);
}

TEST_CASE("box integrals match closed forms") {
  QuadratureSpec spec = default_spec();

  Box unit{to_vec({0.0}), to_vec({1.0})};
  auto cubic = [](SpanD x) { return x[0] * x[0] * x[0]; };
  QuadResult q = integrate_box(cubic, unit, spec);
  CHECK(q.converged);
  CHECK(q.value == doctest::Approx(0.25).epsilon(1e-13));

  Box half_wave{to_vec({0.0}), to_vec({kPi})};
  auto s = [](SpanD x) { return std::sin(x[0]); };
  q = integrate_box(s, half_wave, spec);
  CHECK(q.value == doctest::Approx(2.0).epsilon(1e-12));

  Box sym{to_vec({-1.0}), to_vec({1.0})};
  auto e = [](SpanD x) { return std::exp(x[0]); };
  q = integrate_box(e, sym, spec);
  CHECK(q.value == doctest::Approx(std::exp(1.0) - std::exp(-1.0)).epsilon(1e-13));

  Box sq{to_vec({0.0, 0.0}), to_vec({1.0, 1.0})};
  auto xy = [](SpanD x) { return x[0] * x[1]; };
  q = integrate_box(xy, sq, spec);
  CHECK(q.value == doctest::Approx(0.25).epsilon(1e-13));

  Box none{to_vec({1.0}), to_vec({0.0})};
  q = integrate_box(xy, none, spec);
  CHECK(q.converged);
  CHECK(q.value == 0.0);
}

TEST_CASE("integration is bitwise deterministic across thread counts") {
  QuadratureSpec spec = default_spec();
  auto g = [](SpanD x) {
    return std::exp(-x[0] * x[0] - 0.3 * x[1] * x[1]) * std::cos(x[0] - x[1]);
  };
  double reference = integrate_decay(g, 2, spec, unit_hint(2)).value;
#ifdef _OPENMP
  int saved = omp_get_max_threads();
  for (int nt : {1, 3, saved}) {
    omp_set_num_threads(nt);
    CHECK(integrate_decay(g, 2, spec, unit_hint(2)).value == reference);
  }
  omp_set_num_threads(saved);
#else
  CHECK(integrate_decay(g, 2, spec, unit_hint(2)).value == reference);
#endif
}

TEST_CASE("spec validation rejects out-of-range settings") {
  QuadratureSpec spec = default_spec();
  spec.validate();
  spec.base_nodes = 4;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = default_spec();
  spec.t_switch = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = default_spec();
  spec.target_rel_tol = 1.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("hint dimension mismatches are rejected") {
  QuadratureSpec spec = default_spec();
  auto g = [](SpanD) { return 1.0; };
  CHECK_THROWS_AS(integrate_decay(g, 2, spec, unit_hint(1)), DomainViolation);
  GhHint bad{to_vec({0.0}), to_vec({-1.0})};
  CHECK_THROWS_AS(integrate_decay(g, 1, spec, bad), DomainViolation);
}
