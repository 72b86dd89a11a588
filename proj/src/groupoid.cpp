#include "deform/groupoid.hpp"

#include <cmath>

namespace deform {

namespace {

constexpr double kBaseTol = 1e-9;

void check_base_match(SpanD a, SpanD b, const VecD& period) {
  if (a.size() != b.size())
    throw ComposabilityError("arrow base dimension mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    if (i < period.size() && period[i] > 0.0) d = wrap_pm(d / period[i]) * period[i];
    if (std::abs(d) > kBaseTol)
      throw ComposabilityError("arrows do not compose: source/target mismatch");
  }
}

}  // namespace

GroupoidModel make_pair_groupoid(int n, bool torus) {
  if (n < 1) throw ConfigError("pair groupoid needs at least one base axis");
  GroupoidModel m;
  m.key = torus ? (n == 1 ? "pair-t1" : "pair-t" + std::to_string(n))
                : "pair-r" + std::to_string(n);
  m.base_dim = n;
  m.fiber_dim = n;
  m.arrow_dim = 2 * n;
  if (torus) {
    m.base_period = VecD(n, 1.0);
    m.fiber_period = VecD(n, 1.0);  // source fibers are the torus itself
  }
  const VecD period = m.base_period;

  m.source = [n](SpanD a) { return VecD(a.begin() + n, a.end()); };
  m.target = [n](SpanD a) { return VecD(a.begin(), a.begin() + n); };
  m.unit_arrow = [n](SpanD x) {
    VecD a(2 * n);
    for (int i = 0; i < n; ++i) a[i] = a[n + i] = x[i];
    return a;
  };
  m.invert = [n](SpanD a) {
    VecD out(2 * n);
    for (int i = 0; i < n; ++i) {
      out[i] = a[n + i];
      out[n + i] = a[i];
    }
    return out;
  };
  m.multiply = [n, period](SpanD g, SpanD d) {
    check_base_match(g.subspan(n, n), d.subspan(0, n), period);
    VecD out(2 * n);
    for (int i = 0; i < n; ++i) {
      out[i] = g[i];
      out[n + i] = d[n + i];
    }
    return out;
  };
  m.fiber = [n, torus](SpanD a) {
    VecD xi(n);
    for (int i = 0; i < n; ++i)
      xi[i] = torus ? wrap_pm(a[i] - a[n + i]) : a[i] - a[n + i];
    return xi;
  };
  m.from_fiber = [n, torus](SpanD x, SpanD xi) {
    VecD a(2 * n);
    for (int i = 0; i < n; ++i) {
      a[i] = torus ? wrap01(x[i] + xi[i]) : x[i] + xi[i];
      a[n + i] = torus ? wrap01(x[i]) : x[i];
    }
    return a;
  };
  return m;
}

GroupoidModel make_abelian_group(int q) {
  if (q < 1) throw ConfigError("abelian group needs at least one axis");
  GroupoidModel m;
  m.key = "abelian-q" + std::to_string(q);
  m.base_dim = 0;
  m.fiber_dim = q;
  m.arrow_dim = q;
  m.source = [](SpanD) { return VecD{}; };
  m.target = [](SpanD) { return VecD{}; };
  m.unit_arrow = [q](SpanD) { return VecD(q, 0.0); };
  m.invert = [q](SpanD a) {
    VecD out(q);
    for (int i = 0; i < q; ++i) out[i] = -a[i];
    return out;
  };
  m.multiply = [q](SpanD g, SpanD d) {
    VecD out(q);
    for (int i = 0; i < q; ++i) out[i] = g[i] + d[i];
    return out;
  };
  m.fiber = [](SpanD a) { return VecD(a.begin(), a.end()); };
  m.from_fiber = [](SpanD, SpanD xi) { return VecD(xi.begin(), xi.end()); };
  return m;
}

GroupoidModel make_bundle_groupoid() {
  GroupoidModel m;
  m.key = "bundle-t1-q1";
  m.base_dim = 1;
  m.fiber_dim = 1;
  m.arrow_dim = 2;
  m.base_period = {1.0};
  const VecD period = m.base_period;
  m.source = [](SpanD a) { return to_vec({a[0]}); };
  m.target = [](SpanD a) { return to_vec({a[0]}); };
  m.unit_arrow = [](SpanD x) { return to_vec({wrap01(x[0]), 0.0}); };
  m.invert = [](SpanD a) { return to_vec({a[0], -a[1]}); };
  m.multiply = [period](SpanD g, SpanD d) {
    check_base_match(g.subspan(0, 1), d.subspan(0, 1), period);
    return to_vec({g[0], g[1] + d[1]});
  };
  m.fiber = [](SpanD a) { return to_vec({a[1]}); };
  m.from_fiber = [](SpanD x, SpanD xi) { return to_vec({wrap01(x[0]), xi[0]}); };
  return m;
}

GroupoidModel groupoid_by_key(const std::string& key) {
  if (key == "pair-r1") return make_pair_groupoid(1, false);
  if (key == "pair-r2") return make_pair_groupoid(2, false);
  if (key == "pair-t1") return make_pair_groupoid(1, true);
  if (key == "abelian-q1") return make_abelian_group(1);
  if (key == "bundle-t1-q1") return make_bundle_groupoid();
  throw ConfigError("unknown groupoid instance: " + key);
}

TangentGroupoidModel::TangentGroupoidModel(GroupoidModel model) : g(std::move(model)) {
  if (g.base_dim < 0 || g.fiber_dim < 1 || g.arrow_dim < 1)
    throw ConfigError("groupoid model dimensions are malformed");
  if (!g.source || !g.target || !g.unit_arrow || !g.multiply || !g.invert ||
      !g.fiber || !g.from_fiber)
    throw ConfigError("groupoid model is missing structure maps");
}

VecD TangentGroupoidModel::from_dnc(SpanD x, SpanD xi, double t) const {
  if (!(t > 0.0) || t > 1.0)
    throw DomainViolation("arrow reconstruction needs t in (0, 1]");
  VecD scaled(xi.size());
  for (std::size_t i = 0; i < xi.size(); ++i) scaled[i] = t * xi[i];
  return g.from_fiber(x, scaled);
}

std::pair<VecD, VecD> TangentGroupoidModel::dnc_coords(SpanD arrow, double t) const {
  if (!(t >= 1e-300) || t > 1.0)
    throw DomainViolation("chart coordinates need t in [1e-300, 1]");
  VecD xi = g.fiber(arrow);
  for (double& v : xi) v /= t;
  return {g.source(arrow), std::move(xi)};
}

VecD TangentGroupoidModel::multiply(SpanD x, SpanD xi, SpanD eta, double t) const {
  const int q = g.fiber_dim;
  if (static_cast<int>(xi.size()) != q || static_cast<int>(eta.size()) != q)
    throw DomainViolation("chart product fiber dimension mismatch");
  if (t < 0.0 || t > 1.0)
    throw DomainViolation("chart product needs t in [0, 1]");
  if (t == 0.0) {
    VecD out(q);
    for (int i = 0; i < q; ++i) out[i] = xi[i] + eta[i];
    return out;
  }
  VecD delta = from_dnc(x, eta, t);
  VecD gamma = from_dnc(g.target(delta), xi, t);
  VecD prod = g.multiply(gamma, delta);
  VecD out = g.fiber(prod);
  for (double& v : out) v /= t;
  return out;
}

PairMorphism TangentGroupoidModel::multiplication_morphism() const {
  const int p = g.base_dim, q = g.fiber_dim;
  PairMorphism f;
  f.in_base = p;
  f.out_base = p;
  f.in_normal = 2 * q;
  f.out_normal = q;
  GroupoidModel gm = g;
  f.f_base = [](SpanD x, SpanD) { return VecD(x.begin(), x.end()); };
  f.f_normal = [gm, q](SpanD x, SpanD zeta) {
    VecD eta(zeta.begin() + q, zeta.end());
    VecD delta = gm.from_fiber(x, eta);
    VecD gamma = gm.from_fiber(gm.target(delta), zeta.subspan(0, q));
    return gm.fiber(gm.multiply(gamma, delta));
  };
  f.jac_normal = [q](SpanD) {
    Mat j(q, 2 * q);
    for (int i = 0; i < q; ++i) {
      j.at(i, i) = 1.0;
      j.at(i, q + i) = 1.0;
    }
    return j;
  };
  return f;
}

VecD TangentGroupoidModel::multiply_via_functor(SpanD x, SpanD xi, SpanD eta,
                                                double t) const {
  const int q = g.fiber_dim;
  if (static_cast<int>(xi.size()) != q || static_cast<int>(eta.size()) != q)
    throw DomainViolation("chart product fiber dimension mismatch");
  VecD joint(2 * q);
  for (int i = 0; i < q; ++i) {
    joint[i] = xi[i];
    joint[q + i] = eta[i];
  }
  BlowupCoords out = transition_map(multiplication_morphism(), x, joint, t);
  return out.xi;
}

std::pair<VecD, VecD> TangentGroupoidModel::invert_chart(SpanD x, SpanD xi,
                                                         double t) const {
  if (t == 0.0) {
    VecD neg(xi.size());
    for (std::size_t i = 0; i < xi.size(); ++i) neg[i] = -xi[i];
    return {VecD(x.begin(), x.end()), std::move(neg)};
  }
  return dnc_coords(g.invert(from_dnc(x, xi, t)), t);
}

double TangentGroupoidModel::haar_weight(double t) const {
  if (!(t >= 1e-300) || t > 1.0)
    throw DomainViolation("fiber measure rescaling needs t in [1e-300, 1]");
  double w = 1.0;
  for (int i = 0; i < g.fiber_dim; ++i) w /= t;
  return w;
}

}  // namespace deform
