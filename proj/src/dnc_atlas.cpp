#include "deform/dnc_atlas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace deform {
namespace {

void require_t_range(double t) {
  if (!(t >= 0.0) || t > 1.0)
    throw DomainViolation("deformation parameter t must lie in [0, 1], got " +
                          std::to_string(t));
}

VecD squash(SpanD x, SpanD xi, double t) {
  VecD m(x.begin(), x.end());
  for (double v : xi) m.push_back(t * v);
  return m;
}

}  // namespace

DncPoint psi_forward(SpanD x, SpanD xi, double t) {
  require_t_range(t);
  if (t == 0.0) return BoundaryPoint{to_vec(x), to_vec(xi)};
  return InteriorPoint{squash(x, xi, t), t};
}

BlowupCoords psi_inverse(const DncPoint& p, int base_dim) {
  if (const auto* b = std::get_if<BoundaryPoint>(&p)) {
    if (static_cast<int>(b->x.size()) != base_dim)
      throw DomainViolation("boundary point has wrong base dimension");
    return {b->x, b->xi, 0.0};
  }
  const auto& in = std::get<InteriorPoint>(p);
  require_t_range(in.t);
  if (in.t == 0.0) throw DomainViolation("interior point with t = 0");
  if (static_cast<int>(in.m.size()) < base_dim)
    throw DomainViolation("interior point has fewer coordinates than base_dim");
  BlowupCoords out;
  out.x.assign(in.m.begin(), in.m.begin() + base_dim);
  out.xi.reserve(in.m.size() - base_dim);
  for (std::size_t i = base_dim; i < in.m.size(); ++i)
    out.xi.push_back(in.m[i] / in.t);
  out.t = in.t;
  return out;
}

SlicePair SlicePair::from_box(int p, int q, Box ambient) {
  if (p < 0 || q < 1) throw DomainViolation("slice pair needs p >= 0, q >= 1");
  if (ambient.dim() != p + q)
    throw DomainViolation("slice pair box dimension mismatch");
  SlicePair s;
  s.base_dim = p;
  s.normal_dim = q;
  s.domain_test = [b = std::move(ambient)](SpanD x, SpanD xi_m) {
    VecD m(x.begin(), x.end());
    m.insert(m.end(), xi_m.begin(), xi_m.end());
    return b.contains(m);
  };
  return s;
}

bool omega_contains(const SlicePair& slice, SpanD x, SpanD xi, double t) {
  if (!(t >= 0.0) || t > 1.0) return false;
  if (static_cast<int>(x.size()) != slice.base_dim ||
      static_cast<int>(xi.size()) != slice.normal_dim)
    return false;
  VecD txi = squash({}, xi, t);
  return slice.domain_test(x, txi);
}

bool omega_contains(const Box& ambient, SpanD x, SpanD xi, double t) {
  if (!(t >= 0.0) || t > 1.0) return false;
  return ambient.contains(squash(x, xi, t));
}

PairMorphism& PairMorphism::install_fd_jacobian() {
  auto fn = f_normal;
  int q_in = in_normal, q_out = out_normal;
  jac_normal = [fn, q_in, q_out](SpanD x) {
    double h = 1e-5 * (1.0 + norm_inf(x));
    Mat j(q_out, q_in);
    VecD e(q_in, 0.0);
    for (int c = 0; c < q_in; ++c) {
      e[c] = h;
      VecD plus = fn(x, e);
      e[c] = -h;
      VecD minus = fn(x, e);
      e[c] = 0.0;
      if (static_cast<int>(plus.size()) != q_out)
        throw DomainViolation("f_normal output dimension mismatch");
      for (int r = 0; r < q_out; ++r) j.at(r, c) = (plus[r] - minus[r]) / (2.0 * h);
    }
    return j;
  };
  return *this;
}

PairMorphism compose(const PairMorphism& g, const PairMorphism& f) {
  if (f.out_base != g.in_base || f.out_normal != g.in_normal)
    throw DomainViolation("morphism composition dimension mismatch");
  PairMorphism h;
  h.in_base = f.in_base;
  h.in_normal = f.in_normal;
  h.out_base = g.out_base;
  h.out_normal = g.out_normal;
  auto fb = f.f_base, fnorm = f.f_normal;
  auto gb = g.f_base, gnorm = g.f_normal;
  h.f_base = [fb, fnorm, gb](SpanD x, SpanD xi) {
    VecD y = fb(x, xi);
    VecD eta = fnorm(x, xi);
    return gb(y, eta);
  };
  h.f_normal = [fb, fnorm, gnorm](SpanD x, SpanD xi) {
    VecD y = fb(x, xi);
    VecD eta = fnorm(x, xi);
    return gnorm(y, eta);
  };
  if (f.jac_normal && g.jac_normal) {
    auto jf = f.jac_normal, jg = g.jac_normal;
    int qin = f.in_normal;
    h.jac_normal = [fb, jf, jg, qin](SpanD x) {
      VecD zero(qin, 0.0);
      VecD y = fb(x, zero);
      return matmul(jg(y), jf(x));
    };
  }
  return h;
}

BlowupCoords transition_map(const PairMorphism& f, SpanD x, SpanD xi, double t) {
  require_t_range(t);
  BlowupCoords out;
  out.t = t;
  if (t == 0.0) {
    VecD zero(f.in_normal, 0.0);
    out.x = f.f_base(x, zero);
    if (!f.jac_normal)
      throw DomainViolation("boundary transition requires jac_normal");
    out.xi = f.jac_normal(x).apply(xi);
    return out;
  }
  if (t < 1e-300)
    throw DomainViolation("deformation parameter too small to rescale");
  if (t < 1e-8) {
    // Quotient form f_normal(x, t*xi)/t would be pure roundoff here; use
    // J.xi + (t/2) * d^2/ds^2 f_normal(x, s*xi)|_0 instead (the slice
    // constraint kills the constant term, so this is exact to O(t^2)).
    if (!f.jac_normal)
      throw DomainViolation("small-t transition requires jac_normal");
    VecD zero(f.in_normal, 0.0);
    out.x = f.f_base(x, squash({}, xi, t));
    VecD lin = f.jac_normal(x).apply(xi);
    const double h = 1e-4;
    VecD plus = f.f_normal(x, squash({}, xi, h));
    VecD minus = f.f_normal(x, squash({}, xi, -h));
    out.xi = lin;
    for (std::size_t i = 0; i < out.xi.size(); ++i)
      out.xi[i] += 0.5 * t * (plus[i] + minus[i]) / (h * h);
    return out;
  }
  VecD txi = squash({}, xi, t);
  out.x = f.f_base(x, txi);
  out.xi = f.f_normal(x, txi);
  for (double& v : out.xi) v /= t;
  return out;
}

BlowupCoords transition_map_checked(const PairMorphism& f, const SlicePair& source,
                                    SpanD x, SpanD xi, double t) {
  require_t_range(t);
  if (!omega_contains(source, x, xi, t))
    throw DomainViolation("point " + fmt_point(x, xi, t) +
                          " outside the chart domain");
  VecD zero(f.in_normal, 0.0);
  VecD on_slice = f.f_normal(x, zero);
  if (norm_inf(on_slice) > 1e-10 * (1.0 + norm_inf(x)))
    throw DomainViolation("morphism does not preserve the slice at x = " +
                          fmt_vec(x));
  return transition_map(f, x, xi, t);
}

DncPoint dnc_functor_apply(const PairMorphism& f, const DncPoint& p) {
  if (const auto* b = std::get_if<BoundaryPoint>(&p)) {
    BlowupCoords out = transition_map(f, b->x, b->xi, 0.0);
    return BoundaryPoint{out.x, out.xi};
  }
  const auto& in = std::get<InteriorPoint>(p);
  require_t_range(in.t);
  if (in.t == 0.0) throw DomainViolation("interior point with t = 0");
  if (static_cast<int>(in.m.size()) != f.in_base + f.in_normal)
    throw DomainViolation("interior point dimension mismatch");
  SpanD m(in.m);
  SpanD mx = m.subspan(0, f.in_base);
  SpanD mxi = m.subspan(f.in_base);
  VecD y = f.f_base(mx, mxi);
  VecD eta = f.f_normal(mx, mxi);
  return InteriorPoint{vec_concat(y, eta), in.t};
}

SmoothnessReport smoothness_probe(const PairMorphism& f, SpanD x, SpanD xi,
                                  double h0, int levels) {
  if (levels < 4) throw DomainViolation("smoothness probe needs >= 4 levels");
  SmoothnessReport rep;
  BlowupCoords at0 = transition_map(f, x, xi, 0.0);
  rep.boundary_value = at0.xi;
  const double floor = 1e-12 * (1.0 + norm_inf(at0.xi));

  std::vector<VecD> d(levels);
  double h = h0;
  for (int j = 0; j < levels; ++j, h *= 0.5) {
    VecD phi = transition_map(f, x, xi, h).xi;
    d[j] = vec_scale(vec_sub(phi, at0.xi), 1.0 / h);
  }

  bool quotients_flat = true;
  for (int j = 0; j + 1 < levels; ++j)
    if (norm_inf(vec_sub(d[j + 1], d[j])) > floor) quotients_flat = false;

  std::vector<VecD> r(levels - 1);
  for (int j = 0; j + 1 < levels; ++j)
    r[j] = vec_sub(vec_scale(d[j + 1], 2.0), d[j]);
  for (std::size_t j = 0; j + 1 < r.size(); ++j)
    rep.gaps.push_back(norm_inf(vec_sub(r[j + 1], r[j])));

  rep.t_derivative = quotients_flat ? d[levels - 1] : r[levels - 2];

  std::vector<double> orders;
  for (std::size_t j = 0; j + 1 < rep.gaps.size(); ++j)
    if (rep.gaps[j] > floor && rep.gaps[j + 1] > floor)
      orders.push_back(std::log2(rep.gaps[j] / rep.gaps[j + 1]));

  rep.saturated = quotients_flat || orders.empty();
  if (rep.saturated) {
    rep.observed_order = std::numeric_limits<double>::infinity();
  } else {
    std::sort(orders.begin(), orders.end());
    rep.observed_order = orders[orders.size() / 2];
  }
  rep.ok = rep.saturated || rep.observed_order >= 1.5;
  return rep;
}

}  // namespace deform
