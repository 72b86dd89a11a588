#include "deform/convolution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "deform/parallel.hpp"

namespace deform {
namespace {

// Shared lazy-evaluation cache. Values are deterministic functions of the
// key, so concurrent fills can only ever race to insert the same number.
struct MemoTable {
  std::mutex mu;
  std::map<std::vector<std::uint64_t>, double> values;
};

std::vector<std::uint64_t> point_key(SpanD x, SpanD xi, double t) {
  std::vector<std::uint64_t> key;
  key.reserve(x.size() + xi.size() + 1);
  auto push = [&key](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    key.push_back(bits);
  };
  for (double v : x) push(v);
  for (double v : xi) push(v);
  push(t);
  return key;
}

double meta_entry(const VecD& v, int a, double fallback) {
  return a < static_cast<int>(v.size()) ? v[a] : fallback;
}

// Truncation box for the right slot's arrow coordinate, or nullopt when
// nothing is declared and the decay rule must carry the integral alone.
std::optional<Box> right_slice_box(const TwoVariableField& F, SpanD x,
                                   double t) {
  if (F.right_support)
    return slice_fiber_box(*F.right_support, x, t, F.right_meta.x_period);
  const double r = F.right_meta.xi_decay_radius;
  if (!(r > 0.0) || !std::isfinite(r)) return std::nullopt;
  Box b;
  b.lo.resize(F.fiber_dim);
  b.hi.resize(F.fiber_dim);
  for (int a = 0; a < F.fiber_dim; ++a) {
    const double c = meta_entry(F.right_meta.xi_center, a, 0.0);
    b.lo[a] = t * (c - r);
    b.hi[a] = t * (c + r);
  }
  return b;
}

void check_model_dims(const TangentGroupoidModel& tg, int base_dim,
                      int fiber_dim, const char* what) {
  if (base_dim != tg.base_dim() || fiber_dim != tg.fiber_dim())
    throw DomainViolation(std::string(what) +
                          " dimensions do not match groupoid model '" +
                          tg.g.key + "'");
}

FieldMeta composed_meta(const FieldMeta& lm, const FieldMeta& rm, int q) {
  FieldMeta m;
  m.xi_center.resize(q);
  m.xi_scale.resize(q);
  for (int a = 0; a < q; ++a) {
    m.xi_center[a] = meta_entry(lm.xi_center, a, 0.0) +
                     meta_entry(rm.xi_center, a, 0.0);
    m.xi_scale[a] = std::hypot(meta_entry(lm.xi_scale, a, 1.0),
                               meta_entry(rm.xi_scale, a, 1.0));
  }
  m.xi_decay_radius = lm.xi_decay_radius + rm.xi_decay_radius;
  m.x_window = rm.x_window.dim() > 0 ? rm.x_window : lm.x_window;
  m.x_period = rm.x_period.empty() ? lm.x_period : rm.x_period;
  m.instance = rm.instance.empty() ? lm.instance : rm.instance;
  return m;
}

double m_rc_value(const TangentGroupoidModel& tg, const TwoVariableField& F,
                  const QuadratureSpec& spec, SpanD x, SpanD xi, double t) {
  const int q = F.fiber_dim;
  const GhHint hint = product_hint(F.left_meta, F.right_meta, xi, q);
  if (t == 0.0) {
    auto fn = [&F, x, xi, q](SpanD eta) {
      VecD left(q);
      for (int a = 0; a < q; ++a) left[a] = xi[a] - eta[a];
      const double lv = F.boundary(x, left, eta);
      return lv;
    };
    return integrate_blowup_fiber(fn, q, spec, 0.0, std::nullopt,
                                  tg.g.fiber_period, hint)
        .value;
  }
  const VecD gamma0 = tg.from_dnc(x, xi, t);
  auto fn = [&tg, &F, &gamma0, x, t](SpanD eta) {
    const VecD delta = tg.from_dnc(x, eta, t);
    const VecD arrow = tg.g.multiply(gamma0, tg.g.invert(delta));
    return F.interior(arrow, delta, t);
  };
  std::optional<Box> box;
  if (t > spec.t_switch) box = right_slice_box(F, x, t);
  return integrate_blowup_fiber(fn, q, spec, t, box, tg.g.fiber_period, hint)
      .value;
}

}  // namespace

GhHint meta_hint(const FieldMeta& meta, int q) {
  GhHint h;
  h.center.resize(q);
  h.scale.resize(q);
  for (int a = 0; a < q; ++a) {
    h.center[a] = meta_entry(meta.xi_center, a, 0.0);
    h.scale[a] = std::max(meta_entry(meta.xi_scale, a, 1.0), 1e-9);
  }
  return h;
}

GhHint product_hint(const FieldMeta& left, const FieldMeta& right, SpanD xi,
                    int q) {
  GhHint h;
  h.center.resize(q);
  h.scale.resize(q);
  for (int a = 0; a < q; ++a) {
    const double cl = meta_entry(left.xi_center, a, 0.0);
    const double sl = std::max(meta_entry(left.xi_scale, a, 1.0), 1e-9);
    const double cr = meta_entry(right.xi_center, a, 0.0);
    const double sr = std::max(meta_entry(right.xi_scale, a, 1.0), 1e-9);
    const double wl = 1.0 / (sl * sl);
    const double wr = 1.0 / (sr * sr);
    const double shifted = a < static_cast<int>(xi.size()) ? xi[a] - cl : -cl;
    h.center[a] = (shifted * wl + cr * wr) / (wl + wr);
    h.scale[a] = std::sqrt(1.0 / (wl + wr));
  }
  return h;
}

Box slice_fiber_box(const ConicCompactSet& K, SpanD x, double t,
                    const VecD& period) {
  const int p = K.base_dim;
  if (static_cast<int>(x.size()) != p)
    throw DomainViolation("slice query base dimension mismatch");
  const VecD xw = wrap_base(x, period);
  Box acc;
  bool any = false;
  for (const ConicPiece& pc : K.pieces) {
    if (t < pc.t_lo || t > pc.t_hi) continue;
    bool in_x = true;
    for (int a = 0; a < p && in_x; ++a)
      in_x = xw[a] >= pc.m_box.lo[a] && xw[a] <= pc.m_box.hi[a];
    if (!in_x) continue;
    const Box fb = pc.m_box.sub(p, pc.m_box.dim() - p);
    acc = any ? Box::hull(acc, fb) : fb;
    any = true;
  }
  if (!any) {
    const int q =
        K.pieces.empty() ? 1 : K.pieces.front().m_box.dim() - p;
    acc.lo.assign(q, 1.0);
    acc.hi.assign(q, 0.0);
  }
  return acc;
}

QuadResult integrate_blowup_fiber(const std::function<double(SpanD eta)>& fn,
                                  int q, const QuadratureSpec& spec, double t,
                                  const std::optional<Box>& arrow_box,
                                  const VecD& fiber_period, const GhHint& hint) {
  if (t == 0.0 || t <= spec.t_switch || !arrow_box)
    return integrate_decay(fn, q, spec, hint);
  Box box = *arrow_box;
  for (int a = 0; a < q && a < static_cast<int>(fiber_period.size()); ++a) {
    const double P = fiber_period[a];
    if (P > 0.0) {
      box.lo[a] = std::max(box.lo[a], -0.5 * P);
      box.hi[a] = std::min(box.hi[a], 0.5 * P);
    }
  }
  if (box.empty()) return {0.0, 0.0, 0, true};
  auto in_arrow = [&fn, t, q](SpanD m) {
    VecD eta(q);
    for (int a = 0; a < q; ++a) eta[a] = m[a] / t;
    return fn(eta);
  };
  QuadResult r = integrate_box(in_arrow, box, spec);
  double chart = 1.0;
  for (int a = 0; a < q; ++a) chart /= t;
  r.value *= chart;  // single post-sum factor keeps rounding out of the sum
  return r;
}

TwoVariableField separated_field(const TangentGroupoidModel& tg,
                                 const SchwartzDncField& f,
                                 const SchwartzDncField& g) {
  check_model_dims(tg, f.base_dim, f.normal_dim, "left factor");
  check_model_dims(tg, g.base_dim, g.normal_dim, "right factor");
  if (f.meta.instance != tg.g.key || g.meta.instance != tg.g.key)
    throw ComposabilityError("groupoid instance mismatch: factors tagged '" +
                             f.meta.instance + "' / '" + g.meta.instance +
                             "' cannot compose on model '" + tg.g.key + "'");
  TwoVariableField F;
  F.base_dim = f.base_dim;
  F.fiber_dim = f.normal_dim;
  F.boundary = [f, g](SpanD x, SpanD xi, SpanD eta) {
    const double lv = f.eval(x, xi, 0.0);
    if (lv == 0.0) return 0.0;
    return lv * g.eval(x, eta, 0.0);
  };
  const TangentGroupoidModel model = tg;
  F.interior = [f, g, model](SpanD gamma, SpanD delta, double t) {
    const auto [xl, xil] = model.dnc_coords(gamma, t);
    const double lv = f.eval(xl, xil, t);
    if (lv == 0.0) return 0.0;
    const auto [xr, xir] = model.dnc_coords(delta, t);
    return lv * g.eval(xr, xir, t);
  };
  F.left_meta = f.meta;
  F.right_meta = g.meta;
  F.left_support = f.support;
  F.right_support = g.support;
  return F;
}

QuadResult fiber_integrate(const TangentGroupoidModel& tg,
                           const TwoVariableField& F,
                           const QuadratureSpec& spec, SpanD x, SpanD xi,
                           double t) {
  spec.validate();
  check_model_dims(tg, F.base_dim, F.fiber_dim, "two-variable field");
  if (static_cast<int>(x.size()) != F.base_dim ||
      static_cast<int>(xi.size()) != F.fiber_dim)
    throw DomainViolation("fiber integration point dimension mismatch");
  if (!(t >= 0.0) || t > 1.0)
    throw DomainViolation("deformation parameter must lie in [0, 1]");
  const int q = F.fiber_dim;
  const GhHint hint = meta_hint(F.right_meta, q);
  if (t == 0.0) {
    auto fn = [&F, x, xi](SpanD eta) { return F.boundary(x, xi, eta); };
    return integrate_decay(fn, q, spec, hint);
  }
  VecD m(q);
  for (int a = 0; a < q; ++a) m[a] = t * xi[a];
  auto fn = [&tg, &F, &m, x, t](SpanD eta) {
    const VecD delta = tg.from_dnc(x, eta, t);
    const VecD gamma = tg.g.from_fiber(tg.g.target(delta), m);
    return F.interior(gamma, delta, t);
  };
  std::optional<Box> box;
  if (t > spec.t_switch) box = right_slice_box(F, x, t);
  return integrate_blowup_fiber(fn, q, spec, t, box, tg.g.fiber_period, hint);
}

ConicCompactSet compose_supports(const ConicCompactSet& left,
                                 const ConicCompactSet& right,
                                 const VecD& fiber_period) {
  if (left.base_dim != right.base_dim)
    throw DomainViolation("support composition base dimension mismatch");
  const int p = left.base_dim;
  std::vector<ConicPiece> pieces;
  for (const ConicPiece& a : left.pieces) {
    const Box af = a.m_box.sub(p, a.m_box.dim() - p);
    for (const ConicPiece& b : right.pieces) {
      const double t_lo = std::max(a.t_lo, b.t_lo);
      const double t_hi = std::min(a.t_hi, b.t_hi);
      if (t_lo > t_hi) continue;
      const Box bx = b.m_box.sub(0, p);
      const Box bf = b.m_box.sub(p, b.m_box.dim() - p);
      Box sum = Box::minkowski_sum(af, bf);
      for (int c = 0;
           c < sum.dim() && c < static_cast<int>(fiber_period.size()); ++c) {
        const double P = fiber_period[c];
        if (P > 0.0 && (sum.lo[c] < -0.5 * P || sum.hi[c] > 0.5 * P)) {
          sum.lo[c] = -0.5 * P;  // wrapped intervals can land anywhere
          sum.hi[c] = 0.5 * P;
        }
      }
      ConicPiece out;
      out.t_lo = t_lo;
      out.t_hi = t_hi;
      out.m_box.lo = bx.lo;
      out.m_box.hi = bx.hi;
      out.m_box.lo.insert(out.m_box.lo.end(), sum.lo.begin(), sum.lo.end());
      out.m_box.hi.insert(out.m_box.hi.end(), sum.hi.begin(), sum.hi.end());
      pieces.push_back(std::move(out));
    }
  }
  return ConicCompactSet::from_pieces(p, std::move(pieces));
}

SchwartzDncField m_rc(const TangentGroupoidModel& tg, const TwoVariableField& F,
                      const QuadratureSpec& spec) {
  spec.validate();
  check_model_dims(tg, F.base_dim, F.fiber_dim, "two-variable field");
  SchwartzDncField out;
  out.base_dim = F.base_dim;
  out.normal_dim = F.fiber_dim;
  out.meta = composed_meta(F.left_meta, F.right_meta, F.fiber_dim);
  // The output evaluates through wrapping charts, so on circle source fibers
  // it is genuinely periodic in the arrow coordinate; raw configured fields
  // are not (their profiles cut off in the unwrapped coordinate).
  out.meta.xi_period = tg.g.fiber_period;
  if (F.left_support && F.right_support)
    out.support =
        compose_supports(*F.left_support, *F.right_support, tg.g.fiber_period);
  auto memo = std::make_shared<MemoTable>();
  const TangentGroupoidModel model = tg;
  out.eval = [model, F, spec, memo](SpanD x, SpanD xi, double t) {
    auto key = point_key(x, xi, t);
    {
      std::lock_guard<std::mutex> lock(memo->mu);
      auto it = memo->values.find(key);
      if (it != memo->values.end()) return it->second;
    }
    const double value = m_rc_value(model, F, spec, x, xi, t);
    std::lock_guard<std::mutex> lock(memo->mu);
    return memo->values.emplace(std::move(key), value).first->second;
  };
  return out;
}

SchwartzDncField convolve(const TangentGroupoidModel& tg,
                          const SchwartzDncField& f, const SchwartzDncField& g,
                          const QuadratureSpec& spec) {
  TwoVariableField F = separated_field(tg, f, g);
  if (!F.left_support || !F.right_support)
    throw ConfigError("convolution factors must declare conic supports");
  return m_rc(tg, F, spec);
}

BundleSchwartzField evaluate_e0(const SchwartzDncField& f) {
  BundleSchwartzField out;
  out.base_dim = f.base_dim;
  out.fiber_dim = f.normal_dim;
  out.meta = f.meta;
  const SchwartzDncField field = f;
  out.eval = [field](SpanD x, SpanD xi) { return field.eval(x, xi, 0.0); };
  if (f.support && f.base_dim > 0)
    out.base_support = f.support->ambient_hull().sub(0, f.base_dim);
  return out;
}

GroupoidFunction evaluate_et(const TangentGroupoidModel& tg,
                             const SchwartzDncField& f, double t) {
  check_model_dims(tg, f.base_dim, f.normal_dim, "field");
  if (!(t >= 0.0) || t > 1.0)
    throw DomainViolation("slice parameter must lie in [0, 1]");
  GroupoidFunction out;
  out.model = tg.g;
  out.t = t;
  if (t == 0.0) {
    const BundleSchwartzField e0 = evaluate_e0(f);
    const GroupoidModel g = tg.g;
    out.eval = [e0, g](SpanD arrow) {
      const VecD x = g.source(arrow);
      const VecD v = g.fiber(arrow);
      return e0.eval(x, v);
    };
    return out;
  }
  const TangentGroupoidModel model = tg;
  const SchwartzDncField field = f;
  out.eval = [model, field, t](SpanD arrow) {
    const auto [x, xi] = model.dnc_coords(arrow, t);
    return field.eval(x, xi, t);
  };
  return out;
}

double slice_product(const TangentGroupoidModel& tg, const GroupoidFunction& a,
                     const GroupoidFunction& b, SpanD x, SpanD xi,
                     const QuadratureSpec& spec, const GhHint& hint,
                     const std::optional<Box>& arrow_box) {
  spec.validate();
  if (a.model.key != tg.g.key || b.model.key != tg.g.key)
    throw ComposabilityError("slice functions live on instance '" +
                             a.model.key + "' / '" + b.model.key +
                             "', not on '" + tg.g.key + "'");
  if (a.t != b.t)
    throw ComposabilityError("slice parameters differ; nothing to compose");
  const double t = a.t;
  if (!(t > 0.0))
    throw DomainViolation(
        "slice product needs t > 0; boundary slices compose fiberwise");
  const int q = tg.fiber_dim();
  const VecD gamma0 = tg.from_dnc(x, xi, t);
  auto fn = [&tg, &a, &b, &gamma0, x, t](SpanD eta) {
    const VecD delta = tg.from_dnc(x, eta, t);
    const VecD arrow = tg.g.multiply(gamma0, tg.g.invert(delta));
    const double lv = a.eval(arrow);
    if (lv == 0.0) return 0.0;
    return lv * b.eval(delta);
  };
  return integrate_blowup_fiber(fn, q, spec, t, arrow_box, tg.g.fiber_period,
                                hint)
      .value;
}

BundleSchwartzField bundle_convolve(const BundleSchwartzField& f,
                                    const BundleSchwartzField& g,
                                    const QuadratureSpec& spec) {
  spec.validate();
  if (f.base_dim != g.base_dim || f.fiber_dim != g.fiber_dim)
    throw DomainViolation("bundle convolution dimension mismatch");
  if (f.meta.instance != g.meta.instance)
    throw ComposabilityError("bundle instance mismatch: '" + f.meta.instance +
                             "' vs '" + g.meta.instance + "'");
  BundleSchwartzField out;
  out.base_dim = f.base_dim;
  out.fiber_dim = f.fiber_dim;
  out.meta = composed_meta(f.meta, g.meta, f.fiber_dim);
  if (f.base_support && g.base_support)
    out.base_support = Box::intersect(*f.base_support, *g.base_support);
  else if (f.base_support)
    out.base_support = f.base_support;
  else if (g.base_support)
    out.base_support = g.base_support;
  auto memo = std::make_shared<MemoTable>();
  const BundleSchwartzField lf = f;
  const BundleSchwartzField rg = g;
  const int q = f.fiber_dim;
  out.eval = [lf, rg, spec, memo, q](SpanD x, SpanD xi) {
    auto key = point_key(x, xi, 0.0);
    {
      std::lock_guard<std::mutex> lock(memo->mu);
      auto it = memo->values.find(key);
      if (it != memo->values.end()) return it->second;
    }
    const GhHint hint = product_hint(lf.meta, rg.meta, xi, q);
    auto fn = [&lf, &rg, x, xi, q](SpanD eta) {
      VecD left(q);
      for (int a = 0; a < q; ++a) left[a] = xi[a] - eta[a];
      const double lv = lf.eval(x, left);
      if (lv == 0.0) return 0.0;
      return lv * rg.eval(x, eta);
    };
    const double value = integrate_decay(fn, q, spec, hint).value;
    std::lock_guard<std::mutex> lock(memo->mu);
    return memo->values.emplace(std::move(key), value).first->second;
  };
  return out;
}

double kernel_composition_oracle(const TangentGroupoidModel& tg,
                                 const SchwartzDncField& f,
                                 const SchwartzDncField& g, double t, int n,
                                 const QuadratureSpec& spec) {
  if (tg.g.base_period.empty() || tg.g.arrow_dim != 2 * tg.g.base_dim)
    throw ConfigError(
        "kernel cross-check requires the pair groupoid over a periodic base");
  if (tg.base_dim() != 1)
    throw ConfigError("kernel cross-check runs on a one-dimensional base");
  if (!(t > 0.0) || t > 1.0)
    throw DomainViolation("kernel cross-check needs t in (0, 1]");
  if (n < 64)
    throw ResolutionError(
        "kernel lattice below 64 points aliases the fiber scale");
  if (n > 2048) throw ConfigError("kernel lattice above 2048 points");
  const SchwartzDncField conv = convolve(tg, f, g, spec);
  const double period = tg.g.base_period[0];
  const double step = period / n;
  const std::size_t nn = static_cast<std::size_t>(n) * n;
  std::vector<double> A(nn), B(nn), C(nn, 0.0), D(nn);
  auto fill = [&](std::vector<double>& M,
                  const std::function<double(SpanD, SpanD, double)>& eval) {
    parallel_fill(nn, [&](std::size_t idx) {
      const int i = static_cast<int>(idx / n);
      const int j = static_cast<int>(idx % n);
      const double xj = j * step;
      const double fiber = wrap_pm((i - j) * step / period) * period;
      const double xi = fiber / t;
      M[idx] = eval(SpanD{&xj, 1}, SpanD{&xi, 1}, t);
    });
  };
  fill(A, f.eval);
  fill(B, g.eval);
  fill(D, conv.eval);
  const double weight = step / t;  // rescaled fiber measure of one cell
  parallel_fill(static_cast<std::size_t>(n), [&](std::size_t i) {
    double* row = C.data() + i * n;
    for (int b = 0; b < n; ++b) {
      const double aib = A[i * n + b];
      if (aib == 0.0) continue;
      const double* brow = B.data() + static_cast<std::size_t>(b) * n;
      for (int j = 0; j < n; ++j) row[j] += aib * brow[j];
    }
    for (int j = 0; j < n; ++j) row[j] *= weight;
  });
  double peak = 0.0;
  for (std::size_t idx = 0; idx < nn; ++idx)
    peak = std::max({peak, std::abs(C[idx]), std::abs(D[idx])});
  if (peak == 0.0) return 0.0;
  double dev = 0.0;
  for (std::size_t idx = 0; idx < nn; ++idx) {
    const double mag = std::max(std::abs(C[idx]), std::abs(D[idx]));
    if (mag < 1e-8 * peak) continue;
    dev = std::max(dev, std::abs(C[idx] - D[idx]) / mag);
  }
  return dev;
}

}  // namespace deform
