#include "deform/schwartz.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <limits>

#include "deform/parallel.hpp"
#include "deform/rng.hpp"

namespace deform {

double smooth01(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  double a = std::exp(-1.0 / u);
  double b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

double plateau(double x, double out_lo, double in_lo, double in_hi, double out_hi) {
  if (!(out_lo < in_lo) || !(in_lo <= in_hi) || !(in_hi < out_hi))
    throw DomainViolation("plateau breakpoints must satisfy out_lo < in_lo <= in_hi < out_hi");
  if (x <= out_lo || x >= out_hi) return 0.0;
  if (x >= in_lo && x <= in_hi) return 1.0;
  if (x < in_lo) return smooth01((x - out_lo) / (in_lo - out_lo));
  return smooth01((out_hi - x) / (out_hi - in_hi));
}

VecD wrap_base(SpanD x, const VecD& period) {
  VecD out(x.begin(), x.end());
  for (std::size_t a = 0; a < out.size() && a < period.size(); ++a) {
    double P = period[a];
    if (P > 0.0) {
      out[a] -= P * std::floor(out[a] / P);
      if (out[a] >= P) out[a] = 0.0;  // guard the floor rounding edge
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conic compact sets

ConicCompactSet ConicCompactSet::from_pieces(int base_dim,
                                             std::vector<ConicPiece> pieces) {
  if (base_dim < 0) throw DomainViolation("negative base dimension");
  ConicCompactSet k;
  k.base_dim = base_dim;
  for (auto& p : pieces) {
    if (p.m_box.dim() <= base_dim)
      throw DomainViolation("conic piece box must have base and normal axes");
    for (int a = 0; a < p.m_box.dim(); ++a)
      if (!std::isfinite(p.m_box.lo[a]) || !std::isfinite(p.m_box.hi[a]))
        throw DomainViolation("conic piece box must be bounded");
    if (!(p.t_lo >= 0.0) || !(p.t_hi <= 1.0) || p.t_lo > p.t_hi)
      throw DomainViolation("conic piece t-interval must sit inside [0, 1]");
    if (p.t_lo == 0.0) {
      // Degenerate t=0 trace: base extent kept, normal extent exactly zero.
      Box tr = p.m_box;
      for (int a = base_dim; a < tr.dim(); ++a) {
        tr.lo[a] = 0.0;
        tr.hi[a] = 0.0;
      }
      k.traces.push_back(std::move(tr));
    }
    k.pieces.push_back(std::move(p));
  }
  return k;
}

bool ConicCompactSet::allows_interior(SpanD m, double t) const {
  if (!(t > 0.0) || t > 1.0) return false;
  for (const auto& p : pieces)
    if (t >= p.t_lo && t <= p.t_hi && p.m_box.contains(m)) return true;
  return false;
}

bool ConicCompactSet::allows_boundary(SpanD x) const {
  for (const auto& tr : traces) {
    bool in = static_cast<int>(x.size()) == base_dim;
    for (int a = 0; in && a < base_dim; ++a)
      in = x[a] >= tr.lo[a] && x[a] <= tr.hi[a];
    if (in) return true;
  }
  return false;
}

bool ConicCompactSet::boundary_trace_within(const Box& slice_box) const {
  for (const auto& tr : traces)
    for (int a = 0; a < base_dim; ++a)
      if (tr.lo[a] < slice_box.lo[a] || tr.hi[a] > slice_box.hi[a]) return false;
  return true;
}

Box ConicCompactSet::ambient_hull() const {
  Box h{{}, {}};
  bool first = true;
  for (const auto& p : pieces) {
    if (first) {
      h = p.m_box;
      first = false;
    } else {
      h = Box::hull(h, p.m_box);
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Seminorm estimation

namespace {

struct StencilPt {
  int off;
  double c;
};

const std::vector<StencilPt>& stencil_for(int order) {
  static const std::vector<StencilPt> s0{{0, 1.0}};
  static const std::vector<StencilPt> s1{{-1, -0.5}, {1, 0.5}};
  static const std::vector<StencilPt> s2{{-1, 1.0}, {0, -2.0}, {1, 1.0}};
  static const std::vector<StencilPt> s3{{-2, -0.5}, {-1, 1.0}, {1, -1.0}, {2, 0.5}};
  static const std::vector<StencilPt> s4{
      {-2, 1.0}, {-1, -4.0}, {0, 6.0}, {1, -4.0}, {2, 1.0}};
  switch (order) {
    case 0: return s0;
    case 1: return s1;
    case 2: return s2;
    case 3: return s3;
    case 4: return s4;
    default: throw DomainViolation("per-axis derivative order above 4 unsupported");
  }
}

struct DerivEval {
  double value = 0.0;
  double noise = 0.0;
  bool ok = true;
};

// One finite-difference pass at step h over the composite stencil.
DerivEval fd_once(const SchwartzDncField& f, SpanD x, SpanD xi, double t,
                  const std::vector<int>& orders, double h) {
  const int p = f.base_dim, q = f.normal_dim;
  const int axes = p + q + 1;
  int total = 0;
  std::vector<const std::vector<StencilPt>*> st(axes);
  std::vector<std::size_t> radix(axes);
  std::size_t combos = 1;
  for (int a = 0; a < axes; ++a) {
    st[a] = &stencil_for(orders[a]);
    radix[a] = st[a]->size();
    combos *= radix[a];
    total += orders[a];
  }
  if (total == 0) {
    double v = f.eval(x, xi, t);
    return {v, 0.0, true};
  }
  double sum = 0.0, abssum = 0.0;
  VecD xs(x.begin(), x.end());
  VecD xis(xi.begin(), xi.end());
  for (std::size_t idx = 0; idx < combos; ++idx) {
    std::size_t rem = idx;
    double coeff = 1.0;
    double ts = t;
    for (int a = 0; a < axes; ++a) {
      const StencilPt& sp = (*st[a])[rem % radix[a]];
      rem /= radix[a];
      coeff *= sp.c;
      double shift = sp.off * h;
      if (a < p) {
        xs[a] = x[a] + shift;
      } else if (a < p + q) {
        xis[a - p] = xi[a - p] + shift;
      } else {
        ts = t + shift;
      }
    }
    if (orders[axes - 1] > 0 && (ts < 0.0 || ts > 1.0)) return {0.0, 0.0, false};
    if (f.chart && !omega_contains(*f.chart, xs, xis, ts)) return {0.0, 0.0, false};
    double v = f.eval(xs, xis, ts);
    sum += coeff * v;
    abssum += std::abs(coeff * v);
    for (int a = 0; a < p; ++a) xs[a] = x[a];
    for (int a = 0; a < q; ++a) xis[a] = xi[a];
  }
  double scale = std::pow(h, total);
  return {sum / scale, 8.0 * DBL_EPSILON * abssum / scale, true};
}

// Central differences with one Richardson level; retries with a smaller
// step when the stencil would leave the chart domain. A value below the
// accumulated roundoff estimate is reported as zero so that decayed
// regions do not feed amplified noise into the supremum.
double fd_derivative(const SchwartzDncField& f, SpanD x, SpanD xi, double t,
                     const std::vector<int>& orders, double h0) {
  double h = h0;
  for (int attempt = 0; attempt < 4; ++attempt, h *= 0.25) {
    DerivEval d1 = fd_once(f, x, xi, t, orders, h);
    if (!d1.ok) continue;
    int total = 0;
    for (int o : orders) total += o;
    if (total == 0) return d1.value;
    DerivEval d2 = fd_once(f, x, xi, t, orders, 0.5 * h);
    if (!d2.ok) continue;
    double value = (4.0 * d2.value - d1.value) / 3.0;
    double noise = (4.0 * d2.noise + d1.noise) / 3.0 + DBL_EPSILON * std::abs(value);
    return std::abs(value) <= noise ? 0.0 : value;
  }
  return 0.0;  // stencil never fit inside the chart: boundary sample skipped
}

struct FiberSample {
  VecD xi;
  int shell;  // 0 = dense core, then 1..n log shells
};

std::vector<VecD> base_grid(const SchwartzDncField& f, const SeminormGrid& grid) {
  const int p = f.base_dim;
  std::vector<VecD> out;
  if (p == 0) {
    out.push_back({});
    return out;
  }
  const Box& w = f.meta.x_window;
  if (w.dim() != p) throw DomainViolation("field x_window dimension mismatch");
  int n = std::max(1, grid.x_per_axis);
  std::size_t combos = 1;
  for (int a = 0; a < p; ++a) combos *= n;
  for (std::size_t idx = 0; idx < combos; ++idx) {
    std::size_t rem = idx;
    VecD x(p);
    for (int a = 0; a < p; ++a) {
      int i = static_cast<int>(rem % n);
      rem /= n;
      double width = w.hi[a] - w.lo[a];
      double inset = 0.005 * width + 3.0 * grid.fd_step;
      double lo = w.lo[a] + inset, hi = w.hi[a] - inset;
      if (lo > hi) lo = hi = 0.5 * (w.lo[a] + w.hi[a]);
      x[a] = (n == 1) ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1);
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<FiberSample> fiber_grid(const SchwartzDncField& f,
                                    const SeminormGrid& grid) {
  const int q = f.normal_dim;
  std::vector<FiberSample> out;
  if (q == 0) {
    out.push_back({{}, 0});
    return out;
  }
  VecD center = f.meta.xi_center;
  VecD scale = f.meta.xi_scale;
  if (static_cast<int>(center.size()) != q || static_cast<int>(scale.size()) != q)
    throw DomainViolation("field fiber hints dimension mismatch");

  // Dense core: tensor grid over center +- 2*scale.
  int n = std::max(2, grid.xi_core_per_axis);
  std::size_t combos = 1;
  for (int a = 0; a < q; ++a) combos *= n;
  for (std::size_t idx = 0; idx < combos; ++idx) {
    std::size_t rem = idx;
    VecD xi(q);
    for (int a = 0; a < q; ++a) {
      int i = static_cast<int>(rem % n);
      rem /= n;
      xi[a] = center[a] - 2.0 * scale[a] + 4.0 * scale[a] * i / (n - 1);
    }
    out.push_back({std::move(xi), 0});
  }

  // Log shells out to xi_r_max.
  double smax = 0.0;
  for (double s : scale) smax = std::max(smax, s);
  double r0 = 3.0 * smax;
  double rmax = std::max(grid.xi_r_max, 2.0 * r0);
  int shells = std::max(2, grid.xi_shells);
  CounterRng rng(grid.seed);
  for (int j = 0; j < shells; ++j) {
    double r = r0 * std::pow(rmax / r0, static_cast<double>(j) / (shells - 1));
    std::vector<VecD> dirs;
    if (q == 1) {
      dirs.push_back({1.0});
      dirs.push_back({-1.0});
    } else if (q == 2) {
      int nd = std::max(4, grid.xi_dirs);
      for (int i = 0; i < nd; ++i) {
        double th = kTwoPi * i / nd + 0.1 * j;  // stagger shells
        dirs.push_back({std::cos(th), std::sin(th)});
      }
    } else {
      int nd = std::max(4, grid.xi_dirs);
      for (int i = 0; i < nd; ++i) {
        VecD d(q);
        double nrm = 0.0;
        for (int a = 0; a < q; ++a) {
          // Box-Muller from counter-based uniforms keeps this reproducible.
          double u1 = rng.uniform01(1000 * j + 10 * i + 2 * a + 1);
          double u2 = rng.uniform01(1000 * j + 10 * i + 2 * a + 2);
          d[a] = std::sqrt(-2.0 * std::log(u1 + 1e-300)) * std::cos(kTwoPi * u2);
          nrm += d[a] * d[a];
        }
        nrm = std::sqrt(std::max(nrm, 1e-300));
        for (int a = 0; a < q; ++a) d[a] /= nrm;
        dirs.push_back(std::move(d));
      }
    }
    for (const auto& d : dirs) {
      VecD xi(q);
      for (int a = 0; a < q; ++a) xi[a] = center[a] + r * d[a];
      out.push_back({std::move(xi), j + 1});
    }
  }
  return out;
}

std::string dotted(const std::vector<int>& v) {
  if (v.empty()) return "-";
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += '.';
    s += std::to_string(v[i]);
  }
  return s;
}

void enumerate_multi(int dims, int budget, std::vector<int>& cur,
                     std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == dims) {
    out.push_back(cur);
    return;
  }
  for (int o = 0; o <= std::min(budget, 4); ++o) {
    cur.push_back(o);
    enumerate_multi(dims, budget - o, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<int>> multi_indices(int dims, int budget) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  enumerate_multi(dims, budget, cur, out);
  return out;
}

}  // namespace

SeminormEstimate seminorm_estimate(const SchwartzDncField& f, int k, int m,
                                   const std::vector<int>& l,
                                   const std::vector<int>& alpha,
                                   const SeminormGrid& grid) {
  if (static_cast<int>(l.size()) != f.base_dim ||
      static_cast<int>(alpha.size()) != f.normal_dim)
    throw DomainViolation("seminorm multi-index dimensions mismatch");
  int order = m;
  for (int o : l) order += o;
  for (int o : alpha) order += o;
  if (k < 0 || m < 0) throw DomainViolation("seminorm indices must be nonnegative");
  if (k + order > 6)
    throw DomainViolation("seminorm stencil budget exceeded: k+m+|l|+|alpha| <= 6");

  std::vector<int> orders;
  orders.insert(orders.end(), l.begin(), l.end());
  orders.insert(orders.end(), alpha.begin(), alpha.end());
  orders.push_back(m);

  std::vector<VecD> xs = base_grid(f, grid);
  std::vector<FiberSample> xis = fiber_grid(f, grid);
  std::vector<double> ts;
  double margin = 3.0 * grid.fd_step;
  for (double t : grid.t_samples) {
    if (t < 0.0 || t > 1.0) continue;
    if (m > 0 && (t < margin || t > 1.0 - margin)) continue;
    ts.push_back(t);
  }
  if (ts.empty()) ts.push_back(0.5);

  SeminormEstimate est;
  est.k = k;
  est.m = m;
  est.l = l;
  est.alpha = alpha;

  const std::size_t n = xs.size() * xis.size() * ts.size();
  est.samples = static_cast<int>(n);
  std::vector<double> weighted(n);
  parallel_fill(n, [&](std::size_t idx) {
    std::size_t rem = idx;
    const VecD& x = xs[rem % xs.size()];
    rem /= xs.size();
    const FiberSample& fs = xis[rem % xis.size()];
    rem /= xis.size();
    double t = ts[rem];
    double d = fd_derivative(f, x, fs.xi, t, orders, grid.fd_step);
    double r2 = 0.0;
    for (double v : fs.xi) r2 += v * v;
    weighted[idx] = std::pow(1.0 + r2, k) * std::abs(d);
  });

  int nshells = 0;
  for (const auto& fs : xis) nshells = std::max(nshells, fs.shell + 1);
  std::vector<double> shell_max(nshells, 0.0);
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t rem = idx / xs.size();
    const FiberSample& fs = xis[rem % xis.size()];
    est.value = std::max(est.value, weighted[idx]);
    shell_max[fs.shell] = std::max(shell_max[fs.shell], weighted[idx]);
  }

  // Divergence: weighted values still growing through the outer shells.
  if (nshells >= 4) {
    int sN = nshells;
    bool growing = shell_max[sN - 3] < shell_max[sN - 2] &&
                   shell_max[sN - 2] < shell_max[sN - 1];
    if (growing && shell_max[sN - 1] > 2.0 * shell_max[1] &&
        shell_max[sN - 1] > 1e-9 * (1.0 + shell_max[0]))
      est.bounded = false;
  }
  return est;
}

SeminormReport seminorm_scan(const SchwartzDncField& f, int max_k, int max_order,
                             const SeminormGrid& grid) {
  SeminormReport rep;
  auto ls = multi_indices(f.base_dim, max_order);
  for (const auto& l : ls) {
    int lsum = 0;
    for (int o : l) lsum += o;
    auto alphas = multi_indices(f.normal_dim, max_order - lsum);
    for (const auto& alpha : alphas) {
      int asum = 0;
      for (int o : alpha) asum += o;
      for (int m = 0; m + lsum + asum <= max_order; ++m) {
        for (int k = 0; k <= max_k && k + m + lsum + asum <= 6; ++k) {
          rep.entries.push_back(seminorm_estimate(f, k, m, l, alpha, grid));
          const auto& e = rep.entries.back();
          rep.max_value = std::max(rep.max_value, e.value);
          rep.all_bounded = rep.all_bounded && e.bounded;
          rep.grid_size = std::max(rep.grid_size, e.samples);
        }
      }
    }
  }
  return rep;
}

std::string seminorm_csv(const SeminormReport& report) {
  std::string out = "k,m,l,alpha,estimate,grid_size\n";
  char buf[64];
  for (const auto& e : report.entries) {
    out += std::to_string(e.k) + ',' + std::to_string(e.m) + ',';
    out += dotted(e.l) + ',' + dotted(e.alpha) + ',';
    if (e.bounded) {
      std::snprintf(buf, sizeof buf, "%.12g", e.value);
      out += buf;
    } else {
      out += "inf";
    }
    out += ',' + std::to_string(e.samples) + '\n';
  }
  return out;
}

std::vector<std::string> validate_certificate(const SchwartzDncField& f,
                                              const SeminormGrid& grid) {
  std::vector<std::string> failures;
  if (!f.certificate) return failures;
  char buf[160];
  for (const auto& e : f.certificate->entries) {
    SeminormEstimate est = seminorm_estimate(f, e.k, e.m, e.l, e.alpha, grid);
    if (!est.bounded) {
      std::snprintf(buf, sizeof buf, "entry k=%d m=%d l=%s alpha=%s: unbounded",
                    e.k, e.m, dotted(e.l).c_str(), dotted(e.alpha).c_str());
      failures.push_back(buf);
    } else if (est.value > 1.05 * e.constant) {
      std::snprintf(buf, sizeof buf,
                    "entry k=%d m=%d l=%s alpha=%s: estimate %.6g exceeds "
                    "1.05 * claimed %.6g",
                    e.k, e.m, dotted(e.l).c_str(), dotted(e.alpha).c_str(),
                    est.value, e.constant);
      failures.push_back(buf);
    }
  }
  return failures;
}

// ---------------------------------------------------------------------------
// Support checks

std::vector<SupportViolation> conic_support_check(const SchwartzDncField& f,
                                                  int n_samples,
                                                  std::uint64_t seed) {
  std::vector<SupportViolation> out;
  if (!f.support) return out;
  const ConicCompactSet& k = *f.support;
  if (k.pieces.empty()) return out;
  const int p = f.base_dim, q = f.normal_dim;
  Box hull = k.ambient_hull().inflated(0.5, 1.0);
  CounterRng rng(seed);
  double rball = 1.5 * f.meta.xi_decay_radius;

  for (int i = 0; i < n_samples; ++i) {
    std::uint64_t c = static_cast<std::uint64_t>(i) * 64;
    if (i % 4 == 0) {
      // Boundary stratum: x from the inflated hull, xi from the decay ball.
      VecD x(p), xi(q);
      for (int a = 0; a < p; ++a) x[a] = rng.uniform(c + a, hull.lo[a], hull.hi[a]);
      for (int a = 0; a < q; ++a) xi[a] = rng.uniform(c + 16 + a, -rball, rball);
      x = wrap_base(x, f.meta.x_period);
      if (!k.allows_boundary(x)) {
        double v = f.eval(x, xi, 0.0);
        if (v != 0.0) out.push_back({x, xi, 0.0, v});
      }
    } else {
      double u = rng.uniform01(c + 32);
      double t = 1e-3 * std::pow(1000.0, u);  // log-uniform in [1e-3, 1]
      t = std::min(t, 1.0);
      VecD m(p + q);
      for (int a = 0; a < p + q; ++a)
        m[a] = rng.uniform(c + 40 + a, hull.lo[a], hull.hi[a]);
      VecD xw(m.begin(), m.begin() + p);
      xw = wrap_base(xw, f.meta.x_period);
      for (int a = 0; a < p; ++a) m[a] = xw[a];
      // Circle source fibers: the arrow coordinate is periodic, so pull the
      // sample into the fundamental domain before asking the support. The
      // boundary stratum stays unwrapped (normal fibers are vector spaces).
      for (int a = 0; a < q && a < static_cast<int>(f.meta.xi_period.size()); ++a) {
        const double per = f.meta.xi_period[static_cast<size_t>(a)];
        if (per > 0.0) m[p + a] = wrap_pm(m[p + a] / per) * per;
      }
      if (!k.allows_interior(m, t)) {
        VecD xi(q);
        for (int a = 0; a < q; ++a) xi[a] = m[p + a] / t;
        double v = f.eval(xw, xi, t);
        if (v != 0.0) out.push_back({xw, xi, t, v});
      }
    }
  }
  return out;
}

std::vector<SupportViolation> bundle_support_check(const BundleSchwartzField& f,
                                                   int n_samples,
                                                   std::uint64_t seed) {
  std::vector<SupportViolation> out;
  if (!f.base_support) return out;
  const Box& s = *f.base_support;
  const int p = f.base_dim, q = f.fiber_dim;
  Box hull = s.inflated(0.5, 1.0);
  CounterRng rng(seed);
  double rball = 1.5 * f.meta.xi_decay_radius;
  for (int i = 0; i < n_samples; ++i) {
    std::uint64_t c = static_cast<std::uint64_t>(i) * 32;
    VecD x(p), xi(q);
    for (int a = 0; a < p; ++a) x[a] = rng.uniform(c + a, hull.lo[a], hull.hi[a]);
    for (int a = 0; a < q; ++a) xi[a] = rng.uniform(c + 16 + a, -rball, rball);
    x = wrap_base(x, f.meta.x_period);
    if (!s.contains(x)) {
      double v = f.eval(x, xi);
      if (v != 0.0) out.push_back({x, xi, 0.0, v});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pullback

namespace {

// Solve F(z) = target by damped Newton with finite-difference Jacobians.
// Rejects ill-conditioned Jacobians (cond > 1e12); returns the solution.
VecD newton_invert(const std::function<VecD(SpanD)>& F, SpanD target,
                   SpanD guess) {
  VecD z(guess.begin(), guess.end());
  const int d = static_cast<int>(z.size());
  for (int it = 0; it < 60; ++it) {
    VecD r = vec_sub(F(z), target);
    if (norm_inf(r) <= 1e-11 * (1.0 + norm_inf(target))) return z;
    double h = 1e-6 * (1.0 + norm_inf(z));
    Mat j(d, d);
    for (int c = 0; c < d; ++c) {
      VecD zp = z, zm = z;
      zp[c] += h;
      zm[c] -= h;
      VecD fp = F(zp), fm = F(zm);
      for (int rr = 0; rr < d; ++rr) j.at(rr, c) = (fp[rr] - fm[rr]) / (2.0 * h);
    }
    if (cond_inf(j) > 1e12)
      throw DomainViolation("pullback rejected: map is not invertible "
                            "(jacobian condition number above 1e12)");
    VecD step = solve_linear(j, r);
    for (int a = 0; a < d; ++a) z[a] -= step[a];
  }
  throw ResolutionError("pullback inverse iteration did not converge");
}

}  // namespace

SchwartzDncField pullback(const PairMorphism& f, const SchwartzDncField& g) {
  if (g.base_dim != f.out_base || g.normal_dim != f.out_normal)
    throw DomainViolation("pullback: field does not live on the target chart");
  if (f.in_base != f.out_base || f.in_normal != f.out_normal)
    throw DomainViolation("pullback requires a square (diffeomorphic) morphism");
  const int p = f.in_base, q = f.in_normal;
  const int d = p + q;

  SchwartzDncField out;
  out.base_dim = p;
  out.normal_dim = q;
  PairMorphism fc = f;  // owned copy for the closures
  auto geval = g.eval;
  out.eval = [fc, geval](SpanD x, SpanD xi, double t) {
    BlowupCoords y = transition_map(fc, x, xi, t);
    return geval(y.x, y.xi, y.t);
  };

  // Ambient map m = (x, mu) -> (F1, F2), the t-independent squashed form.
  auto ambient = [&fc, p](SpanD m) {
    SpanD x = m.subspan(0, p);
    SpanD mu = m.subspan(p);
    return vec_concat(fc.f_base(x, mu), fc.f_normal(x, mu));
  };
  auto base_only = [&fc, q](SpanD x) {
    VecD zero(q, 0.0);
    return fc.f_base(x, zero);
  };

  auto invert_box = [&](const Box& target_box,
                        const std::function<VecD(SpanD)>& map, int dims) {
    std::size_t combos = 1;
    for (int a = 0; a < dims; ++a) combos *= 3;
    Box pre{{}, {}};
    bool first = true;
    for (std::size_t idx = 0; idx < combos; ++idx) {
      std::size_t rem = idx;
      VecD tgt(dims);
      for (int a = 0; a < dims; ++a) {
        int i = static_cast<int>(rem % 3);
        rem /= 3;
        tgt[a] = target_box.lo[a] + 0.5 * i * (target_box.hi[a] - target_box.lo[a]);
      }
      VecD z = newton_invert(map, tgt, tgt);
      Box pt{z, z};
      pre = first ? pt : Box::hull(pre, pt);
      first = false;
    }
    return pre.inflated(0.25, 1e-9);
  };

  // Support: preimages of the target pieces, hulled and inflated.
  if (g.support) {
    std::vector<ConicPiece> pieces;
    for (const auto& piece : g.support->pieces) {
      ConicPiece np;
      np.m_box = invert_box(piece.m_box, ambient, d);
      np.t_lo = piece.t_lo;
      np.t_hi = piece.t_hi;
      pieces.push_back(std::move(np));
    }
    out.support = ConicCompactSet::from_pieces(p, std::move(pieces));
  }

  // Base window.  Periodicity does not transport through a general morphism,
  // so the pulled-back field is treated as aperiodic.
  out.meta = g.meta;
  out.meta.x_period.clear();
  if (p > 0 && g.meta.x_window.dim() == p)
    out.meta.x_window = invert_box(g.meta.x_window, base_only, p);

  // Fiber hints through the inverse slice jacobian at the window center.
  if (f.jac_normal && q > 0 && static_cast<int>(g.meta.xi_center.size()) == q) {
    VecD xc(p, 0.0);
    if (p > 0 && out.meta.x_window.dim() == p)
      for (int a = 0; a < p; ++a)
        xc[a] = 0.5 * (out.meta.x_window.lo[a] + out.meta.x_window.hi[a]);
    Mat j = f.jac_normal(xc);
    if (cond_inf(j) > 1e12)
      throw DomainViolation("pullback rejected: slice jacobian is singular");
    out.meta.xi_center = solve_linear(j, g.meta.xi_center);
    Mat jinv(q, q);
    for (int c = 0; c < q; ++c) {
      VecD e(q, 0.0);
      e[c] = 1.0;
      VecD col = solve_linear(j, e);
      for (int r = 0; r < q; ++r) jinv.at(r, c) = col[r];
    }
    double opn = 0.0;
    for (int r = 0; r < q; ++r) {
      double rowsum = 0.0;
      VecD ns(q, 0.0);
      for (int c = 0; c < q; ++c) {
        rowsum += std::abs(jinv.at(r, c));
        ns[r] += std::abs(jinv.at(r, c)) * g.meta.xi_scale[c];
      }
      out.meta.xi_scale[r] = std::max(ns[r], 1e-12);
      opn = std::max(opn, rowsum);
    }
    out.meta.xi_decay_radius = 1.25 * opn * g.meta.xi_decay_radius;
  }

  // Chart: preimage of the target chart domain, when one is declared.
  if (g.chart) {
    SlicePair src;
    src.base_dim = p;
    src.normal_dim = q;
    auto tgt_test = g.chart->domain_test;
    auto fb = fc.f_base, fn = fc.f_normal;
    src.domain_test = [tgt_test, fb, fn](SpanD x, SpanD mu) {
      VecD y = fb(x, mu);
      VecD eta = fn(x, mu);
      return tgt_test(y, eta);
    };
    out.chart = std::move(src);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Partition of unity

double PartitionOfUnity::raw_bump(std::size_t a, SpanD m) const {
  const Bump& b = bumps[a];
  double v = 1.0;
  for (int i = 0; i < b.box.dim() && v != 0.0; ++i)
    v *= plateau(m[i], b.box.lo[i], b.box.lo[i] + b.margin, b.box.hi[i] - b.margin,
                 b.box.hi[i]);
  return v;
}

double PartitionOfUnity::raw_tail(double t) const {
  if (!use_tail) return 0.0;
  return smooth01((t - tail_floor) / (tail_full - tail_floor));
}

double PartitionOfUnity::total(SpanD m, double t) const {
  double s = raw_tail(t);
  for (std::size_t a = 0; a < bumps.size(); ++a) s += raw_bump(a, m);
  return s;
}

namespace {

VecD squash_point(SpanD x, SpanD xi, double t) {
  VecD m(x.begin(), x.end());
  for (double v : xi) m.push_back(t * v);
  return m;
}

}  // namespace

PartitionParts partition_decompose(const SchwartzDncField& f,
                                   const PartitionOfUnity& pu) {
  const int p = f.base_dim, q = f.normal_dim;
  if (pu.ambient_dim != p + q)
    throw ConfigError("partition ambient dimension mismatch");
  for (const auto& b : pu.bumps) {
    if (b.box.dim() != pu.ambient_dim)
      throw ConfigError("partition bump box dimension mismatch");
    for (int a = 0; a < b.box.dim(); ++a)
      if (!(2.0 * b.margin < b.box.hi[a] - b.box.lo[a]))
        throw ConfigError("partition bump margin too large for its box");
  }
  if (pu.use_tail && !(pu.tail_floor < pu.tail_full))
    throw ConfigError("partition tail ramp needs tail_floor < tail_full");

  // Coverage: the partition total must stay positive on the support region.
  auto check_cover = [&](SpanD m, double t) {
    if (pu.total(m, t) < pu.coverage_floor) {
      VecD mv(m.begin(), m.end());
      throw UncoveredRegionError("partition does not cover m=" + fmt_vec(mv) +
                                 " t=" + std::to_string(t));
    }
  };
  if (f.support) {
    for (const auto& piece : f.support->pieces) {
      const Box& bx = piece.m_box;
      std::size_t combos = 1;
      for (int a = 0; a < bx.dim(); ++a) combos *= 5;
      for (std::size_t idx = 0; idx < combos; ++idx) {
        std::size_t rem = idx;
        VecD m(bx.dim());
        for (int a = 0; a < bx.dim(); ++a) {
          int i = static_cast<int>(rem % 5);
          rem /= 5;
          m[a] = bx.lo[a] + 0.25 * i * (bx.hi[a] - bx.lo[a]);
        }
        double tlo = std::max(piece.t_lo, 1e-9);
        for (double t : {tlo, 0.5 * (tlo + piece.t_hi), piece.t_hi}) check_cover(m, t);
      }
    }
    for (const auto& tr : f.support->traces) {
      for (int i = 0; i < 5; ++i) {
        VecD m(tr.dim(), 0.0);
        for (int a = 0; a < f.support->base_dim; ++a)
          m[a] = tr.lo[a] + 0.25 * i * (tr.hi[a] - tr.lo[a]);
        check_cover(m, 0.0);
      }
    }
  } else {
    // No declared support: sweep the window and the decayed fiber region.
    double r = f.meta.xi_decay_radius;
    for (double t : {0.0, 0.1, 0.3, 0.6, 1.0}) {
      std::size_t combos = 1;
      for (int a = 0; a < p; ++a) combos *= 5;
      for (std::size_t idx = 0; idx < combos; ++idx) {
        std::size_t rem = idx;
        VecD x(p);
        for (int a = 0; a < p; ++a) {
          int i = static_cast<int>(rem % 5);
          rem /= 5;
          x[a] = f.meta.x_window.lo[a] +
                 0.25 * i * (f.meta.x_window.hi[a] - f.meta.x_window.lo[a]);
        }
        for (double s : {-r, 0.0, r}) {
          VecD xi(q, s);
          check_cover(squash_point(x, xi, t), t);
        }
      }
    }
  }

  auto make_part = [&](std::size_t bump_index, bool is_tail) {
    SchwartzDncField part;
    part.base_dim = p;
    part.normal_dim = q;
    part.meta = f.meta;
    part.chart = f.chart;
    auto feval = f.eval;
    PartitionOfUnity pc = pu;
    part.eval = [feval, pc, bump_index, is_tail](SpanD x, SpanD xi, double t) {
      double gv = feval(x, xi, t);
      if (gv == 0.0) return 0.0;
      VecD m = squash_point(x, xi, t);
      double raw = is_tail ? pc.raw_tail(t) : pc.raw_bump(bump_index, m);
      if (raw == 0.0) return 0.0;
      return gv * raw / pc.total(m, t);
    };
    if (f.support) {
      std::vector<ConicPiece> pieces;
      for (const auto& piece : f.support->pieces) {
        ConicPiece np = piece;
        if (is_tail) {
          np.t_lo = std::max(np.t_lo, pu.tail_floor);
          if (np.t_lo > np.t_hi) continue;
        } else {
          np.m_box = Box::intersect(piece.m_box, pu.bumps[bump_index].box);
          if (np.m_box.empty()) continue;
        }
        pieces.push_back(std::move(np));
      }
      part.support = ConicCompactSet::from_pieces(p, std::move(pieces));
    }
    return part;
  };

  PartitionParts parts;
  for (std::size_t a = 0; a < pu.bumps.size(); ++a)
    parts.parts.push_back(make_part(a, false));
  parts.tail = make_part(0, true);
  if (!pu.use_tail) {
    // Explicit zero tail keeps the decomposition's shape uniform.
    parts.tail.eval = [](SpanD, SpanD, double) { return 0.0; };
    parts.tail.support = ConicCompactSet::from_pieces(p, {});
  }
  return parts;
}

}  // namespace deform
