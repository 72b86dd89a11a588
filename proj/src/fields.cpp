#include "deform/fields.hpp"

#include <cmath>

namespace deform {
namespace {

double hermite_poly(int n, double u) {
  // Probabilists' convention: He_0 = 1, He_1 = u, He_{k+1} = u He_k - k He_{k-1}.
  double a = 1.0, b = u;
  if (n == 0) return a;
  for (int k = 1; k < n; ++k) {
    double c = u * b - k * a;
    a = b;
    b = c;
  }
  return b;
}

// Union over t in [lo, hi] of the scaled interval t * [blo, bhi].
void slab_interval(double blo, double bhi, double lo, double hi, double& olo,
                   double& ohi) {
  olo = std::min(lo * blo, hi * blo);
  ohi = std::max(lo * bhi, hi * bhi);
}

}  // namespace

SchwartzDncField field_from_config(const FieldConfig& cfg) {
  const int p = cfg.base_dim, q = cfg.normal_dim;
  if (p < 0 || q < 1) throw ConfigError("field needs base_dim >= 0, normal_dim >= 1");
  if (cfg.family != "gaussian" && cfg.family != "hermite-gaussian" &&
      cfg.family != "windowed-polynomial")
    throw ConfigError("unknown field family: " + cfg.family);
  if (!(cfg.cutoff_inner > 0.0) || !(cfg.cutoff_outer > cfg.cutoff_inner))
    throw ConfigError("field cutoff radii must satisfy 0 < inner < outer");
  VecD center = cfg.xi_center.empty() ? VecD(q, 0.0) : cfg.xi_center;
  VecD sigma = cfg.xi_sigma.empty() ? VecD(q, 1.0) : cfg.xi_sigma;
  if (static_cast<int>(center.size()) != q || static_cast<int>(sigma.size()) != q)
    throw ConfigError("field fiber parameter dimension mismatch");
  for (double s : sigma)
    if (!(s > 0.0)) throw ConfigError("field sigma must be positive");
  std::vector<int> horders = cfg.hermite_orders;
  if (cfg.family == "hermite-gaussian") {
    if (horders.empty()) horders.assign(q, 1);
    if (static_cast<int>(horders.size()) != q)
      throw ConfigError("hermite orders dimension mismatch");
  }
  VecD coeffs = cfg.poly_coeffs;
  if (cfg.family == "windowed-polynomial" && coeffs.empty()) coeffs = {1.0};
  const bool use_x_bump = cfg.x_margin > 0.0 && p > 0;
  if (p > 0 && cfg.x_window.dim() != p)
    throw ConfigError("field x_window dimension mismatch");
  VecD period = cfg.x_period;
  if (!period.empty() && static_cast<int>(period.size()) != p)
    throw ConfigError("field x_period dimension mismatch");
  for (double pr : period)
    if (pr < 0.0 || !std::isfinite(pr))
      throw ConfigError("field x_period entries must be finite and >= 0");
  bool periodic_all = p > 0 && !period.empty();
  for (double pr : period) periodic_all = periodic_all && pr > 0.0;

  SchwartzDncField f;
  f.base_dim = p;
  f.normal_dim = q;
  f.meta.xi_center = center;
  f.meta.xi_scale = sigma;
  double smax = 0.0, cmax = 0.0;
  for (int a = 0; a < q; ++a) {
    smax = std::max(smax, sigma[a]);
    cmax = std::max(cmax, std::abs(center[a]));
  }
  f.meta.xi_decay_radius = cfg.cutoff_outer * smax + cmax;
  f.meta.x_window =
      (p > 0) ? cfg.x_window.inflated(0.0, use_x_bump ? cfg.x_margin : 0.0)
              : Box{{}, {}};
  f.meta.x_period = period;
  // Periodic axes carry all their mass inside one fundamental cell.
  for (int a = 0; a < p && !period.empty(); ++a) {
    if (period[a] > 0.0) {
      f.meta.x_window.lo[a] = 0.0;
      f.meta.x_window.hi[a] = period[a];
    }
  }
  f.meta.instance = cfg.instance;

  const std::string family = cfg.family;
  const double amp = cfg.amplitude;
  const double r_in = cfg.cutoff_inner, r_out = cfg.cutoff_outer;
  const Box window = cfg.x_window;
  const double margin = cfg.x_margin;
  f.eval = [family, amp, center, sigma, horders, coeffs, window, margin, r_in,
            r_out, use_x_bump, period, p, q](SpanD x, SpanD xi, double t) -> double {
    (void)t;  // families are constant across the deformation parameter
    double bump = 1.0;
    if (use_x_bump) {
      VecD xw = wrap_base(x, period);
      for (int a = 0; a < p && bump != 0.0; ++a)
        bump *= plateau(xw[a], window.lo[a] - margin, window.lo[a], window.hi[a],
                        window.hi[a] + margin);
      if (bump == 0.0) return 0.0;
    }
    double rho2 = 0.0;
    VecD u(q);
    for (int a = 0; a < q; ++a) {
      u[a] = (xi[a] - center[a]) / sigma[a];
      rho2 += u[a] * u[a];
    }
    double rho = std::sqrt(rho2);
    double cut;
    if (rho <= r_in) {
      cut = 1.0;
    } else if (rho >= r_out) {
      return 0.0;
    } else {
      cut = smooth01((r_out - rho) / (r_out - r_in));
    }
    double profile;
    if (family == "gaussian") {
      profile = std::exp(-0.5 * rho2);
    } else if (family == "hermite-gaussian") {
      profile = std::exp(-0.5 * rho2);
      for (int a = 0; a < q; ++a) profile *= hermite_poly(horders[a], u[a]);
    } else {
      profile = 0.0;
      double pw = 1.0;
      for (double c : coeffs) {
        profile += c * pw;
        pw *= rho2;
      }
    }
    return amp * bump * profile * cut;
  };

  // Conic support: x-part is the outer bump box; the fiber part of each
  // t-slab is the union over the slab of t * (outer fiber box).
  VecD fib_lo(q), fib_hi(q);
  for (int a = 0; a < q; ++a) {
    fib_lo[a] = center[a] - r_out * sigma[a];
    fib_hi[a] = center[a] + r_out * sigma[a];
  }
  Box xpart = f.meta.x_window;  // periodic axes already widened to [0, P]
  int slabs = std::max(1, cfg.support_slabs);
  std::vector<ConicPiece> pieces;
  for (int s = 0; s < slabs; ++s) {
    double tlo = static_cast<double>(s) / slabs;
    double thi = static_cast<double>(s + 1) / slabs;
    ConicPiece piece;
    piece.t_lo = tlo;
    piece.t_hi = thi;
    VecD lo(xpart.lo), hi(xpart.hi);
    for (int a = 0; a < q; ++a) {
      double olo, ohi;
      slab_interval(fib_lo[a], fib_hi[a], tlo, thi, olo, ohi);
      lo.push_back(olo);
      hi.push_back(ohi);
    }
    piece.m_box = Box{std::move(lo), std::move(hi)};
    pieces.push_back(std::move(piece));
  }
  if (use_x_bump || periodic_all || p == 0)
    f.support = ConicCompactSet::from_pieces(p, pieces);
  return f;
}

}  // namespace deform
