#include "deform/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <limits>
#include <set>
#include <utility>

#include "json.hpp"

#include "deform/convolution.hpp"
#include "deform/fourier.hpp"
#include "deform/groupoid.hpp"
#include "deform/rng.hpp"

namespace deform {

namespace {

using njson = nlohmann::ordered_json;

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double rel_dev(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

// Per-axis defaults mirroring the field factory: center 0, sigma 1.
VecD axis_or(const VecD& v, int q, double fallback) {
  if (static_cast<int>(v.size()) == q) return v;
  return VecD(static_cast<size_t>(q), fallback);
}

struct CheckContext {
  const Scenario& s;
  const TangentGroupoidModel& tg;
  const std::vector<SchwartzDncField>& fields;
};

// Where the product's fiber mass sits: centers add, widths add in
// quadrature. Used to aim the sample clouds.
struct MassProfile {
  VecD center;
  VecD spread;
};

MassProfile mass_profile(const CheckContext& ctx, size_t n_factors) {
  const int q = ctx.tg.g.fiber_dim;
  MassProfile mp{VecD(static_cast<size_t>(q), 0.0),
                 VecD(static_cast<size_t>(q), 0.0)};
  for (size_t f = 0; f < n_factors && f < ctx.s.fields.size(); ++f) {
    const VecD c = axis_or(ctx.s.fields[f].xi_center, q, 0.0);
    const VecD sg = axis_or(ctx.s.fields[f].xi_sigma, q, 1.0);
    for (int a = 0; a < q; ++a) {
      mp.center[a] += c[static_cast<size_t>(a)];
      mp.spread[a] = std::hypot(mp.spread[a], sg[static_cast<size_t>(a)]);
    }
  }
  return mp;
}

// One deterministic sample in the product's mass region. Point i of a
// check stream; the counter layout never depends on t, so every t sees
// the same cloud and a seed change moves all of it at once.
std::pair<VecD, VecD> mass_point(const CheckContext& ctx, CounterRng& rng,
                                 const MassProfile& mp, std::uint64_t i) {
  const int p = ctx.tg.base_dim();
  const int q = ctx.tg.g.fiber_dim;
  VecD x(static_cast<size_t>(p), 0.0);
  const FieldConfig& lead = ctx.s.fields.front();
  for (int a = 0; a < p; ++a) {
    const std::uint64_t ctr = i * 16 + static_cast<std::uint64_t>(a);
    if (static_cast<int>(lead.x_period.size()) == p &&
        lead.x_period[static_cast<size_t>(a)] > 0.0) {
      x[static_cast<size_t>(a)] =
          rng.uniform(ctr, 0.0, lead.x_period[static_cast<size_t>(a)]);
    } else if (lead.x_window.dim() == p) {
      const double mid = 0.5 * (lead.x_window.lo[static_cast<size_t>(a)] +
                                lead.x_window.hi[static_cast<size_t>(a)]);
      const double half = 0.5 * (lead.x_window.hi[static_cast<size_t>(a)] -
                                 lead.x_window.lo[static_cast<size_t>(a)]);
      x[static_cast<size_t>(a)] = mid + rng.uniform(ctr, -0.25, 0.25) * half;
    }
  }
  VecD xi(static_cast<size_t>(q), 0.0);
  for (int a = 0; a < q; ++a) {
    const std::uint64_t ctr = i * 16 + 8 + static_cast<std::uint64_t>(a);
    xi[static_cast<size_t>(a)] =
        mp.center[a] + rng.uniform(ctr, -1.6, 1.6) * mp.spread[a];
  }
  return {std::move(x), std::move(xi)};
}

// A tolerance the quadrature cannot reach must surface as a failing row,
// not as silently noisy metrics: probe one representative integral and
// poison the metric when it reports non-convergence.
bool quadrature_converges(const CheckContext& ctx, CounterRng& rng,
                          const MassProfile& mp, double t) {
  if (ctx.fields.size() < 2) return true;
  TwoVariableField sep = separated_field(ctx.tg, ctx.fields[0], ctx.fields[1]);
  auto [x, xi] = mass_point(ctx, rng, mp, 9999);
  return fiber_integrate(ctx.tg, sep, ctx.s.quadrature, x, xi, t).converged;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

ReportRow make_row(const CheckContext& ctx, const std::string& check, double t,
                   int grid, double metric, double threshold, double t0_ms) {
  ReportRow r;
  r.scenario = ctx.s.name;
  r.check = check;
  r.t = t;
  r.grid_size = grid;
  r.metric = metric;
  r.threshold = threshold;
  r.pass = metric <= threshold;
  r.runtime_ms = now_ms() - t0_ms;
  return r;
}

std::vector<ReportRow> check_associativity(const CheckContext& ctx,
                                           CounterRng rng) {
  if (ctx.fields.size() < 3)
    throw ConfigError("associativity check needs three fields");
  const QuadratureSpec& spec = ctx.s.quadrature;
  SchwartzDncField fg_h = convolve(
      ctx.tg, convolve(ctx.tg, ctx.fields[0], ctx.fields[1], spec),
      ctx.fields[2], spec);
  SchwartzDncField f_gh = convolve(
      ctx.tg, ctx.fields[0],
      convolve(ctx.tg, ctx.fields[1], ctx.fields[2], spec), spec);
  const MassProfile mp = mass_profile(ctx, 3);
  std::vector<ReportRow> rows;
  for (double t : ctx.s.t_grid) {
    const double t0 = now_ms();
    double metric = 0.0;
    if (!quadrature_converges(ctx, rng, mp, t)) metric = kInf;
    for (std::uint64_t i = 0; metric < kInf && i < 10; ++i) {
      auto [x, xi] = mass_point(ctx, rng, mp, i);
      metric = std::max(metric, rel_dev(fg_h.eval(x, xi, t),
                                        f_gh.eval(x, xi, t)));
    }
    rows.push_back(
        make_row(ctx, "associativity", t, spec.base_nodes, metric, 1e-6, t0));
  }
  return rows;
}

std::vector<ReportRow> check_homomorphism(const CheckContext& ctx,
                                          CounterRng rng) {
  if (ctx.fields.size() < 2)
    throw ConfigError("homomorphism check needs two fields");
  const SchwartzDncField& f = ctx.fields[0];
  const SchwartzDncField& g = ctx.fields[1];
  const QuadratureSpec& specA = ctx.s.quadrature;
  // The slice side runs on deliberately different grids: agreement must
  // come from convergence, not from shared nodes.
  QuadratureSpec specB = specA;
  specB.base_nodes = std::min(specB.base_nodes + 53, 512);
  specB.box_nodes = std::min(specB.box_nodes + 16, 4096);
  SchwartzDncField conv = convolve(ctx.tg, f, g, specA);
  const MassProfile mp = mass_profile(ctx, 2);
  const int q = ctx.tg.g.fiber_dim;
  std::vector<ReportRow> rows;
  for (double t : ctx.s.t_grid) {
    const double t0 = now_ms();
    double metric = 0.0;
    if (!quadrature_converges(ctx, rng, mp, t)) metric = kInf;
    if (metric < kInf && t == 0.0) {
      BundleSchwartzField rhs =
          bundle_convolve(evaluate_e0(f), evaluate_e0(g), specB);
      for (std::uint64_t i = 0; i < 10; ++i) {
        auto [x, xi] = mass_point(ctx, rng, mp, i);
        metric = std::max(metric, rel_dev(conv.eval(x, xi, 0.0),
                                          rhs.eval(x, xi)));
      }
    } else if (metric < kInf) {
      GroupoidFunction ft = evaluate_et(ctx.tg, f, t);
      GroupoidFunction gt = evaluate_et(ctx.tg, g, t);
      for (std::uint64_t i = 0; i < 10; ++i) {
        auto [x, xi] = mass_point(ctx, rng, mp, i);
        const GhHint hint = product_hint(f.meta, g.meta, xi, q);
        std::optional<Box> box;
        if (g.support)
          box = slice_fiber_box(*g.support, x, t, g.meta.x_period);
        const double rhs =
            slice_product(ctx.tg, ft, gt, x, xi, specB, hint, box);
        metric = std::max(metric, rel_dev(conv.eval(x, xi, t), rhs));
      }
    }
    rows.push_back(
        make_row(ctx, "homomorphism", t, specB.base_nodes, metric, 1e-6, t0));
  }
  return rows;
}

std::vector<ReportRow> check_continuity(const CheckContext& ctx,
                                        CounterRng rng) {
  if (ctx.fields.size() < 2)
    throw ConfigError("continuity check needs two fields");
  const QuadratureSpec& spec = ctx.s.quadrature;
  SchwartzDncField conv =
      convolve(ctx.tg, ctx.fields[0], ctx.fields[1], spec);
  const MassProfile mp = mass_profile(ctx, 2);
  // Probes sit on the base bump's ramp, where the product genuinely moves
  // with t; on the plateau the deformation is invisible to first order.
  const FieldConfig& lead = ctx.s.fields.front();
  if (ctx.tg.base_dim() < 1 || lead.x_window.dim() != ctx.tg.base_dim() ||
      lead.x_margin <= 0.0)
    throw ConfigError("continuity check needs fields with a base window");
  const int kProbes = 20;
  std::vector<std::pair<VecD, VecD>> probes;
  for (std::uint64_t i = 0; i < kProbes; ++i) {
    auto [x, xi] = mass_point(ctx, rng, mp, i);
    for (size_t a = 0; a < x.size(); ++a) {
      const double side = (i + a) % 2 == 0 ? 1.0 : -1.0;
      const double edge = side > 0 ? lead.x_window.hi[a] : lead.x_window.lo[a];
      const double off = rng.uniform(i * 16 + 4 + a, 0.1, 0.9);
      x[a] = edge + side * off * lead.x_margin;
    }
    probes.emplace_back(std::move(x), std::move(xi));
  }
  std::vector<double> base;
  base.reserve(probes.size());
  for (const auto& [x, xi] : probes) base.push_back(conv.eval(x, xi, 0.0));
  std::vector<ReportRow> rows;
  for (double t : ctx.s.t_grid) {
    if (t <= 0.0) continue;
    const double t0 = now_ms();
    double metric = 0.0;
    if (!quadrature_converges(ctx, rng, mp, t)) metric = kInf;
    for (size_t i = 0; metric < kInf && i < probes.size(); ++i)
      metric = std::max(metric, std::abs(conv.eval(probes[i].first,
                                                   probes[i].second, t) -
                                         base[i]));
    // Bound with the expected decay rate: a product that stops converging
    // to its boundary value fails the small-t rows first.
    rows.push_back(make_row(ctx, "continuity", t, spec.base_nodes, metric,
                            10.0 * std::pow(t, 0.9), t0));
  }
  if (rows.empty())
    throw ConfigError("continuity check needs positive t grid entries");
  return rows;
}

std::vector<ReportRow> check_kernel_oracle(const CheckContext& ctx,
                                           CounterRng rng) {
  if (ctx.fields.size() < 2)
    throw ConfigError("kernel-oracle check needs two fields");
  const MassProfile mp = mass_profile(ctx, 2);
  std::vector<ReportRow> rows;
  for (double t : ctx.s.t_grid)
    for (int n : ctx.s.lattice_sizes) {
      const double t0 = now_ms();
      double metric;
      if (!quadrature_converges(ctx, rng, mp, t))
        metric = kInf;
      else
        metric = kernel_composition_oracle(ctx.tg, ctx.fields[0],
                                           ctx.fields[1], t, n,
                                           ctx.s.quadrature);
      rows.push_back(make_row(ctx, "kernel-oracle", t, n, metric, 1e-6, t0));
    }
  return rows;
}

std::vector<ReportRow> check_fourier(const CheckContext& ctx, CounterRng rng) {
  if (ctx.fields.size() < 2)
    throw ConfigError("fourier check needs two fields");
  const double t0 = now_ms();
  const SchwartzDncField& f = ctx.fields[0];
  const SchwartzDncField& g = ctx.fields[1];
  FiberLatticeSpec lat;
  lat.n = ctx.s.fourier_lattice;
  lat.radius = ctx.s.fourier_radius;
  lat.validate();
  const MassProfile mp = mass_profile(ctx, 2);
  double metric = 0.0;
  if (!quadrature_converges(ctx, rng, mp, 0.0)) metric = kInf;
  if (metric < kInf) {
    SchwartzDncField conv = convolve(ctx.tg, f, g, ctx.s.quadrature);
    FiberTransform Tc(evaluate_e0(conv), lat);
    FiberTransform Tf(evaluate_e0(f), lat);
    FiberTransform Tg(evaluate_e0(g), lat);
    const int p = ctx.tg.base_dim();
    VecD x(static_cast<size_t>(p), 0.0);
    const FieldConfig& lead = ctx.s.fields.front();
    for (int a = 0; a < p; ++a) {
      if (static_cast<int>(lead.x_period.size()) == p &&
          lead.x_period[static_cast<size_t>(a)] > 0.0)
        x[static_cast<size_t>(a)] = 0.5 * lead.x_period[static_cast<size_t>(a)];
      else if (lead.x_window.dim() == p)
        x[static_cast<size_t>(a)] =
            0.5 * (lead.x_window.lo[static_cast<size_t>(a)] +
                   lead.x_window.hi[static_cast<size_t>(a)]);
    }
    for (int k = 0; k < lat.n; ++k) {
      const double eta = lat.eta_at(k);
      const std::complex<double> lhs = Tc.eval(x, eta);
      const std::complex<double> rhs = Tf.eval(x, eta) * Tg.eval(x, eta);
      if (std::abs(rhs) <= 1e-12) continue;
      metric = std::max(metric, std::abs(lhs - rhs) /
                                    std::max(std::abs(lhs), std::abs(rhs)));
    }
  }
  return {make_row(ctx, "fourier", 0.0, ctx.s.fourier_lattice, metric, 1e-6,
                   t0)};
}

std::vector<ReportRow> check_seminorm(const CheckContext& ctx, CounterRng) {
  const double t0 = now_ms();
  SeminormGrid grid;
  grid.seed = ctx.s.seed;
  double metric = 0.0;
  int gsize = 0;
  for (const SchwartzDncField& f : ctx.fields) {
    SeminormReport rep = seminorm_scan(f, 2, 3, grid);
    metric = std::max(metric, rep.all_bounded ? rep.max_value : kInf);
    gsize = std::max(gsize, rep.grid_size);
  }
  return {make_row(ctx, "seminorm", 0.0, gsize, metric, 1e6, t0)};
}

std::vector<ReportRow> check_support(const CheckContext& ctx, CounterRng) {
  const double t0 = now_ms();
  const int kPerField = 400, kComposed = 250;
  int total = 0;
  size_t violations = 0;
  for (size_t i = 0; i < ctx.fields.size(); ++i) {
    violations +=
        conic_support_check(ctx.fields[i], kPerField, ctx.s.seed + i).size();
    total += kPerField;
  }
  if (ctx.fields.size() >= 2) {
    SchwartzDncField conv =
        convolve(ctx.tg, ctx.fields[0], ctx.fields[1], ctx.s.quadrature);
    violations += conic_support_check(conv, kComposed,
                                      ctx.s.seed + ctx.fields.size())
                      .size();
    total += kComposed;
  }
  return {make_row(ctx, "support", 0.0, total,
                   static_cast<double>(violations), 0.0, t0)};
}

std::vector<ReportRow> run_check(const CheckContext& ctx,
                                 const std::string& name) {
  const auto& names = scenario_check_names();
  const auto it = std::find(names.begin(), names.end(), name);
  const std::uint64_t stream =
      static_cast<std::uint64_t>(it - names.begin()) + 1;
  CounterRng rng = CounterRng(ctx.s.seed).derive(stream);
  if (name == "associativity") return check_associativity(ctx, rng);
  if (name == "homomorphism") return check_homomorphism(ctx, rng);
  if (name == "continuity") return check_continuity(ctx, rng);
  if (name == "kernel-oracle") return check_kernel_oracle(ctx, rng);
  if (name == "fourier") return check_fourier(ctx, rng);
  if (name == "seminorm") return check_seminorm(ctx, rng);
  if (name == "support") return check_support(ctx, rng);
  throw ConfigError("unknown check: " + name);
}

void canonical_sort(std::vector<ReportRow>& rows) {
  std::sort(rows.begin(), rows.end(),
            [](const ReportRow& a, const ReportRow& b) {
              return std::tie(a.scenario, a.check, a.t, a.grid_size) <
                     std::tie(b.scenario, b.check, b.t, b.grid_size);
            });
}

bool name_ok(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '_' &&
        c != '-')
      return false;
  return true;
}

// --- JSON ---------------------------------------------------------------

void reject_unknown_keys(const njson& j, const std::set<std::string>& allowed,
                         const char* what) {
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw ConfigError(std::string("unknown ") + what + " key: " +
                        item.key());
}

Box box_from_json(const njson& j) {
  reject_unknown_keys(j, {"lo", "hi"}, "window");
  Box b;
  b.lo = j.at("lo").get<VecD>();
  b.hi = j.at("hi").get<VecD>();
  return b;
}

FieldConfig field_from_json(const njson& j) {
  reject_unknown_keys(j,
                      {"family", "base_dim", "normal_dim", "amplitude",
                       "xi_center", "xi_sigma", "hermite_orders",
                       "poly_coeffs", "x_window", "x_margin", "x_period",
                       "cutoff_inner", "cutoff_outer", "support_slabs",
                       "instance", "name"},
                      "field");
  FieldConfig c;
  if (j.contains("family")) c.family = j.at("family").get<std::string>();
  if (j.contains("base_dim")) c.base_dim = j.at("base_dim").get<int>();
  if (j.contains("normal_dim")) c.normal_dim = j.at("normal_dim").get<int>();
  if (j.contains("amplitude")) c.amplitude = j.at("amplitude").get<double>();
  if (j.contains("xi_center")) c.xi_center = j.at("xi_center").get<VecD>();
  if (j.contains("xi_sigma")) c.xi_sigma = j.at("xi_sigma").get<VecD>();
  if (j.contains("hermite_orders"))
    c.hermite_orders = j.at("hermite_orders").get<std::vector<int>>();
  if (j.contains("poly_coeffs"))
    c.poly_coeffs = j.at("poly_coeffs").get<VecD>();
  if (j.contains("x_window")) c.x_window = box_from_json(j.at("x_window"));
  if (j.contains("x_margin")) c.x_margin = j.at("x_margin").get<double>();
  if (j.contains("x_period")) c.x_period = j.at("x_period").get<VecD>();
  if (j.contains("cutoff_inner"))
    c.cutoff_inner = j.at("cutoff_inner").get<double>();
  if (j.contains("cutoff_outer"))
    c.cutoff_outer = j.at("cutoff_outer").get<double>();
  if (j.contains("support_slabs"))
    c.support_slabs = j.at("support_slabs").get<int>();
  if (j.contains("instance")) c.instance = j.at("instance").get<std::string>();
  if (j.contains("name")) c.name = j.at("name").get<std::string>();
  return c;
}

njson field_to_json(const FieldConfig& c) {
  njson j;
  j["family"] = c.family;
  j["base_dim"] = c.base_dim;
  j["normal_dim"] = c.normal_dim;
  j["amplitude"] = c.amplitude;
  j["xi_center"] = c.xi_center;
  j["xi_sigma"] = c.xi_sigma;
  if (!c.hermite_orders.empty()) j["hermite_orders"] = c.hermite_orders;
  if (!c.poly_coeffs.empty()) j["poly_coeffs"] = c.poly_coeffs;
  if (c.x_window.dim() > 0)
    j["x_window"] = njson{{"lo", c.x_window.lo}, {"hi", c.x_window.hi}};
  j["x_margin"] = c.x_margin;
  if (!c.x_period.empty()) j["x_period"] = c.x_period;
  j["cutoff_inner"] = c.cutoff_inner;
  j["cutoff_outer"] = c.cutoff_outer;
  j["support_slabs"] = c.support_slabs;
  if (!c.instance.empty()) j["instance"] = c.instance;
  if (!c.name.empty()) j["name"] = c.name;
  return j;
}

}  // namespace

const std::vector<std::string>& scenario_check_names() {
  static const std::vector<std::string> names{
      "associativity", "homomorphism", "continuity", "kernel-oracle",
      "fourier",       "seminorm",     "support"};
  return names;
}

void Scenario::validate() const {
  if (!name_ok(name))
    throw ConfigError("scenario name must be nonempty [A-Za-z0-9._-]: '" +
                      name + "'");
  groupoid_by_key(groupoid);  // unknown instance keys throw here
  if (fields.empty()) throw ConfigError("scenario needs at least one field");
  for (FieldConfig cfg : fields) {
    if (cfg.instance.empty()) cfg.instance = groupoid;
    field_from_config(cfg);  // unknown families / bad shapes throw here
  }
  if (t_grid.empty()) throw ConfigError("scenario needs a t grid");
  for (size_t i = 0; i < t_grid.size(); ++i) {
    if (t_grid[i] < 0.0 || t_grid[i] > 1.0)
      throw ConfigError("t grid entries must lie in [0, 1]");
    if (i > 0 && t_grid[i] <= t_grid[i - 1])
      throw ConfigError("t grid must be strictly increasing");
  }
  if (checks.empty()) throw ConfigError("scenario needs at least one check");
  const auto& known = scenario_check_names();
  std::set<std::string> seen;
  for (const std::string& c : checks) {
    if (std::find(known.begin(), known.end(), c) == known.end())
      throw ConfigError("unknown check: " + c);
    if (!seen.insert(c).second) throw ConfigError("duplicate check: " + c);
  }
  if (seen.count("kernel-oracle")) {
    if (lattice_sizes.empty())
      throw ConfigError("kernel-oracle check needs lattice sizes");
    for (int n : lattice_sizes)
      if (n < 64 || n > 2048)
        throw ConfigError("kernel-oracle lattice sizes must lie in [64, 2048]");
    for (double t : t_grid)
      if (t == 0.0)
        throw ConfigError("kernel-oracle check needs t > 0 grid entries");
  }
  if (seen.count("fourier") && !fields.empty() && fields[0].normal_dim != 1)
    throw ConfigError("fourier check needs one fiber axis");
  quadrature.validate();
}

Scenario scenario_from_json(const std::string& text) {
  njson j;
  try {
    j = njson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario JSON does not parse: ") +
                      e.what());
  }
  try {
    if (!j.is_object()) throw ConfigError("scenario JSON must be an object");
    reject_unknown_keys(j,
                        {"name", "groupoid", "fields", "t_grid", "quadrature",
                         "checks", "seed", "lattice_sizes", "fourier_lattice",
                         "fourier_radius"},
                        "scenario");
    Scenario s;
    s.name = j.at("name").get<std::string>();
    s.groupoid = j.at("groupoid").get<std::string>();
    for (const njson& fj : j.at("fields"))
      s.fields.push_back(field_from_json(fj));
    s.t_grid = j.at("t_grid").get<std::vector<double>>();
    s.checks = j.at("checks").get<std::vector<std::string>>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("lattice_sizes"))
      s.lattice_sizes = j.at("lattice_sizes").get<std::vector<int>>();
    if (j.contains("fourier_lattice"))
      s.fourier_lattice = j.at("fourier_lattice").get<int>();
    if (j.contains("fourier_radius"))
      s.fourier_radius = j.at("fourier_radius").get<double>();
    if (j.contains("quadrature")) {
      const njson& q = j.at("quadrature");
      reject_unknown_keys(q,
                          {"base_nodes", "box_nodes", "t_switch",
                           "target_rel_tol", "max_refinements"},
                          "quadrature");
      if (q.contains("base_nodes"))
        s.quadrature.base_nodes = q.at("base_nodes").get<int>();
      if (q.contains("box_nodes"))
        s.quadrature.box_nodes = q.at("box_nodes").get<int>();
      if (q.contains("t_switch"))
        s.quadrature.t_switch = q.at("t_switch").get<double>();
      if (q.contains("target_rel_tol"))
        s.quadrature.target_rel_tol = q.at("target_rel_tol").get<double>();
      if (q.contains("max_refinements"))
        s.quadrature.max_refinements = q.at("max_refinements").get<int>();
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid scenario JSON: ") + e.what());
  }
}

std::string scenario_to_json(const Scenario& s) {
  njson j;
  j["name"] = s.name;
  j["groupoid"] = s.groupoid;
  j["fields"] = njson::array();
  for (const FieldConfig& c : s.fields) j["fields"].push_back(field_to_json(c));
  j["t_grid"] = s.t_grid;
  j["quadrature"] =
      njson{{"base_nodes", s.quadrature.base_nodes},
            {"box_nodes", s.quadrature.box_nodes},
            {"t_switch", s.quadrature.t_switch},
            {"target_rel_tol", s.quadrature.target_rel_tol},
            {"max_refinements", s.quadrature.max_refinements}};
  j["checks"] = s.checks;
  j["seed"] = s.seed;
  j["lattice_sizes"] = s.lattice_sizes;
  j["fourier_lattice"] = s.fourier_lattice;
  j["fourier_radius"] = s.fourier_radius;
  return j.dump(2) + "\n";
}

std::vector<Scenario> builtin_scenarios() {
  std::vector<Scenario> out;

  auto r1_field = [](double sigma, double center, double amp,
                     const char* nm) {
    FieldConfig c;
    c.amplitude = amp;
    c.xi_center = {center};
    c.xi_sigma = {sigma};
    c.x_window = Box{{-6.0}, {6.0}};
    c.x_margin = 1.5;
    c.instance = "pair-r1";
    c.name = nm;
    return c;
  };
  {
    Scenario s;
    s.name = "gaussian-pair-r1";
    s.groupoid = "pair-r1";
    // Amplitude 0.03 keeps transform products well above the absolute
    // magnitude floor of the fourier check without touching any of the
    // scale-invariant metrics.
    s.fields = {r1_field(0.75, 0.2, 0.03, "f"), r1_field(0.6, -0.1, 0.03, "g"),
                r1_field(0.9, 0.05, 0.03, "h")};
    s.t_grid = {0.0, 0.1, 0.5, 1.0};
    s.checks = {"associativity", "homomorphism", "fourier", "seminorm",
                "support"};
    s.seed = 2024;
    out.push_back(std::move(s));
  }

  auto t1_field = [](double sigma, double center, const char* nm) {
    FieldConfig c;
    c.xi_center = {center};
    c.xi_sigma = {sigma};
    c.x_window = Box{{0.0}, {1.0}};
    c.x_margin = 0.0;
    c.x_period = {1.0};
    c.cutoff_inner = 5.0;
    c.cutoff_outer = 9.5;
    c.instance = "pair-t1";
    c.name = nm;
    return c;
  };
  {
    Scenario s;
    s.name = "gaussian-pair-t1";
    s.groupoid = "pair-t1";
    s.fields = {t1_field(0.05, 0.0, "f"), t1_field(0.045, 0.02, "g"),
                t1_field(0.045, -0.03, "h")};
    s.t_grid = {0.0, 0.3};
    s.checks = {"associativity", "homomorphism", "support"};
    s.seed = 7;
    out.push_back(std::move(s));
  }
  {
    Scenario s;
    s.name = "kernel-oracle-t1";
    s.groupoid = "pair-t1";
    s.fields = {t1_field(0.05, 0.0, "f"), t1_field(0.045, 0.02, "g")};
    s.t_grid = {0.3};
    s.checks = {"kernel-oracle"};
    s.lattice_sizes = {256, 512};
    s.seed = 3;
    out.push_back(std::move(s));
  }

  auto q1_field = [](double sigma, const char* nm) {
    FieldConfig c;
    c.base_dim = 0;
    c.xi_sigma = {sigma};
    c.instance = "abelian-q1";
    c.name = nm;
    return c;
  };
  {
    Scenario s;
    s.name = "group-gaussians-q1";
    s.groupoid = "abelian-q1";
    s.fields = {q1_field(0.7071067811865476, "f"), q1_field(1.0, "g"),
                q1_field(0.9, "h")};
    s.t_grid = {0.0, 0.25, 1.0};
    s.checks = {"associativity", "homomorphism", "seminorm", "support"};
    s.seed = 11;
    out.push_back(std::move(s));
  }

  auto bundle_field = [](double sigma, double center, const char* nm) {
    FieldConfig c;
    c.xi_center = {center};
    c.xi_sigma = {sigma};
    c.x_window = Box{{0.0}, {1.0}};
    c.x_margin = 0.0;
    c.x_period = {1.0};
    c.instance = "bundle-t1-q1";
    c.name = nm;
    return c;
  };
  {
    Scenario s;
    s.name = "bundle-sections-t1";
    s.groupoid = "bundle-t1-q1";
    s.fields = {bundle_field(0.8, 0.1, "f"), bundle_field(0.6, -0.2, "g"),
                bundle_field(0.7, 0.0, "h")};
    s.t_grid = {0.0, 0.5, 1.0};
    s.checks = {"associativity", "homomorphism", "seminorm", "support"};
    s.seed = 5;
    out.push_back(std::move(s));
  }
  {
    Scenario s;
    s.name = "continuity-pair-r1";
    s.groupoid = "pair-r1";
    FieldConfig f;
    f.xi_center = {0.2};
    f.xi_sigma = {0.75};
    f.x_window = Box{{-2.0}, {2.0}};
    f.x_margin = 1.0;
    f.instance = "pair-r1";
    f.name = "f";
    FieldConfig g = f;
    g.xi_center = {-0.1};
    g.xi_sigma = {0.6};
    g.name = "g";
    s.fields = {f, g};
    s.t_grid = {0.001, 0.002587, 0.006695, 0.017322, 0.044818, 0.11596, 0.3};
    s.checks = {"continuity"};
    s.seed = 13;
    out.push_back(std::move(s));
  }
  return out;
}

Scenario builtin_scenario(const std::string& name) {
  for (Scenario& s : builtin_scenarios())
    if (s.name == name) return std::move(s);
  throw ConfigError("unknown scenario: " + name);
}

std::vector<ReportRow> run_scenario(const Scenario& s) {
  s.validate();
  const TangentGroupoidModel tg(groupoid_by_key(s.groupoid));
  std::vector<SchwartzDncField> fields;
  for (FieldConfig cfg : s.fields) {
    if (cfg.instance.empty()) cfg.instance = s.groupoid;
    fields.push_back(field_from_config(cfg));
  }
  const CheckContext ctx{s, tg, fields};
  std::vector<std::future<std::vector<ReportRow>>> futs;
  futs.reserve(s.checks.size());
  for (const std::string& c : s.checks)
    futs.push_back(std::async(std::launch::async,
                              [&ctx, c] { return run_check(ctx, c); }));
  std::vector<ReportRow> rows;
  for (auto& fu : futs) {
    std::vector<ReportRow> part = fu.get();
    rows.insert(rows.end(), std::make_move_iterator(part.begin()),
                std::make_move_iterator(part.end()));
  }
  canonical_sort(rows);
  return rows;
}

bool all_rows_pass(const std::vector<ReportRow>& rows) {
  return std::all_of(rows.begin(), rows.end(),
                     [](const ReportRow& r) { return r.pass; });
}

std::string rows_to_csv(std::vector<ReportRow> rows) {
  canonical_sort(rows);
  std::string out = "scenario,check,t,grid_size,metric,threshold,pass,runtime_ms\n";
  for (const ReportRow& r : rows) {
    out += r.scenario;
    out += ',';
    out += r.check;
    out += ',';
    out += fmt_g(r.t);
    out += ',';
    out += std::to_string(r.grid_size);
    out += ',';
    out += fmt_g(r.metric);
    out += ',';
    out += fmt_g(r.threshold);
    out += ',';
    out += r.pass ? '1' : '0';
    out += ',';
    out += fmt_g(r.runtime_ms);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_num(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw ConfigError("malformed number in report: '" + tok + "'");
  return v;
}

}  // namespace

std::vector<ReportRow> rows_from_csv(const std::string& text) {
  std::vector<std::string> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (std::string& l : lines)
    if (!l.empty() && l.back() == '\r') l.pop_back();
  if (lines.empty() ||
      lines[0] != "scenario,check,t,grid_size,metric,threshold,pass,runtime_ms")
    throw ConfigError("report CSV is missing its header");
  std::vector<ReportRow> rows;
  for (size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> tok = split(lines[i], ',');
    if (tok.size() != 8)
      throw ConfigError("malformed report row: '" + lines[i] + "'");
    ReportRow r;
    r.scenario = tok[0];
    r.check = tok[1];
    r.t = parse_num(tok[2]);
    r.grid_size = static_cast<int>(parse_num(tok[3]));
    r.metric = parse_num(tok[4]);
    r.threshold = parse_num(tok[5]);
    r.pass = tok[6] == "1";
    r.runtime_ms = parse_num(tok[7]);
    rows.push_back(std::move(r));
  }
  return rows;
}

double loglog_slope(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 2) throw SeriesError("slope fit needs at least two points");
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : pts) {
    if (x <= 0.0 || y <= 0.0)
      throw SeriesError("slope fit needs positive coordinates");
    sx += std::log(x);
    sy += std::log(y);
  }
  const double mx = sx / static_cast<double>(pts.size());
  const double my = sy / static_cast<double>(pts.size());
  double num = 0.0, den = 0.0;
  for (const auto& [x, y] : pts) {
    const double dx = std::log(x) - mx;
    num += dx * (std::log(y) - my);
    den += dx * dx;
  }
  if (den == 0.0) throw SeriesError("slope fit needs distinct abscissae");
  return num / den;
}

std::string emit_series(const std::vector<ReportRow>& rows,
                        const std::string& kind) {
  std::string check, columns;
  bool x_is_t = true;
  if (kind == "continuity-curve") {
    check = "continuity";
    columns = "t metric";
  } else if (kind == "convergence-curve") {
    check = "kernel-oracle";
    columns = "grid_size metric";
    x_is_t = false;
  } else {
    throw SeriesError("unknown series kind: " + kind);
  }
  std::vector<std::pair<double, double>> pts;
  for (const ReportRow& r : rows) {
    if (r.check != check) continue;
    pts.emplace_back(x_is_t ? r.t : static_cast<double>(r.grid_size),
                     r.metric);
  }
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> usable;
  std::set<double> distinct;
  for (const auto& p : pts)
    if (p.first > 0.0 && p.second > 0.0 && std::isfinite(p.second)) {
      usable.push_back(p);
      distinct.insert(p.first);
    }
  if (distinct.size() < 3)
    throw SeriesError("series needs at least three points with positive "
                      "metric, got " +
                      std::to_string(distinct.size()));
  const double slope = loglog_slope(usable);
  std::string out;
  out += "# kind: " + kind + "\n";
  out += "# fitted log-log slope: " + fmt_g(slope) + "\n";
  out += "# columns: " + columns + "\n";
  for (const auto& [x, y] : pts) out += fmt_g(x) + " " + fmt_g(y) + "\n";
  return out;
}

}  // namespace deform
