#include "deform/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "deform/parallel.hpp"

namespace deform {
namespace {

// Orthonormal-Hermite functions scaled by the Gaussian half-weight:
//   psi_k(x) = p_k(x) e^{-x^2/2},
// evaluated by upward recurrence. The scaling keeps every intermediate
// representable out to the largest root of rules up to ~512 points,
// where the unscaled polynomials would have overflowed long before.
struct HermEval {
  double pn;     // psi_n(x)
  double pnm1;   // psi_{n-1}(x)
  double chris;  // sum_{k<n} psi_k(x)^2   (inverse Christoffel weight)
};

HermEval herm_eval(int n, double x) {
  const double p0 = 0.7511255444649425 * std::exp(-0.5 * x * x);  // pi^{-1/4}
  if (n == 0) return {p0, 0.0, 0.0};
  double chris = p0 * p0;
  double pkm1 = p0;
  double pk = std::sqrt(2.0) * x * p0;
  for (int k = 1; k < n; ++k) {
    chris += pk * pk;
    double pkp1 = x * std::sqrt(2.0 / (k + 1)) * pk -
                  std::sqrt(static_cast<double>(k) / (k + 1)) * pkm1;
    pkm1 = pk;
    pk = pkp1;
  }
  return {pk, pkm1, chris};
}

GaussRule build_hermite(int n) {
  GaussRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  double z = 0.0, z_prev = 0.0, z_prev2 = 0.0;
  for (int j = 0; j < m; ++j) {
    // Roots found largest-first; spacing-based guesses keep Newton local.
    if (j == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (j == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (j == 2) {
      z = 1.86 * z - 0.86 * z_prev2;
    } else if (j == 3) {
      z = 1.91 * z - 0.91 * z_prev2;
    } else {
      z = 2.0 * z - z_prev2;
    }
    for (int it = 0; it < 100; ++it) {
      HermEval e = herm_eval(n, z);
      double deriv = std::sqrt(2.0 * n) * e.pnm1 - z * e.pn;
      double dz = e.pn / deriv;
      z -= dz;
      if (std::abs(dz) <= 1e-15 * (1.0 + std::abs(z))) break;
    }
    HermEval e = herm_eval(n, z);
    // Total weight for plain-dx integration of self-decaying integrands:
    // W = w_gauss * e^{z^2} = 1 / sum_{k<n} psi_k(z)^2.
    double w = 1.0 / e.chris;
    rule.nodes[n - 1 - j] = z;
    rule.nodes[j] = -z;
    rule.weights[n - 1 - j] = w;
    rule.weights[j] = w;
    z_prev2 = z_prev;
    z_prev = z;
  }
  if (n % 2 == 1) rule.nodes[m - 1] = 0.0;
  return rule;
}

GaussRule build_legendre(int n) {
  GaussRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) <= 1e-15) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    double w = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

const GaussRule& cached_rule(int n, int cap, const char* kind,
                             GaussRule (*build)(int),
                             std::map<int, GaussRule>& cache, std::mutex& mu) {
  if (n < 1 || n > cap)
    throw ConfigError(std::string(kind) + " rule size out of range: " + std::to_string(n));
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build(n)).first;
  return it->second;
}

// Tensor-product sum over n^dim decay-rule nodes, affinely mapped by hint.
double decay_tensor(const std::function<double(SpanD)>& fn, int dim, int n,
                    const GhHint& hint) {
  const GaussRule& r = hermite_rule(n);
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n);
  return map_sum<double>(total, [&](std::size_t idx) {
    VecD x(dim);
    double w = 1.0;
    std::size_t rem = idx;
    for (int a = 0; a < dim; ++a) {
      std::size_t d = rem % static_cast<std::size_t>(n);
      rem /= static_cast<std::size_t>(n);
      x[a] = hint.center[a] + hint.scale[a] * r.nodes[d];
      w *= hint.scale[a] * r.weights[d];
    }
    return w * fn(x);
  });
}

double box_tensor(const std::function<double(SpanD)>& fn, const Box& box, int n) {
  const GaussRule& r = legendre_rule(n);
  const int dim = box.dim();
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n);
  return map_sum<double>(total, [&](std::size_t idx) {
    VecD x(dim);
    double w = 1.0;
    std::size_t rem = idx;
    for (int a = 0; a < dim; ++a) {
      std::size_t d = rem % static_cast<std::size_t>(n);
      rem /= static_cast<std::size_t>(n);
      double half = 0.5 * (box.hi[a] - box.lo[a]);
      x[a] = box.lo[a] + half * (r.nodes[d] + 1.0);
      w *= half * r.weights[d];
    }
    return w * fn(x);
  });
}

struct RefineOutcome {
  double fine = 0.0;
  double rel = 0.0;
  int n = 0;
  bool ok = false;
};

// Compares the n-point result against an independent coarse rule (~5n/8,
// chosen to avoid shared nodes) and doubles n until they agree.
template <typename Eval>
RefineOutcome refine(Eval&& eval, int n0, int cap, double tol, int max_refine) {
  int n = std::min(n0, cap);
  RefineOutcome out;
  for (int round = 0;; ++round) {
    double fine = eval(n);
    int nc = std::max(4, (5 * n) / 8);
    if (nc >= n) nc = n - 1;
    double coarse = (nc >= 1) ? eval(nc) : 0.0;
    double err = std::abs(fine - coarse);
    double denom = std::max({std::abs(fine), std::abs(coarse), 1e-12});
    out.fine = fine;
    out.rel = err / denom;
    out.n = n;
    if (err <= tol * denom || err <= 1e-15) {
      out.ok = true;
      return out;
    }
    if (n >= cap || round >= max_refine) return out;
    n = std::min(2 * n, cap);
  }
}

}  // namespace

const GaussRule& hermite_rule(int n) {
  static std::map<int, GaussRule> cache;
  static std::mutex mu;
  return cached_rule(n, 512, "decay-weighted", build_hermite, cache, mu);
}

const GaussRule& legendre_rule(int n) {
  static std::map<int, GaussRule> cache;
  static std::mutex mu;
  return cached_rule(n, 4096, "box", build_legendre, cache, mu);
}

void QuadratureSpec::validate() const {
  if (base_nodes < 8 || base_nodes > 512)
    throw ConfigError("quadrature base_nodes must be in [8, 512]");
  if (box_nodes < 8 || box_nodes > 4096)
    throw ConfigError("quadrature box_nodes must be in [8, 4096]");
  if (!(t_switch > 0.0) || t_switch > 0.5)
    throw ConfigError("quadrature t_switch must be in (0, 1/2]");
  if (target_rel_tol < 1e-14 || target_rel_tol > 1e-2)
    throw ConfigError("quadrature target_rel_tol must be in [1e-14, 1e-2]");
  if (max_refinements < 0 || max_refinements > 8)
    throw ConfigError("quadrature max_refinements must be in [0, 8]");
}

QuadResult integrate_decay(const std::function<double(SpanD)>& fn, int dim,
                           const QuadratureSpec& spec, const GhHint& hint) {
  if (dim < 0) throw DomainViolation("negative integration dimension");
  if (static_cast<int>(hint.center.size()) != dim ||
      static_cast<int>(hint.scale.size()) != dim)
    throw DomainViolation("quadrature hint dimension mismatch");
  for (double s : hint.scale)
    if (!(s > 0.0)) throw DomainViolation("quadrature hint scale must be positive");
  if (dim == 0) return {fn(SpanD{}), 0.0, 1, true};
  RefineOutcome out =
      refine([&](int n) { return decay_tensor(fn, dim, n, hint); }, spec.base_nodes,
             512, spec.target_rel_tol, spec.max_refinements);
  return {out.fine, out.rel, out.n, out.ok};
}

QuadResult integrate_box(const std::function<double(SpanD)>& fn, const Box& box,
                         const QuadratureSpec& spec) {
  if (box.empty()) return {0.0, 0.0, 0, true};
  if (box.dim() == 0) return {fn(SpanD{}), 0.0, 1, true};
  RefineOutcome out =
      refine([&](int n) { return box_tensor(fn, box, n); }, spec.box_nodes, 4096,
             spec.target_rel_tol, spec.max_refinements);
  return {out.fine, out.rel, out.n, out.ok};
}

}  // namespace deform
