#pragma once

#include <functional>
#include <string>
#include <vector>

#include "deform/common.hpp"

namespace deform {

// Nodes/weights for an n-point rule. For the decay-weighted (Hermite) rule
// the weights already include the Gaussian factor, i.e.
//   integral f(x) dx ~= sum w_i f(x_i)
// holds for f with Gaussian-like decay; no e^{+x^2} rescaling is applied,
// which keeps large-n rules free of overflow.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Cached; thread-safe. n in [1, 512]: past ~512 the scaled recurrence
// underflows at the outermost nodes and weights lose meaning.
const GaussRule& hermite_rule(int n);

// Cached; thread-safe. Nodes/weights on [-1, 1], n in [1, 4096].
const GaussRule& legendre_rule(int n);

struct QuadratureSpec {
  int base_nodes = 64;        // decay-weighted rule size at small t
  int box_nodes = 48;         // per-axis nodes for box rules at larger t
  double t_switch = 0.1;      // decay-weighted route for t <= t_switch
  double target_rel_tol = 1e-9;
  int max_refinements = 4;

  void validate() const;  // throws ConfigError
};

struct QuadResult {
  double value = 0.0;
  double error_estimate = 0.0;  // |I_n - I_coarse| / scale
  int nodes_used = 0;
  bool converged = false;
};

// Center/width hint for the decay-weighted rule: nodes are placed at
// center + scale * x_i and weights picked up a factor scale * e^{x_i^2}...
// — not literally (that would overflow); instead the integrand is expected
// to carry its own decay and the hint just aligns the rule's resolution
// window with where the mass sits.
struct GhHint {
  VecD center;  // per-axis
  VecD scale;   // per-axis, > 0
};

// Integrates fn over R^dim assuming Gaussian-like decay of fn itself.
// fn receives the node coordinates. Refines by doubling base_nodes until
// the error estimate (vs. a 5n/8-point rule) meets target_rel_tol or the
// refinement budget / 512-node cap is hit.
QuadResult integrate_decay(const std::function<double(SpanD)>& fn, int dim,
                           const QuadratureSpec& spec, const GhHint& hint);

// Integrates fn over the box (empty box => exact zero, converged).
// Same refinement policy with a 4096-node per-axis cap.
QuadResult integrate_box(const std::function<double(SpanD)>& fn, const Box& box,
                         const QuadratureSpec& spec);

}  // namespace deform
