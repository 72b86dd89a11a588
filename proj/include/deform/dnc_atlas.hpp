#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "deform/common.hpp"

namespace deform {

// Point of the deformation space attached to a coordinate pair
// (R^p x R^q, {xi = 0}). The boundary stratum (t = 0) carries a base
// point with a normal vector; the interior stratum carries a point of
// the ambient chart together with its deformation parameter t in (0, 1].
struct BoundaryPoint {
  VecD x;
  VecD xi;
};
struct InteriorPoint {
  VecD m;  // full ambient coordinates (x, xi_m)
  double t = 1.0;
};
using DncPoint = std::variant<BoundaryPoint, InteriorPoint>;

// Blowup-side coordinates (x, xi, t). The gluing map sends (x, xi, 0)
// to the boundary stratum unchanged and (x, xi, t) to the squashed
// ambient point (x, t*xi) for t > 0.
struct BlowupCoords {
  VecD x;
  VecD xi;
  double t = 0.0;
};

DncPoint psi_forward(SpanD x, SpanD xi, double t);
BlowupCoords psi_inverse(const DncPoint& p, int base_dim);

// A coordinate pair: ambient chart U in R^p x R^q with the distinguished
// slice {xi = 0}. Membership in U is an arbitrary open predicate on the
// ambient coordinates; from_box builds the common rectangular case.
struct SlicePair {
  int base_dim = 0;    // p >= 0
  int normal_dim = 1;  // q >= 1
  std::function<bool(SpanD x, SpanD xi_ambient)> domain_test;

  static SlicePair from_box(int p, int q, Box ambient);
};

// Chart-domain test: (x, xi, t) is admissible iff t in [0, 1] and the
// squashed point (x, t*xi) lies in U. At t = 0 only (x, 0) is tested.
bool omega_contains(const SlicePair& slice, SpanD x, SpanD xi, double t);
bool omega_contains(const Box& ambient, SpanD x, SpanD xi, double t);

// Smooth map between coordinate pairs that preserves the distinguished
// slices: f_normal(x, 0) must vanish identically. jac_normal is the
// xi-derivative of f_normal along the slice; supply it analytically or
// install a finite-difference version.
struct PairMorphism {
  int in_base = 0, in_normal = 0;
  int out_base = 0, out_normal = 0;
  std::function<VecD(SpanD x, SpanD xi)> f_base;
  std::function<VecD(SpanD x, SpanD xi)> f_normal;
  std::function<Mat(SpanD x)> jac_normal;

  // Central differences on f_normal with step 1e-5 * (1 + |x|_inf).
  PairMorphism& install_fd_jacobian();
};

// g after f; jacobians chain because both maps kill the slice.
PairMorphism compose(const PairMorphism& g, const PairMorphism& f);

// The induced map on blowup coordinates:
//   t  = 0:  (f_base(x,0), jac_normal(x) . xi, 0)
//   t  > 0:  (f_base(x,t*xi), f_normal(x,t*xi)/t, t)
// Near t = 0 the quotient form loses all significant digits, so below
// t = 1e-8 a second-order Taylor form replaces it. t in (0, 1e-300) is
// rejected outright: t*xi underflows before the quotient can be formed.
BlowupCoords transition_map(const PairMorphism& f, SpanD x, SpanD xi, double t);

// As above, plus admissibility of the input in the source chart and a
// check that f actually preserves the slice at this x.
BlowupCoords transition_map_checked(const PairMorphism& f, const SlicePair& source,
                                    SpanD x, SpanD xi, double t);

// The functorial action on deformation-space points: boundary points map
// through (f_base(.,0), jac_normal), interior points through f itself
// with t untouched.
DncPoint dnc_functor_apply(const PairMorphism& f, const DncPoint& p);

// Numerical check that the induced map is differentiable in t across the
// boundary stratum. One-sided difference quotients D_j at steps h0/2^j
// are Richardson-extrapolated; the observed convergence order of the
// extrapolants is estimated from successive gaps. Saturation (all gaps
// at the noise floor) means the quotients converged exactly.
struct SmoothnessReport {
  VecD boundary_value;     // induced normal part at t = 0
  VecD t_derivative;       // extrapolated one-sided d/dt at 0
  double observed_order;   // +inf when saturated
  bool saturated;
  bool ok;                 // saturated or observed_order >= 1.5
  std::vector<double> gaps;  // successive extrapolant distances
};

SmoothnessReport smoothness_probe(const PairMorphism& f, SpanD x, SpanD xi,
                                  double h0 = 0.1, int levels = 7);

}  // namespace deform
