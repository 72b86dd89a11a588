#pragma once

#include <string>

#include "deform/dnc_atlas.hpp"

namespace deform {

// A concrete Lie groupoid with a global chart near the units: arrows over
// base point x are parametrized by fiber coordinates, with from_fiber(x, .)
// ranging over the source fiber at x. All maps are total on their stated
// domains; multiply throws ComposabilityError when source and target
// mismatch beyond 1e-9 (measured through the wrap on periodic bases).
struct GroupoidModel {
  std::string key;
  int base_dim = 0;   // units manifold dimension
  int fiber_dim = 0;  // source fiber dimension
  int arrow_dim = 0;  // coordinates storing one arrow
  VecD base_period;   // per-axis period of the base, empty = flat
  VecD fiber_period;  // per-axis period of the source fibers, empty = flat

  std::function<VecD(SpanD arrow)> source;
  std::function<VecD(SpanD arrow)> target;
  std::function<VecD(SpanD x)> unit_arrow;
  std::function<VecD(SpanD gamma, SpanD delta)> multiply;  // s(gamma)=r(delta)
  std::function<VecD(SpanD arrow)> invert;
  std::function<VecD(SpanD arrow)> fiber;                // chart coordinates
  std::function<VecD(SpanD x, SpanD xi)> from_fiber;     // source-x arrow
};

// Pair groupoid over R^n (arrows (a, b): target a, source b, fiber a - b),
// optionally over the unit torus in every base axis.
GroupoidModel make_pair_groupoid(int n, bool torus);
// One abelian group (R^q, +) seen as a groupoid over a point.
GroupoidModel make_abelian_group(int q);
// Bundle of abelian groups (R, +) over the unit circle; arrows (x, v).
GroupoidModel make_bundle_groupoid();
// Registry: pair-r1, pair-r2, pair-t1, abelian-q1, bundle-t1-q1.
GroupoidModel groupoid_by_key(const std::string& key);

// Deformation-parameter family built on a groupoid: arrows at t > 0,
// algebroid vectors at t = 0, glued through the chart scaling.
struct TangentGroupoidModel {
  GroupoidModel g;

  explicit TangentGroupoidModel(GroupoidModel model);

  int base_dim() const { return g.base_dim; }
  int fiber_dim() const { return g.fiber_dim; }

  // Chart scaling: (x, xi, t) is the arrow from_fiber(x, t xi), t > 0.
  VecD from_dnc(SpanD x, SpanD xi, double t) const;
  std::pair<VecD, VecD> dnc_coords(SpanD arrow, double t) const;

  // Product in the source-fiber chart at x: the pair (xi, eta) names the
  // composable arrows delta = from_fiber(x, t eta) and gamma starting at
  // the target of delta; returns the chart coordinates of gamma * delta.
  // At t = 0 this is fiberwise addition.
  VecD multiply(SpanD x, SpanD xi, SpanD eta, double t) const;
  // Same product routed through the induced chart morphism of the
  // multiplication map; agrees with multiply to roundoff at every t.
  VecD multiply_via_functor(SpanD x, SpanD xi, SpanD eta, double t) const;
  PairMorphism multiplication_morphism() const;

  std::pair<VecD, VecD> invert_chart(SpanD x, SpanD xi, double t) const;

  // Rescaled fiber measure density t^{-q}; defined for t > 0 only.
  double haar_weight(double t) const;
};

}  // namespace deform
