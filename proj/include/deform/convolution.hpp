#pragma once

#include <optional>

#include "deform/groupoid.hpp"
#include "deform/quadrature.hpp"
#include "deform/schwartz.hpp"

namespace deform {

// Field on the doubled deformation space: two fiber slots over a shared
// base point. At t = 0 the slots are plain fiber vectors; at t > 0 they
// are realised as a composable pair of arrows — source of the left arrow
// equal to the target of the right one. `interior` is only ever queried
// on such pairs. Each slot carries its own decay/support data; the right
// slot is the one the integration operators sweep.
struct TwoVariableField {
  int base_dim = 0;
  int fiber_dim = 0;
  std::function<double(SpanD x, SpanD xi, SpanD eta)> boundary;         // t = 0
  std::function<double(SpanD gamma, SpanD delta, double t)> interior;   // t > 0
  FieldMeta left_meta;
  FieldMeta right_meta;
  std::optional<ConicCompactSet> left_support;
  std::optional<ConicCompactSet> right_support;
};

// Product field (gamma, delta) -> f(gamma) g(delta), slot metadata copied
// from the factors. Dimension and instance mismatches throw.
TwoVariableField separated_field(const TangentGroupoidModel& tg,
                                 const SchwartzDncField& f,
                                 const SchwartzDncField& g);

// Decay hint of a single slot: its declared mass center and width.
GhHint meta_hint(const FieldMeta& meta, int q);

// Precision-weighted center/width of the eta-mass of f(xi - eta) g(eta):
// the sharper factor dominates, an offset xi pulls the window along.
GhHint product_hint(const FieldMeta& left, const FieldMeta& right, SpanD xi,
                    int q);

// Fiber coordinates {m : (x, m) lies in the slice of K at parameter t},
// in arrow coordinates. Empty when x (wrapped by `period`) misses every
// piece active at t.
Box slice_fiber_box(const ConicCompactSet& K, SpanD x, double t,
                    const VecD& period);

// Quadrature over one fiber slot in blowup coordinates eta (the arrow
// coordinate is t * eta). At or below the switch the decay rule runs
// directly in eta; above it a box rule runs in arrow coordinates over
// `arrow_box` and the 1/t^q chart factor is applied once after the sum,
// so an empty box yields an exact zero. Axes with a positive entry in
// `fiber_period` are clamped to one fundamental domain — the fiber is a
// circle there and a wider box would count arrows twice. Without a box
// the decay rule is used at every t.
QuadResult integrate_blowup_fiber(const std::function<double(SpanD eta)>& fn,
                                  int q, const QuadratureSpec& spec, double t,
                                  const std::optional<Box>& arrow_box,
                                  const VecD& fiber_period, const GhHint& hint);

// Fiber integration of the right slot at a frozen left slot:
//   t  = 0 :  value = Integral F(x, xi, eta) d eta,
//   t != 0 :  the slots are the arrows (from_fiber(r(delta), t xi), delta)
//             with delta sweeping the source fiber at x.
// Routing follows integrate_blowup_fiber with the right slot's metadata;
// the returned report carries the convergence flag and error estimate.
QuadResult fiber_integrate(const TangentGroupoidModel& tg,
                           const TwoVariableField& F,
                           const QuadratureSpec& spec, SpanD x, SpanD xi,
                           double t);

// Support transport under composition: each pair of pieces with
// overlapping t-windows contributes the right piece's base box, the
// Minkowski sum of the two fiber boxes and the intersected t-window. A
// deliberate box over-approximation of the multiplication image. Fiber
// axes with a positive period collapse to one fundamental domain whenever
// the sum pokes past it (a wrapped interval can land anywhere).
ConicCompactSet compose_supports(const ConicCompactSet& left,
                                 const ConicCompactSet& right,
                                 const VecD& fiber_period);

// Fiberwise integration against the rescaled fiber measure:
//   (x, xi, t > 0) -> Integral F(gamma0 delta^{-1}, delta, t) t^{-q} dm
// over the source fiber at x, gamma0 the arrow of (x, xi, t); at t = 0
// the boundary branch convolves fiberwise. The returned field is lazy
// and memoised per evaluation point (values are deterministic, so the
// table contents do not depend on which thread fills them first).
SchwartzDncField m_rc(const TangentGroupoidModel& tg, const TwoVariableField& F,
                      const QuadratureSpec& spec);

// Convolution product over one groupoid instance: m_rc of the separated
// field. Factors must declare conic supports (the box rule above the
// t-switch integrates over the right factor's slice) and carry the
// model's instance key.
SchwartzDncField convolve(const TangentGroupoidModel& tg,
                          const SchwartzDncField& f, const SchwartzDncField& g,
                          const QuadratureSpec& spec);

// Boundary restriction: the t = 0 slice as a fiberwise-Schwartz bundle
// field, with the base part of the support hull carried along.
BundleSchwartzField evaluate_e0(const SchwartzDncField& f);

// Smooth function on the arrows of one groupoid instance at a fixed
// deformation parameter.
struct GroupoidFunction {
  GroupoidModel model;
  double t = 1.0;
  std::function<double(SpanD arrow)> eval;
};

// Slice of a deformation field at parameter t, evaluated through the
// blowup chart. At t = 0 the restriction lands on the bundle instead;
// arrow coordinates are then read as (base = source, unscaled fiber),
// which is the same function evaluate_e0 returns.
GroupoidFunction evaluate_et(const TangentGroupoidModel& tg,
                             const SchwartzDncField& f, double t);

// t-slice product of two slice functions at one blowup chart point. The
// integration guidance (decay hint, slice box) is passed in explicitly,
// so callers can pick quadrature grids independent of `convolve`.
double slice_product(const TangentGroupoidModel& tg, const GroupoidFunction& a,
                     const GroupoidFunction& b, SpanD x, SpanD xi,
                     const QuadratureSpec& spec, const GhHint& hint,
                     const std::optional<Box>& arrow_box);

// Fiberwise convolution over a shared base: at each x the fibers compose
// as rapidly decaying functions under addition. Decay-rule quadrature
// with hints from both factors; lazy and memoised like m_rc.
BundleSchwartzField bundle_convolve(const BundleSchwartzField& f,
                                    const BundleSchwartzField& g,
                                    const QuadratureSpec& spec);

// Dense-matrix cross-check on the one-dimensional periodic pair
// instance: e_t kernels sampled on an n-point base lattice compose as
// matrices with weight (1/t) * (period/n), and the result is compared
// against the convolved field on the same lattice. Returns the largest
// relative deviation over entries carrying mass (both magnitudes at
// least 1e-8 of the global peak enter; ties measured against the larger
// entry). n < 64 is rejected — the lattice would alias the kernels.
double kernel_composition_oracle(const TangentGroupoidModel& tg,
                                 const SchwartzDncField& f,
                                 const SchwartzDncField& g, double t, int n,
                                 const QuadratureSpec& spec);

}  // namespace deform
