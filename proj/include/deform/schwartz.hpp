#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deform/common.hpp"
#include "deform/dnc_atlas.hpp"

namespace deform {

// C^inf ramp: exactly 0 for u <= 0, exactly 1 for u >= 1.
double smooth01(double u);

// C^inf window: exactly 1 on [in_lo, in_hi], exactly 0 outside
// (out_lo, out_hi). Requires out_lo < in_lo <= in_hi < out_hi.
double plateau(double x, double out_lo, double in_lo, double in_hi, double out_hi);

// Support bound in the deformation space: a finite union of ambient
// boxes with t-intervals. A piece whose t-interval reaches 0 contributes
// a t = 0 trace whose normal extent is exactly zero (stored degenerate),
// so "the boundary trace sits inside the slice" is testable exactly.
struct ConicPiece {
  Box m_box;  // ambient (x, xi_m) box, finite
  double t_lo = 0.0;
  double t_hi = 1.0;
};

struct ConicCompactSet {
  int base_dim = 0;
  std::vector<ConicPiece> pieces;
  std::vector<Box> traces;  // degenerate t=0 boxes, one per piece with t_lo == 0

  static ConicCompactSet from_pieces(int base_dim, std::vector<ConicPiece> pieces);

  bool allows_interior(SpanD m, double t) const;  // t > 0, ambient coords
  bool allows_boundary(SpanD x) const;            // t = 0 stratum
  bool boundary_trace_within(const Box& slice_box) const;
  Box ambient_hull() const;
};

// Quadrature and sampling guidance attached to a field.
struct FieldMeta {
  VecD xi_center;          // per-fiber-axis mass center
  VecD xi_scale;           // per-fiber-axis width, > 0
  double xi_decay_radius = 8.0;
  Box x_window;            // base region the field is meaningful on
  VecD x_period;           // per-base-axis period, 0 or empty = aperiodic
  VecD xi_period;          // per-fiber-axis period, 0 or empty = aperiodic;
                           // set only on fields that evaluate through
                           // wrapping charts (circle source fibers)
  std::string instance;    // groupoid instance key the field belongs to
};

// Wraps periodic base axes into their fundamental domain [0, period).
VecD wrap_base(SpanD x, const VecD& period);

// Claimed decay constants for selected multi-indices; advisory, checked
// lazily by whoever needs those orders.
struct DecayCertificate {
  struct Entry {
    int k = 0, m = 0;
    std::vector<int> l;      // x multi-index
    std::vector<int> alpha;  // xi multi-index
    double constant = 0.0;
  };
  std::vector<Entry> entries;
};

// Rapidly decaying field on blowup coordinates (x, xi, t). eval must be
// pure: it is called concurrently without synchronization.
struct SchwartzDncField {
  int base_dim = 0;
  int normal_dim = 0;
  std::function<double(SpanD x, SpanD xi, double t)> eval;
  FieldMeta meta;
  std::optional<ConicCompactSet> support;
  std::optional<DecayCertificate> certificate;
  std::optional<SlicePair> chart;

  double operator()(SpanD x, SpanD xi, double t) const { return eval(x, xi, t); }
};

// Fiberwise-Schwartz function on a trivial bundle base x R^q; the t = 0
// value of the deformation algebra lives here.
struct BundleSchwartzField {
  int base_dim = 0;
  int fiber_dim = 0;
  std::function<double(SpanD x, SpanD xi)> eval;
  FieldMeta meta;
  std::optional<Box> base_support;  // compact x-support, if declared

  double operator()(SpanD x, SpanD xi) const { return eval(x, xi); }
};

// Sampling layout for seminorm estimation: a base grid over the field's
// x-window, a dense fiber core around xi_center, log-spaced fiber shells
// out to xi_r_max, and a fixed set of t samples.
struct SeminormGrid {
  int x_per_axis = 5;
  int xi_core_per_axis = 7;
  int xi_shells = 6;
  int xi_dirs = 8;  // directions per shell for fiber dim >= 2
  double xi_r_max = 50.0;
  std::vector<double> t_samples{0.0, 0.01, 0.1, 0.5, 1.0};
  double fd_step = 1e-4;
  std::uint64_t seed = 7;
};

// One estimated bound of condition-type (1+|xi|^2)^k |d^l_x d^alpha_xi
// d^m_t f|. `bounded` goes false when the weighted values keep growing
// through the outermost fiber shells — reported, never thrown.
struct SeminormEstimate {
  int k = 0, m = 0;
  std::vector<int> l, alpha;
  double value = 0.0;
  bool bounded = true;
  int samples = 0;
};

struct SeminormReport {
  std::vector<SeminormEstimate> entries;
  double max_value = 0.0;
  bool all_bounded = true;
  int grid_size = 0;
};

// Sampled supremum for one multi-index set. Derivatives are central
// finite differences (per-axis step fd_step, one Richardson level);
// values below the local roundoff estimate are treated as zero so decay
// regions do not read back amplifier noise. Requires k, m >= 0 and
// k + m + |l| + |alpha| <= 6.
SeminormEstimate seminorm_estimate(const SchwartzDncField& f, int k, int m,
                                   const std::vector<int>& l,
                                   const std::vector<int>& alpha,
                                   const SeminormGrid& grid);

// All multi-indices with k <= max_k and |l| + |alpha| + m <= max_order.
SeminormReport seminorm_scan(const SchwartzDncField& f, int max_k, int max_order,
                             const SeminormGrid& grid);

// CSV rows (header + one line per entry): k,m,l,alpha,estimate,grid_size.
// Multi-indices are dot-joined; unbounded entries print estimate inf.
std::string seminorm_csv(const SeminormReport& report);

// Certificate check: every claimed constant must dominate the sampled
// estimate up to 5% slack. Returns human-readable failures, empty = pass.
std::vector<std::string> validate_certificate(const SchwartzDncField& f,
                                              const SeminormGrid& grid);

// Samples points outside the declared support (t > 0 squashed outside K,
// boundary points outside the trace) and reports every nonzero value.
struct SupportViolation {
  VecD x, xi;
  double t = 0.0;
  double value = 0.0;
};
std::vector<SupportViolation> conic_support_check(const SchwartzDncField& f,
                                                  int n_samples, std::uint64_t seed);

// Same for bundle fields with a declared compact base support.
std::vector<SupportViolation> bundle_support_check(const BundleSchwartzField& f,
                                                   int n_samples, std::uint64_t seed);

// Composition with the induced chart transition: the returned field
// evaluates as f(F~(x, xi, t)). Support and sampling metadata are
// transported through a sampled Newton inversion of the ambient map and
// enclosed in inflated bounding boxes. Rejects maps whose Jacobian
// condition number exceeds 1e12 at a sample point.
SchwartzDncField pullback(const PairMorphism& f, const SchwartzDncField& g);

// Finitely many plateau bumps on the ambient manifold plus a t-ramp tail
// that is exactly zero below tail_floor. Normalization by the raw total
// makes the family sum to 1 wherever the total stays above zero.
struct PartitionOfUnity {
  int ambient_dim = 0;
  struct Bump {
    Box box;
    double margin = 0.0;  // plateau inset: exactly 1 on box shrunk by margin
  };
  std::vector<Bump> bumps;
  bool use_tail = true;
  double tail_floor = 0.25;  // raw tail exactly 0 for t <= tail_floor
  double tail_full = 0.5;    // raw tail exactly 1 for t >= tail_full
  double coverage_floor = 1e-6;

  double raw_bump(std::size_t a, SpanD m) const;
  double raw_tail(double t) const;
  double total(SpanD m, double t) const;
};

// f_alpha = f * (chi_alpha o p) with p the squashing projection
// (x, xi, t) -> ((x, t xi), t), plus the tail part f * (lambda o p).
// Throws UncoveredRegionError (with a witness point) if the partition
// total vanishes somewhere on the field's support region.
struct PartitionParts {
  std::vector<SchwartzDncField> parts;
  SchwartzDncField tail;
};
PartitionParts partition_decompose(const SchwartzDncField& f,
                                   const PartitionOfUnity& pu);

}  // namespace deform
