#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace deform {

using VecD = std::vector<double>;
using SpanD = std::span<const double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

// ---------------------------------------------------------------------------
// Error taxonomy. Inputs rejected by contract checks throw; conditions that
// are legitimate numerical outcomes (divergent seminorms, unconverged
// quadrature) are reported through result structs instead.
// ---------------------------------------------------------------------------

struct DomainViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StencilError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ComposabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UncoveredRegionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SeriesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Small dense matrix, row major. Dimensions stay tiny (normal bundle ranks),
// so no effort is spent on blocking.
// ---------------------------------------------------------------------------

struct Mat {
  int rows = 0;
  int cols = 0;
  VecD a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  VecD apply(SpanD v) const;
  static Mat identity(int n);
};

Mat matmul(const Mat& a, const Mat& b);

// Solves a x = b by Gaussian elimination with partial pivoting. a and b are
// consumed. Throws DomainViolation on a numerically singular pivot.
VecD solve_linear(Mat a, VecD b);

// infinity-norm condition estimate (exact inverse; fine for rank <= 6).
double cond_inf(const Mat& a);

// ---------------------------------------------------------------------------
// Vector helpers.
// ---------------------------------------------------------------------------

inline VecD to_vec(SpanD v) { return VecD(v.begin(), v.end()); }
inline VecD to_vec(std::initializer_list<double> v) { return VecD(v); }

// Wrap into [0, 1): the circle coordinate of torus bases.
double wrap01(double v);
// Wrap into [-1/2, 1/2): centered fiber coordinate on the circle; the
// half-point maps to -1/2.
double wrap_pm(double v);

double norm2(SpanD v);
double norm_inf(SpanD v);
VecD vec_add(SpanD a, SpanD b);
VecD vec_sub(SpanD a, SpanD b);
VecD vec_scale(SpanD a, double s);
VecD vec_concat(SpanD a, SpanD b);
bool nearly_equal(SpanD a, SpanD b, double tol);

std::string fmt_vec(SpanD v);
std::string fmt_point(SpanD x, SpanD xi, double t);

// ---------------------------------------------------------------------------
// Axis-aligned box over some coordinate block. An empty box has hi < lo on
// some axis; a degenerate box (hi == lo) has measure zero but still contains
// its face points.
// ---------------------------------------------------------------------------

struct Box {
  VecD lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool empty() const;
  bool contains(SpanD m) const;
  double width(int axis) const { return hi[axis] - lo[axis]; }

  static Box hull(const Box& a, const Box& b);
  static Box intersect(const Box& a, const Box& b);
  // Interval sum per axis: [a.lo+b.lo, a.hi+b.hi].
  static Box minkowski_sum(const Box& a, const Box& b);
  Box inflated(double rel, double abs) const;
  Box sub(int begin, int count) const;  // coordinate sub-block
};

}  // namespace deform
