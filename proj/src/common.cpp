#include "deform/common.hpp"

#include <algorithm>
#include <cstdio>

namespace deform {

VecD Mat::apply(SpanD v) const {
  if (static_cast<int>(v.size()) != cols)
    throw DomainViolation("matrix apply: expected " + std::to_string(cols) +
                          " components, got " + std::to_string(v.size()));
  VecD out(static_cast<size_t>(rows), 0.0);
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < cols; ++j) s += at(i, j) * v[static_cast<size_t>(j)];
    out[static_cast<size_t>(i)] = s;
  }
  return out;
}

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw DomainViolation("matmul: inner dimensions differ");
  Mat c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      for (int j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
    }
  return c;
}

VecD solve_linear(Mat a, VecD b) {
  const int n = a.rows;
  if (a.cols != n || static_cast<int>(b.size()) != n)
    throw DomainViolation("solve_linear: shape mismatch");
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a.at(r, col)) > std::abs(a.at(piv, col))) piv = r;
    if (std::abs(a.at(piv, col)) < 1e-300)
      throw DomainViolation("solve_linear: singular pivot at column " + std::to_string(col));
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(a.at(piv, j), a.at(col, j));
      std::swap(b[static_cast<size_t>(piv)], b[static_cast<size_t>(col)]);
    }
    const double d = a.at(col, col);
    for (int r = col + 1; r < n; ++r) {
      const double f = a.at(r, col) / d;
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) a.at(r, j) -= f * a.at(col, j);
      b[static_cast<size_t>(r)] -= f * b[static_cast<size_t>(col)];
    }
  }
  VecD x(static_cast<size_t>(n), 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[static_cast<size_t>(r)];
    for (int j = r + 1; j < n; ++j) s -= a.at(r, j) * x[static_cast<size_t>(j)];
    x[static_cast<size_t>(r)] = s / a.at(r, r);
  }
  return x;
}

namespace {

double norm_inf_mat(const Mat& a) {
  double best = 0.0;
  for (int i = 0; i < a.rows; ++i) {
    double row = 0.0;
    for (int j = 0; j < a.cols; ++j) row += std::abs(a.at(i, j));
    best = std::max(best, row);
  }
  return best;
}

}  // namespace

double cond_inf(const Mat& a) {
  if (a.rows != a.cols) throw DomainViolation("cond_inf: square matrix required");
  const int n = a.rows;
  Mat inv(n, n);
  for (int col = 0; col < n; ++col) {
    VecD e(static_cast<size_t>(n), 0.0);
    e[static_cast<size_t>(col)] = 1.0;
    VecD x;
    try {
      x = solve_linear(a, std::move(e));
    } catch (const DomainViolation&) {
      return std::numeric_limits<double>::infinity();
    }
    for (int r = 0; r < n; ++r) inv.at(r, col) = x[static_cast<size_t>(r)];
  }
  return norm_inf_mat(a) * norm_inf_mat(inv);
}

double wrap01(double v) {
  double out = v - std::floor(v);
  if (out >= 1.0) out = 0.0;  // floor rounding at negative tiny v
  return out;
}

double wrap_pm(double v) { return wrap01(v + 0.5) - 0.5; }

double norm2(SpanD v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double norm_inf(SpanD v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

VecD vec_add(SpanD a, SpanD b) {
  VecD out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

VecD vec_sub(SpanD a, SpanD b) {
  VecD out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

VecD vec_scale(SpanD a, double s) {
  VecD out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

VecD vec_concat(SpanD a, SpanD b) {
  VecD out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

bool nearly_equal(SpanD a, SpanD b, double tol) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

std::string fmt_vec(SpanD v) {
  std::string out = "(";
  char buf[32];
  for (size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", v[i]);
    if (i) out += ", ";
    out += buf;
  }
  out += ")";
  return out;
}

std::string fmt_point(SpanD x, SpanD xi, double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", t);
  return "x=" + fmt_vec(x) + " xi=" + fmt_vec(xi) + " t=" + buf;
}

bool Box::empty() const {
  for (size_t i = 0; i < lo.size(); ++i)
    if (hi[i] < lo[i]) return true;
  return false;
}

bool Box::contains(SpanD m) const {
  if (m.size() != lo.size()) return false;
  for (size_t i = 0; i < lo.size(); ++i)
    if (m[i] < lo[i] || m[i] > hi[i]) return false;
  return true;
}

Box Box::hull(const Box& a, const Box& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  Box out = a;
  for (size_t i = 0; i < out.lo.size(); ++i) {
    out.lo[i] = std::min(out.lo[i], b.lo[i]);
    out.hi[i] = std::max(out.hi[i], b.hi[i]);
  }
  return out;
}

Box Box::intersect(const Box& a, const Box& b) {
  Box out = a;
  for (size_t i = 0; i < out.lo.size(); ++i) {
    out.lo[i] = std::max(out.lo[i], b.lo[i]);
    out.hi[i] = std::min(out.hi[i], b.hi[i]);
  }
  return out;
}

Box Box::minkowski_sum(const Box& a, const Box& b) {
  Box out = a;
  for (size_t i = 0; i < out.lo.size(); ++i) {
    out.lo[i] += b.lo[i];
    out.hi[i] += b.hi[i];
  }
  return out;
}

Box Box::inflated(double rel, double abs) const {
  Box out = *this;
  for (size_t i = 0; i < lo.size(); ++i) {
    const double pad = rel * (hi[i] - lo[i]) + abs;
    out.lo[i] -= pad;
    out.hi[i] += pad;
  }
  return out;
}

Box Box::sub(int begin, int count) const {
  Box out;
  out.lo.assign(lo.begin() + begin, lo.begin() + begin + count);
  out.hi.assign(hi.begin() + begin, hi.begin() + begin + count);
  return out;
}

}  // namespace deform
