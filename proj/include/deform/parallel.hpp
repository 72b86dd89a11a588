#pragma once

#include <cmath>
#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace deform {

// Reads DEFORM_THREADS and caps the OpenMP thread pool accordingly.
// Call once at process start; a missing or unparsable value is ignored.
void apply_thread_cap_from_env();

int max_threads();

// Neumaier compensated accumulator. Used where a sum must stay accurate
// over many small terms (quadrature tails, Fourier phases) without
// depending on summation order tricks.
struct DoubleDouble {
  double hi = 0.0;
  double lo = 0.0;

  void add(double x) {
    double t = hi + x;
    if (std::abs(hi) >= std::abs(x)) {
      lo += (hi - t) + x;
    } else {
      lo += (x - t) + hi;
    }
    hi = t;
  }

  double value() const { return hi + lo; }
};

// Fixed-shape pairwise reduction. The split points depend only on the
// length, so the result is bit-identical regardless of how the inputs
// were produced (serial loop or parallel fill).
template <typename T>
T pairwise_sum(std::span<const T> v) {
  if (v.size() <= 16) {
    T acc{};
    for (const T& x : v) acc += x;
    return acc;
  }
  std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

template <typename T>
T pairwise_sum(const std::vector<T>& v) {
  return pairwise_sum(std::span<const T>(v));
}

// Evaluates fn(i) for i in [0, n), then reduces with pairwise_sum.
// The buffer is filled in index order (static schedule), so the reduction
// tree sees identical operands at every thread count — results match the
// serial path bit for bit. Nested parallel regions fall back to serial.
template <typename T, typename F>
T map_sum(std::size_t n, F&& fn) {
  if (n == 0) return T{};
  std::vector<T> buf(n);
#ifdef _OPENMP
  if (!omp_in_parallel() && n >= 32) {
    std::exception_ptr err;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      try {
        buf[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    return pairwise_sum(buf);
  }
#endif
  for (std::size_t i = 0; i < n; ++i) buf[i] = fn(i);
  return pairwise_sum(buf);
}

// Parallel fill of an index-addressed buffer; same determinism contract.
template <typename F>
void parallel_fill(std::size_t n, F&& fn) {
  if (n == 0) return;
#ifdef _OPENMP
  if (!omp_in_parallel() && n >= 2) {
    std::exception_ptr err;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

}  // namespace deform
