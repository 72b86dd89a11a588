// Thread-scaling benchmark for the three parallel kernels (quadrature
// node sums, lattice kernel composition, fiber transform batch). Every
// workload runs once capped to a single thread and once uncapped; the
// fixed-shape reductions must make the results identical bit for bit,
// so the speedup column is the only thing allowed to change.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "deform/convolution.hpp"
#include "deform/fields.hpp"
#include "deform/fourier.hpp"
#include "deform/groupoid.hpp"
#include "deform/parallel.hpp"

using namespace deform;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

void cap_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

FieldConfig flat_gauss(double sigma, double center) {
  FieldConfig c;
  c.xi_center = {center};
  c.xi_sigma = {sigma};
  c.x_window = Box{{-6.0}, {6.0}};
  c.x_margin = 1.5;
  c.instance = "pair-r1";
  return c;
}

FieldConfig torus_gauss(double sigma, double center) {
  FieldConfig c;
  c.xi_center = {center};
  c.xi_sigma = {sigma};
  c.x_window = Box{{0.0}, {1.0}};
  c.x_margin = 0.0;
  c.x_period = {1.0};
  c.cutoff_inner = 5.0;
  c.cutoff_outer = 9.5;
  c.instance = "pair-t1";
  return c;
}

// Convolution evaluations: each point drives an adaptive fiber integral
// whose node sums go through map_sum. Fresh fields per run so the memo
// table cannot leak results between the serial and parallel passes.
std::vector<double> run_quadrature_batch(int points) {
  const TangentGroupoidModel tg(groupoid_by_key("pair-r1"));
  QuadratureSpec spec;
  spec.base_nodes = 160;
  SchwartzDncField conv =
      convolve(tg, field_from_config(flat_gauss(0.75, 0.2)),
               field_from_config(flat_gauss(0.6, -0.1)), spec);
  std::vector<double> out;
  out.reserve(static_cast<size_t>(points) * 2);
  for (int i = 0; i < points; ++i) {
    const VecD x{-1.5 + 3.0 * i / (points - 1.0)};
    const VecD xi{-2.0 + 4.0 * i / (points - 1.0)};
    out.push_back(conv.eval(x, xi, 0.0));
    out.push_back(conv.eval(x, xi, 0.5));
  }
  return out;
}

// The torus composition oracle builds an n x n kernel lattice and
// composes it with the rescaled counting weight via parallel_fill.
std::vector<double> run_kernel_composition(int n) {
  const TangentGroupoidModel tg(groupoid_by_key("pair-t1"));
  QuadratureSpec spec;
  const double dev = kernel_composition_oracle(
      tg, field_from_config(torus_gauss(0.05, 0.0)),
      field_from_config(torus_gauss(0.045, 0.02)), 0.3, n, spec);
  return {dev};
}

// Boundary fiber transforms: lattice evaluation plus the phase-summed
// transform batch.
std::vector<double> run_transform_batch(int n) {
  const TangentGroupoidModel tg(groupoid_by_key("pair-r1"));
  QuadratureSpec spec;
  SchwartzDncField conv =
      convolve(tg, field_from_config(flat_gauss(0.75, 0.2)),
               field_from_config(flat_gauss(0.6, -0.1)), spec);
  FiberLatticeSpec lat;
  lat.n = n;
  lat.radius = 14.0;
  FiberTransform T(evaluate_e0(conv), lat);
  std::vector<double> out;
  out.reserve(static_cast<size_t>(n) * 2);
  const VecD x0{0.0};
  for (int k = 0; k < n; ++k) {
    const std::complex<double> v = T.eval(x0, lat.eta_at(k));
    out.push_back(v.real());
    out.push_back(v.imag());
  }
  return out;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Workload {
  const char* name;
  std::vector<double> (*run)(int);
  int size_full;
  int size_quick;
};

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  const int hw = max_threads();

  const std::vector<Workload> workloads{
      {"quadrature-batch", run_quadrature_batch, 192, 24},
      {"kernel-composition", run_kernel_composition, 192, 64},
      {"transform-batch", run_transform_batch, 4096, 512},
  };

  char thr[24];
  std::snprintf(thr, sizeof thr, "%d threads", hw);
  std::printf("%-20s %10s %12s %12s %9s  %s\n", "workload", "size",
              "1 thread", thr, "speedup", "bitwise");
  bool all_match = true;
  for (const Workload& w : workloads) {
    const int size = quick ? w.size_quick : w.size_full;

    cap_threads(1);
    const double s0 = now_ms();
    const std::vector<double> serial = w.run(size);
    const double serial_ms = now_ms() - s0;

    cap_threads(hw);
    const double p0 = now_ms();
    const std::vector<double> parallel = w.run(size);
    const double parallel_ms = now_ms() - p0;

    const bool match = bitwise_equal(serial, parallel);
    all_match = all_match && match;
    std::printf("%-20s %10d %10.1fms %10.1fms %8.2fx  %s\n", w.name, size,
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                match ? "match" : "MISMATCH");
    std::fflush(stdout);
  }
  if (!all_match) {
    std::fprintf(stderr,
                 "bench: thread count changed a result; the reduction "
                 "shape contract is broken\n");
    return 1;
  }
  return 0;
}
