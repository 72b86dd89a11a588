#pragma once

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "deform/schwartz.hpp"

namespace deform {

// Uniform fiber lattice xi_j = (j - n/2) h on [-radius, radius) with
// h = 2 radius / n, and the dual lattice eta_k = (k - n/2) pi / radius.
// On these two lattices every phase eta_k * xi_j is an exact integer
// multiple of 2 pi / n, so the transform below reduces all phases in
// integer arithmetic and stays symmetric to the last bit.
struct FiberLatticeSpec {
  int n = 256;          // power of two in [8, 16384]
  double radius = 12.0; // fiber samples live in [-radius, radius)

  void validate() const;
  double step() const { return 2.0 * radius / n; }
  double freq_step() const;
  double xi_at(int j) const { return (j - n / 2) * step(); }
  double eta_at(int k) const { return (k - n / 2) * freq_step(); }
};

// Sampled transform g_hat(eta_k) ~= h * sum_j g(xi_j) e^{-i eta_k xi_j}.
struct FiberSpectrum {
  FiberLatticeSpec lattice;
  std::vector<std::complex<double>> values;  // index k = 0 .. n-1

  // Nearest-lattice lookup; eta must sit within 1e-9 of a lattice
  // frequency or the request is rejected as off-grid.
  std::complex<double> at_eta(double eta) const;
};

// Direct quadratic-cost transform of one fiber sample vector. Each output
// accumulates through a compensated sum, and the phase table is indexed by
// (k - n/2)(j - n/2) mod n, exact in integers. Deterministic across thread
// counts. Throws ResolutionError when the relative sample mass within 10%
// of the lattice edge exceeds 1e-10 (the window is too small for the
// field, so the spectrum would alias).
FiberSpectrum fourier_fiber_transform(const std::vector<double>& samples,
                                      const FiberLatticeSpec& spec);

// Fiberwise transform of a bundle field with one fiber axis (the t = 0
// value of the deformation algebra). Spectra are computed lazily per base
// point and memoized under a lock, keyed by the exact bit pattern of x.
class FiberTransform {
 public:
  FiberTransform(BundleSchwartzField field, FiberLatticeSpec spec);

  const FiberLatticeSpec& lattice() const { return spec_; }
  std::shared_ptr<const FiberSpectrum> spectrum_at(SpanD x) const;
  std::complex<double> eval(SpanD x, double eta) const;

 private:
  BundleSchwartzField field_;
  FiberLatticeSpec spec_;
  mutable std::mutex mu_;
  mutable std::map<std::vector<std::uint64_t>,
                   std::shared_ptr<const FiberSpectrum>> cache_;
};

}  // namespace deform
