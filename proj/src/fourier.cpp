#include "deform/fourier.hpp"

#include <cmath>
#include <cstring>

#include "deform/parallel.hpp"

namespace deform {

void FiberLatticeSpec::validate() const {
  if (n < 8 || n > 16384 || (n & (n - 1)) != 0)
    throw ConfigError("fiber lattice size must be a power of two in [8, 16384]");
  if (!(radius > 0.0) || !(radius <= 1e6) || !std::isfinite(radius))
    throw ConfigError("fiber lattice radius must sit in (0, 1e6]");
}

double FiberLatticeSpec::freq_step() const { return kPi / radius; }

std::complex<double> FiberSpectrum::at_eta(double eta) const {
  double d = lattice.freq_step();
  double kf = eta / d + lattice.n / 2;
  long k = std::lround(kf);
  if (k < 0 || k >= lattice.n || std::abs(eta - lattice.eta_at(static_cast<int>(k))) > 1e-9)
    throw ResolutionError("requested frequency is off the spectrum lattice");
  return values[static_cast<std::size_t>(k)];
}

FiberSpectrum fourier_fiber_transform(const std::vector<double>& samples,
                                      const FiberLatticeSpec& spec) {
  spec.validate();
  const int n = spec.n;
  if (static_cast<int>(samples.size()) != n)
    throw ConfigError("fiber sample count does not match the lattice");

  // Aliasing guard: mass within 10% of the window edge must be negligible
  // relative to the whole sample, otherwise the window truncates the field.
  double total = 0.0, edge = 0.0;
  for (int j = 0; j < n; ++j) {
    double a = std::abs(samples[j]);
    total += a;
    if (std::abs(spec.xi_at(j)) >= 0.9 * spec.radius) edge += a;
  }
  if (total > 0.0 && edge > 1e-10 * total)
    throw ResolutionError(
        "fiber window too small: sample mass near the lattice edge would alias");

  // Phase table: e^{-2 pi i r / n} for r = 0 .. n-1, built on [0, n/2] and
  // mirrored so that conjugate phase pairs cancel exactly. Cardinal entries
  // are pinned to keep the quadrant symmetry bit-exact.
  std::vector<double> ctab(n), stab(n);
  for (int r = 0; r <= n / 2; ++r) {
    double ang = -kTwoPi * r / n;
    ctab[r] = std::cos(ang);
    stab[r] = std::sin(ang);
  }
  ctab[0] = 1.0;
  stab[0] = 0.0;
  ctab[n / 2] = -1.0;
  stab[n / 2] = 0.0;
  if (n % 4 == 0) {
    ctab[n / 4] = 0.0;
    stab[n / 4] = -1.0;
  }
  for (int r = n / 2 + 1; r < n; ++r) {
    ctab[r] = ctab[n - r];
    stab[r] = -stab[n - r];
  }

  FiberSpectrum out;
  out.lattice = spec;
  out.values.resize(n);
  const double h = spec.step();
  std::vector<std::complex<double>> vals(n);
  parallel_fill(static_cast<std::size_t>(n), [&](std::size_t kk) {
    const long k = static_cast<long>(kk) - n / 2;
    DoubleDouble re, im;
    for (int j = 0; j < n; ++j) {
      if (samples[j] == 0.0) continue;
      long m = k * (j - n / 2);
      int r = static_cast<int>(((m % n) + n) % n);
      re.add(samples[j] * ctab[r]);
      im.add(samples[j] * stab[r]);
    }
    vals[kk] = {h * re.value(), h * im.value()};
  });
  out.values = std::move(vals);
  return out;
}

FiberTransform::FiberTransform(BundleSchwartzField field, FiberLatticeSpec spec)
    : field_(std::move(field)), spec_(spec) {
  spec_.validate();
  if (field_.fiber_dim != 1)
    throw ConfigError("fiber transform supports exactly one fiber axis");
}

std::shared_ptr<const FiberSpectrum> FiberTransform::spectrum_at(SpanD x) const {
  if (static_cast<int>(x.size()) != field_.base_dim)
    throw DomainViolation("fiber transform base point dimension mismatch");
  std::vector<std::uint64_t> key(x.size());
  static_assert(sizeof(double) == sizeof(std::uint64_t));
  for (std::size_t i = 0; i < x.size(); ++i)
    std::memcpy(&key[i], &x[i], sizeof(double));

  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }

  std::vector<double> samples(spec_.n);
  VecD xi(1);
  for (int j = 0; j < spec_.n; ++j) {
    xi[0] = spec_.xi_at(j);
    samples[j] = field_.eval(x, xi);
  }
  auto spectrum =
      std::make_shared<const FiberSpectrum>(fourier_fiber_transform(samples, spec_));

  std::lock_guard<std::mutex> lk(mu_);
  auto [it, inserted] = cache_.emplace(std::move(key), std::move(spectrum));
  (void)inserted;  // a concurrent builder may have won; both results agree
  return it->second;
}

std::complex<double> FiberTransform::eval(SpanD x, double eta) const {
  return spectrum_at(x)->at_eta(eta);
}

}  // namespace deform
