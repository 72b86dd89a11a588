#pragma once

#include <cstdint>

namespace deform {

// Counter-based generator: each draw is a pure function of (seed, counter).
// There is no hidden stream state, so sampling sites stay reproducible no
// matter how evaluation is ordered or parallelized, and the same seed gives
// bit-identical draws on every platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  // Independent substream; use one per sampling site.
  CounterRng derive(std::uint64_t stream) const {
    return CounterRng(mix(seed_ ^ (0x9e3779b97f4a7c15ULL + mix(stream))));
  }

  std::uint64_t bits(std::uint64_t counter) const { return mix(seed_ + mix(counter + 1)); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, double a, double b) const {
    return a + (b - a) * uniform01(counter);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace deform
