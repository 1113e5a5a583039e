#pragma once

#include <cstdint>
#include <random>

namespace emhe {

// std::uniform_real_distribution is implementation-defined; this one is not.
// mt19937_64 output is fixed by the standard, and the mapping below uses the
// top 53 bits, so sequences are identical on every conforming platform.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Uniform in [−a, a).
  double symmetric(double amplitude) { return amplitude * (2.0 * unit() - 1.0); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace emhe
