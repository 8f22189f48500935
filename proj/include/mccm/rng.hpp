#pragma once

#include <cstdint>
#include <string_view>

namespace mccm {

/// SplitMix64 generator. Every stochastic step in the library draws from this
/// so that outputs are reproducible across platforms and languages.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1) built from the top 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// floor(uniform() * n); n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

  /// Standard normal via Box-Muller, one variate per call (two uniforms consumed).
  double normal();

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace mccm
