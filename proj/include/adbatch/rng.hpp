#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace adbatch {

// 64-bit finalizer from SplitMix64 (Steele, Lea & Flood).
constexpr std::uint64_t split_mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

// Stream purposes. Kept as named constants so a draw is addressable by
// (seed, run, round, purpose) regardless of thread schedule.
namespace stream {
inline constexpr std::uint64_t kInitDesign = 1;
inline constexpr std::uint64_t kSimulate = 2;
inline constexpr std::uint64_t kCandidates = 3;
inline constexpr std::uint64_t kFitStarts = 4;
inline constexpr std::uint64_t kTestSet = 5;
inline constexpr std::uint64_t kPaths = 6;
inline constexpr std::uint64_t kMisc = 7;
}  // namespace stream

// Counter-based stream: output i is a pure function of (key, i).  Keys are
// derived by folding tag words into the master seed, so independent streams
// can be replayed without sharing any mutable state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(split_mix64(key)) {}

  static RngStream from(std::uint64_t seed,
                        std::initializer_list<std::uint64_t> words) {
    std::uint64_t k = split_mix64(seed + kGamma);
    for (std::uint64_t w : words) {
      k = split_mix64(k ^ split_mix64(w + kGamma));
    }
    return RngStream(k);
  }

  std::uint64_t next_u64() { return split_mix64(key_ + (counter_++) * kGamma); }

  // Strictly inside (0,1); 53-bit resolution.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Box-Muller; consumes two words per call.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Marsaglia-Tsang squeeze for shape >= 1, boosted below 1.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Standard Student-t with nu degrees of freedom.
  double student_t(double nu) {
    const double z = normal();
    const double chi2 = 2.0 * gamma(0.5 * nu);
    return z / std::sqrt(chi2 / nu);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace adbatch
