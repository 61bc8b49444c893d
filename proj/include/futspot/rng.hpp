#pragma once

// Seeded draws with a pinned algorithm: mt19937_64 uniforms mapped through
// an explicit inverse normal CDF. Using our own quantile function (rather
// than std::normal_distribution, whose algorithm is unspecified) keeps
// generated scenario sets bit-reproducible for a given seed.

#include <cstdint>
#include <random>

namespace futspot {

/// Inverse standard normal CDF, p in (0,1). Rational approximation refined
/// with one Halley step; accurate to full double precision for practical
/// purposes.
double inverse_normal_cdf(double p);

/// Standard normal CDF.
double normal_cdf(double x);

class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in (0,1), 53-bit resolution, never exactly 0 or 1.
  double uniform01();

  double normal(double mean, double sigma);

  /// Normal draw resampled until >= floor. Throws after max_retries
  /// failures (only reachable when the floor sits far above the mean).
  double truncated_normal(double mean, double sigma, double floor, int max_retries = 100);

 private:
  std::mt19937_64 engine_;
};

}  // namespace futspot
