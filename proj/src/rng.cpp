#include "futspot/rng.hpp"

#include <cmath>

#include "futspot/errors.hpp"

namespace futspot {

namespace {

// Acklam's rational approximation to the normal quantile.
double inverse_normal_cdf_approx(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ValidationError("inverse_normal_cdf: p must be in (0,1)");
  }
  double x = inverse_normal_cdf_approx(p);
  // One Halley refinement against the exact CDF.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

double NormalSampler::uniform01() {
  const std::uint64_t bits = engine_() >> 11;  // top 53 bits
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double NormalSampler::normal(double mean, double sigma) {
  return mean + sigma * inverse_normal_cdf(uniform01());
}

double NormalSampler::truncated_normal(double mean, double sigma, double floor, int max_retries) {
  if (sigma == 0.0) {
    if (mean < floor) {
      throw ValidationError("truncated_normal: degenerate draw below floor");
    }
    return mean;
  }
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const double x = normal(mean, sigma);
    if (x >= floor) return x;
  }
  throw ValidationError("truncated_normal: exceeded resampling retries (floor far above mean)");
}

}  // namespace futspot
