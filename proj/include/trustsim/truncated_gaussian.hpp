#pragma once

#include <algorithm>
#include <cmath>

#include "trustsim/error.hpp"
#include "trustsim/random.hpp"
#include "trustsim/stats.hpp"

namespace trustsim {

inline constexpr int kTruncatedGaussianMaxRejections = 1000;

/// Draw from N(mean, sd^2) restricted to [lo, hi].
///
/// Rejection sampling first; after kTruncatedGaussianMaxRejections misses the
/// draw switches to inverting the truncated CDF, working in the upper tail via
/// the survival function when the window lies right of the mean so that far
/// truncation stays accurate. sd == 0 returns clamp(mean, lo, hi).
inline double sample_truncated_gaussian(double mean, double sd, double lo, double hi, RandomStream& rng) {
  if (!(lo < hi) || !(sd >= 0.0) || !std::isfinite(mean) || !std::isfinite(sd) || !std::isfinite(lo) ||
      !std::isfinite(hi)) {
    throw Error(ErrorKind::InvalidBounds, "truncated gaussian requires finite lo < hi and sd >= 0");
  }
  if (sd == 0.0) return std::clamp(mean, lo, hi);

  for (int i = 0; i < kTruncatedGaussianMaxRejections; ++i) {
    const double x = mean + sd * rng.normal();
    if (x >= lo && x <= hi) return x;
  }

  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  const double u = rng.uniform();
  double z;
  if (a > 0.0) {
    const double sa = normal_sf(a);
    const double sb = normal_sf(b);
    if (!(sa > sb)) return lo;
    z = -normal_quantile(sb + u * (sa - sb));
  } else if (b < 0.0) {
    const double ca = normal_cdf(a);
    const double cb = normal_cdf(b);
    if (!(cb > ca)) return hi;
    z = normal_quantile(ca + u * (cb - ca));
  } else {
    const double ca = normal_cdf(a);
    const double cb = normal_cdf(b);
    z = normal_quantile(ca + u * (cb - ca));
  }
  return std::clamp(mean + sd * z, lo, hi);
}

}  // namespace trustsim
