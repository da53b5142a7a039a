// Copyright 2026 The semcert Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SEMCERT_STATS_HPP
#define SEMCERT_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "semcert/types.hpp"

namespace semcert {

/// Per-term audit counters.
///   n_aud  events where at least one agent was decided
///   k      eligible comparisons (both decided)
///   c      contradictions among the eligible comparisons
struct TermTally {
  std::uint64_t n_aud = 0;
  std::uint64_t k = 0;
  std::uint64_t c = 0;

  bool valid() const { return c <= k && k <= n_aud; }
  bool operator==(const TermTally&) const = default;
};

/// Inverse of the standard normal CDF.
///
/// Acklam's rational approximation (relative error ~1.15e-9) followed by a
/// single Halley step against erfc, which brings the result to within a few
/// ulps over the whole open interval.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(ErrorKind::domain, "normal_quantile: p must lie in (0,1)");

  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  constexpr double p_high = 1.0 - p_low;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= p_high) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement; e = Phi(x) - p, evaluated on the nearer tail.
  const double e = (p <= 0.5) ? 0.5 * std::erfc(-x / std::numbers::sqrt2) - p
                              : (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2);
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

/// One-sided Wilson score upper bound on a binomial proportion at
/// confidence 1 - delta. Returns 1 when k == 0.
inline double wilson_upper(std::uint64_t c, std::uint64_t k, double delta) {
  if (c > k) throw Error(ErrorKind::domain, "wilson_upper: c exceeds k");
  if (k == 0) return 1.0;
  if (c == k) return 1.0;  // numerator and denominator coincide exactly

  const double z = normal_quantile(1.0 - delta);
  const double n = static_cast<double>(k);
  const double p = static_cast<double>(c) / n;
  const double z2 = z * z;
  const double num = p + z2 / (2.0 * n) + z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  const double den = 1.0 + z2 / n;
  return std::clamp(num / den, 0.0, 1.0);
}

inline double coverage(const TermTally& t) {
  return static_cast<double>(t.k) / static_cast<double>(std::max<std::uint64_t>(t.n_aud, 1));
}

/// Binomial(n, p) probability masses for 0..n, computed in log space.
inline std::vector<double> binomial_pmf(std::uint64_t n, double p) {
  std::vector<double> out(n + 1, 0.0);
  if (p <= 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (p >= 1.0) {
    out[n] = 1.0;
    return out;
  }
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  const double ln = std::lgamma(static_cast<double>(n) + 1.0);
  for (std::uint64_t i = 0; i <= n; ++i) {
    const double x = static_cast<double>(i);
    out[i] = std::exp(ln - std::lgamma(x + 1.0) - std::lgamma(static_cast<double>(n) - x + 1.0) +
                      x * lp + (static_cast<double>(n) - x) * lq);
  }
  return out;
}

}  // namespace semcert

#endif  // SEMCERT_STATS_HPP
