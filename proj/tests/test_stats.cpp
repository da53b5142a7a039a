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

#include <gtest/gtest.h>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "semcert/rng.hpp"
#include "semcert/stats.hpp"

namespace {

using semcert::wilson_upper;
using Big = boost::multiprecision::cpp_bin_float_50;

// Independent evaluation: quantile from Boost.Math at 50 digits, score-bound
// algebra redone in the same precision.
double oracle_wilson(std::uint64_t c, std::uint64_t k, double delta) {
  if (k == 0) return 1.0;
  const boost::math::normal_distribution<Big> nd;
  const Big z = boost::math::quantile(nd, Big(1) - Big(delta));
  const Big n(k);
  const Big p = Big(c) / n;
  const Big z2 = z * z;
  const Big num = p + z2 / (2 * n) + z * sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  return static_cast<double>(num / (1 + z2 / n));
}

TEST(NormalQuantile, MatchesHighPrecision) {
  const boost::math::normal_distribution<Big> nd;
  for (double p : {1e-12, 1e-6, 0.001, 0.01, 0.02425, 0.05, 0.3, 0.5, 0.7, 0.95, 0.97575, 0.99,
                   0.999999}) {
    const double want = static_cast<double>(boost::math::quantile(nd, Big(p)));
    EXPECT_NEAR(semcert::normal_quantile(p), want, 1e-12 * std::max(1.0, std::fabs(want))) << p;
  }
}

TEST(NormalQuantile, RejectsClosedEndpoints) {
  EXPECT_THROW(semcert::normal_quantile(0.0), semcert::Error);
  EXPECT_THROW(semcert::normal_quantile(1.0), semcert::Error);
  EXPECT_THROW(semcert::normal_quantile(-0.5), semcert::Error);
}

TEST(Wilson, SpotValues) {
  EXPECT_NEAR(wilson_upper(0, 100, 0.05), 0.02634, 1e-4);
  EXPECT_NEAR(wilson_upper(2, 100, 0.05), 0.05865, 1e-4);
  EXPECT_NEAR(wilson_upper(0, 100, 0.05), oracle_wilson(0, 100, 0.05), 1e-12);
  EXPECT_NEAR(wilson_upper(2, 100, 0.05), oracle_wilson(2, 100, 0.05), 1e-12);
}

TEST(Wilson, EdgeCases) {
  EXPECT_EQ(wilson_upper(0, 0, 0.05), 1.0);
  EXPECT_EQ(wilson_upper(7, 7, 0.05), 1.0);
  EXPECT_EQ(wilson_upper(1, 1, 0.2), 1.0);
  EXPECT_THROW(wilson_upper(3, 2, 0.05), semcert::Error);
  EXPECT_THROW(wilson_upper(0, 10, 0.0), semcert::Error);
  EXPECT_THROW(wilson_upper(0, 10, 1.0), semcert::Error);
}

TEST(WilsonProperty, AgreesWithOracleOnRandomInputs) {
  semcert::Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto k = 1 + rng.below(2000);
    const auto c = rng.below(k + 1);
    const double delta = 0.001 + 0.3 * rng.uniform();
    if (c == k) continue;
    EXPECT_NEAR(wilson_upper(c, k, delta), oracle_wilson(c, k, delta), 1e-11)
        << c << "/" << k << " delta=" << delta;
  }
}

TEST(WilsonProperty, BoundsAndMonotonicity) {
  for (double delta : {0.01, 0.05, 0.2}) {
    for (std::uint64_t k : {1u, 2u, 5u, 20u, 120u, 400u, 5000u}) {
      double prev = -1.0;
      for (std::uint64_t c = 0; c <= k; ++c) {
        const double u = wilson_upper(c, k, delta);
        const double phat = static_cast<double>(c) / static_cast<double>(k);
        ASSERT_GE(u, phat) << c << "/" << k;
        ASSERT_GE(u, 0.0);
        ASSERT_LE(u, 1.0);
        ASSERT_GE(u, prev) << "not monotone at " << c << "/" << k;
        prev = u;
      }
    }
  }
}

TEST(WilsonProperty, ShrinksWithMoreEvidence) {
  // same observed rate, more trials: tighter bound
  for (std::uint64_t c = 0; c < 30; ++c)
    EXPECT_LT(wilson_upper(2 * c, 200, 0.05), wilson_upper(c, 100, 0.05)) << c;
  // larger delta: lower bound
  EXPECT_LT(wilson_upper(3, 100, 0.2), wilson_upper(3, 100, 0.05));
}

TEST(Coverage, GuardsZeroExposure) {
  EXPECT_EQ(semcert::coverage({0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(semcert::coverage({10, 4, 1}), 0.4);
  EXPECT_TRUE((semcert::TermTally{10, 4, 1}.valid()));
  EXPECT_FALSE((semcert::TermTally{3, 4, 1}.valid()));
}

TEST(BinomialPmf, MatchesBoost) {
  for (double p : {0.0, 0.01, 0.3, 0.5, 1.0}) {
    for (std::uint64_t n : {0u, 1u, 20u, 120u, 400u}) {
      const auto pmf = semcert::binomial_pmf(n, p);
      ASSERT_EQ(pmf.size(), n + 1);
      double total = 0;
      for (std::uint64_t i = 0; i <= n; ++i) {
        total += pmf[i];
        if (p > 0 && p < 1) {
          const boost::math::binomial_distribution<double> bd(static_cast<double>(n), p);
          EXPECT_NEAR(pmf[i], boost::math::pdf(bd, static_cast<double>(i)), 1e-12);
        }
      }
      EXPECT_NEAR(total, 1.0, 1e-10);
    }
  }
}

TEST(Rng, DeterministicAndKeyed) {
  semcert::Rng a(5), b(5), c(6);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
  EXPECT_EQ(semcert::derive_seed(1, {2, 3}), semcert::derive_seed(1, {2, 3}));
  EXPECT_NE(semcert::derive_seed(1, {2, 3}), semcert::derive_seed(1, {3, 2}));
  EXPECT_EQ(semcert::fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(semcert::fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Rng, BelowIsUniformEnough) {
  semcert::Rng r(3);
  std::vector<int> hist(6, 0);
  for (int i = 0; i < 60000; ++i) ++hist[r.below(6)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

}  // namespace
