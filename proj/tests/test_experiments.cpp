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

#include "semcert/experiments.hpp"
#include "test_support.hpp"

namespace {

using namespace semcert;
using semcert::testing::TempDir;
using semcert::testing::read_file;

TEST(ParallelFor, ResultsIndependentOfThreadCount) {
  exp::StaticConfig one, many;
  one.threads = 1;
  many.threads = 3;
  const auto a = exp::run_static(sim::Condition::ModerateDrift, 12, one, 5);
  const auto b = exp::run_static(sim::Condition::ModerateDrift, 12, many, 5);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].seed, b.records[i].seed);
    EXPECT_EQ(a.records[i].core_size, b.records[i].core_size);
    EXPECT_EQ(a.records[i].unguarded_rate, b.records[i].unguarded_rate);
    EXPECT_EQ(a.records[i].guarded_rate, b.records[i].guarded_rate);
  }
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(exp::parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw Error(ErrorKind::domain, "x");
               }),
               Error);
}

TEST(Static, SummaryAveragesGuardedOverNonEmptyCores) {
  std::vector<exp::StaticRunRecord> rs(3);
  rs[0].unguarded_rate = 0.3;
  rs[0].guarded_rate = 0.02;
  rs[0].core_size = 2;
  rs[1].unguarded_rate = 0.5;
  rs[1].no_vocabulary = true;
  rs[2].unguarded_rate = 0.4;
  rs[2].guarded_rate = 0.04;
  rs[2].core_size = 1;
  const auto s = exp::summarize(sim::Condition::HighDivergence, rs);
  EXPECT_DOUBLE_EQ(s.mean_unguarded, 0.4);
  EXPECT_DOUBLE_EQ(s.mean_guarded, 0.03);
  EXPECT_DOUBLE_EQ(s.mean_core, 1.0);
  EXPECT_EQ(s.empty_cores, 1u);
  EXPECT_THROW(exp::run_static(sim::Condition::NoiseOnly, 0, {}, 1), Error);
}

// Independent pass probability: largest passing c via a direct scan, then
// Boost's binomial CDF.
double oracle_pass(std::uint64_t k, double p, double tau, double delta) {
  std::int64_t cmax = -1;
  for (std::uint64_t c = 0; c <= k; ++c)
    if (wilson_upper(c, k, delta) <= tau) cmax = static_cast<std::int64_t>(c);
  if (cmax < 0) return 0.0;
  const boost::math::binomial_distribution<double> bd(static_cast<double>(k), p);
  return boost::math::cdf(bd, static_cast<double>(cmax));
}

TEST(Tradeoff, ExactValuesMatchOracle) {
  const std::vector<double> pis{0.3, 0.9};
  const std::vector<double> taus{0.02, 0.03, 0.05, 0.1, 0.2};
  const exp::TwoPopulationModel m;
  const auto pts = exp::run_tradeoff(pis, taus, m, 120, 0.05, 0);
  ASSERT_EQ(pts.size(), pis.size() * taus.size());
  for (const auto& pt : pts) {
    const double lo = oracle_pass(120, m.p_lo, pt.tau, 0.05);
    const double hi = oracle_pass(120, m.p_hi, pt.tau, 0.05);
    const double cov = pt.pi * lo + (1 - pt.pi) * hi;
    EXPECT_NEAR(pt.coverage, cov, 1e-10);
    if (cov > 0)
      EXPECT_NEAR(pt.guarded_disagreement, (pt.pi * lo * m.p_lo + (1 - pt.pi) * hi * m.p_hi) / cov, 1e-10);
    else
      EXPECT_EQ(pt.guarded_disagreement, 0.0);
    EXPECT_NEAR(pt.unguarded_baseline, pt.pi * m.p_lo + (1 - pt.pi) * m.p_hi, 1e-15);
  }
}

TEST(TradeoffProperty, MonotoneAndBelowBaselineAcrossModels) {
  Rng rng(12);
  std::vector<double> taus;
  for (int i = 1; i <= 40; ++i) taus.push_back(i * 0.01);
  for (int trial = 0; trial < 25; ++trial) {
    exp::TwoPopulationModel m{0.2 * rng.uniform(), 0.2 + 0.6 * rng.uniform()};
    const double pi = rng.uniform();
    const auto k = 10 + rng.below(400);
    const auto pts = exp::run_tradeoff({pi}, taus, m, k, 0.05, 0);
    for (std::size_t j = 1; j < pts.size(); ++j) {
      EXPECT_GE(pts[j].coverage, pts[j - 1].coverage - 1e-12);
      if (pts[j - 1].coverage > 0)
        EXPECT_GE(pts[j].guarded_disagreement, pts[j - 1].guarded_disagreement - 1e-12);
    }
    for (const auto& p : pts) EXPECT_LE(p.guarded_disagreement, p.unguarded_baseline + 1e-12);
  }
}

TEST(Tradeoff, MonteCarloAgreesWithExact) {
  std::vector<double> taus;
  for (int i = 1; i <= 20; ++i) taus.push_back(i * 0.01);
  const auto pts = exp::run_tradeoff({0.5}, taus, {}, 120, 0.05, 200'000, 3);
  for (const auto& p : pts) {
    EXPECT_NEAR(p.coverage_mc, p.coverage, 0.005) << p.tau;
    EXPECT_NEAR(p.guarded_disagreement_mc, p.guarded_disagreement, 0.005) << p.tau;
  }
}

TEST(Tradeoff, RejectsBadInput) {
  EXPECT_THROW(exp::run_tradeoff({}, {0.1}, {}, 120, 0.05, 0), Error);
  EXPECT_THROW(exp::run_tradeoff({1.5}, {0.1}, {}, 120, 0.05, 0), Error);
  EXPECT_THROW(exp::run_tradeoff({0.5}, {0.1}, {-0.1, 0.3}, 120, 0.05, 0), Error);
  EXPECT_THROW(exp::run_tradeoff({0.5}, {0.1}, {}, 0, 0.05, 0), Error);
}

exp::TimeseriesConfig small_ts() {
  exp::TimeseriesConfig c;
  c.runs = 3;
  c.epochs = 8;
  c.drift_epoch = 3;
  c.threads = 1;
  return c;
}

TEST(Timeseries, ShapeAndDeterminism) {
  const auto cfg = small_ts();
  const auto a = exp::run_timeseries(exp::Scenario::recert, cfg, 4);
  const auto b = exp::run_timeseries(exp::Scenario::recert, cfg, 4);
  ASSERT_EQ(a.size(), cfg.epochs);
  for (std::size_t e = 0; e < a.size(); ++e) {
    EXPECT_EQ(a[e].epoch, e);
    EXPECT_EQ(a[e].drift, e >= cfg.drift_epoch);
    EXPECT_EQ(a[e].guarded_rate, b[e].guarded_rate);
    EXPECT_EQ(a[e].core_size, b[e].core_size);
  }
  const auto base = exp::run_timeseries(exp::Scenario::baseline, cfg, 4);
  for (const auto& r : base) EXPECT_FALSE(r.drift);
  // identical until drift starts
  const auto frozen = exp::run_timeseries(exp::Scenario::frozen, cfg, 4);
  for (std::size_t e = 0; e < cfg.drift_epoch; ++e)
    EXPECT_EQ(frozen[e].unguarded_rate, base[e].unguarded_rate);
}

TEST(Timeseries, FrozenCoreNeverChanges) {
  const auto r = exp::run_timeseries(exp::Scenario::frozen, small_ts(), 9);
  for (const auto& x : r) EXPECT_EQ(x.core_size, r.front().core_size);
}

TEST(Timeseries, ConfigErrors) {
  auto cfg = small_ts();
  cfg.drift_epoch = cfg.epochs;
  EXPECT_THROW(exp::run_timeseries(exp::Scenario::frozen, cfg, 1), Error);
  cfg = small_ts();
  cfg.runs = 0;
  EXPECT_THROW(exp::run_timeseries(exp::Scenario::frozen, cfg, 1), Error);
  EXPECT_EQ(exp::parse_scenario("renegotiate"), exp::Scenario::renegotiate);
  EXPECT_FALSE(exp::parse_scenario("nope").has_value());
}

TEST(Calibrate, PicksInBandShift) {
  exp::StaticConfig cfg;
  cfg.threads = 1;
  const auto res = exp::calibrate_moderate_drift({10, 30, 90}, 30, cfg, 5);
  ASSERT_EQ(res.points.size(), 3u);
  EXPECT_LT(res.points[0].mean_unguarded, res.points[1].mean_unguarded);
  EXPECT_EQ(res.chosen, 30.0);
  EXPECT_TRUE(res.in_band);
}

TEST(Output, CsvWriters) {
  TempDir dir;
  exp::StaticConfig cfg;
  cfg.threads = 1;
  const auto res = exp::run_static(sim::Condition::NoiseOnly, 4, cfg, 1);
  exp::write_static_runs_csv(res.records, dir / "runs.csv");
  exp::write_static_summary_csv({res.summary}, dir / "sub" / "summary.csv");
  const auto runs = read_file(dir / "runs.csv");
  EXPECT_EQ(std::count(runs.begin(), runs.end(), '\n'), 5);
  EXPECT_EQ(runs.rfind("condition,seed,core,unguarded,guarded,no_vocabulary\n", 0), 0u);
  EXPECT_NE(read_file(dir / "sub" / "summary.csv").find("noise-only,"), std::string::npos);
  EXPECT_THROW(exp::write_json({}, "/proc/definitely/not/here.json"), std::exception);
}

}  // namespace
