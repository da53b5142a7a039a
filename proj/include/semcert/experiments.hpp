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

#ifndef SEMCERT_EXPERIMENTS_HPP
#define SEMCERT_EXPERIMENTS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "semcert/certification.hpp"
#include "semcert/guard.hpp"
#include "semcert/lifecycle.hpp"
#include "semcert/simagents.hpp"
#include "semcert/stats.hpp"

namespace semcert::exp {

/// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots so the outcome is independent of scheduling.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Static study -------------------------------------------------------------

struct StaticConfig {
  ProtocolParams params;
  std::size_t audit_events = 400;
  std::size_t heldout_events = 600;
  std::size_t per_term_size = 192;
  sim::ConditionConfig condition;
  unsigned threads = 0;
};

struct CertificateSummary {
  std::string term;
  CertStatus status = CertStatus::rejected_both;
  double u = 1.0;
  double s = 0.0;
};

struct StaticRunRecord {
  sim::Condition condition = sim::Condition::NoiseOnly;
  std::uint64_t seed = 0;
  std::size_t core_size = 0;
  double unguarded_rate = 0.0;
  double guarded_rate = 0.0;
  bool no_vocabulary = false;
  std::vector<CertificateSummary> certificates;
};

struct StaticSummary {
  sim::Condition condition = sim::Condition::NoiseOnly;
  std::size_t runs = 0;
  double mean_unguarded = 0.0;
  double mean_guarded = 0.0;  // over runs with a non-empty core
  double mean_core = 0.0;
  std::size_t empty_cores = 0;
};

struct StaticResult {
  std::vector<StaticRunRecord> records;
  StaticSummary summary;
};

/// One run: generate events and agents, certify on the audit pool, and
/// measure disagreement on the held-out events.
inline StaticRunRecord run_static_once(sim::Condition condition, std::uint64_t seed,
                                       const StaticConfig& cfg) {
  auto sim_events = sim::gen_events(cfg.audit_events + cfg.heldout_events, derive_seed(seed, {1}));
  const auto events = sim::to_events(sim_events);
  const std::span<const Event> audit(events.data(), cfg.audit_events);
  const std::span<const Event> heldout(events.data() + cfg.audit_events, cfg.heldout_events);

  auto [p1, p2] = sim::gen_policies(condition, derive_seed(seed, {2}), cfg.condition);
  sim::SimProvider a1(std::move(p1)), a2(std::move(p2));
  const auto& vocab = sim::color_vocabulary();

  Ledger ledger;
  const auto plan = sample_audit_plan(audit, vocab, cfg.per_term_size, derive_seed(seed, {3}));
  const auto core = certify(a1, a2, plan, cfg.params, ledger, 0);

  const std::set<std::string> all(vocab.begin(), vocab.end());
  const auto unguarded = measure_disagreement(a1, a2, all, heldout, 1);
  const auto guarded = restrict_report(unguarded, guarded_vocabulary(core, vocab));

  StaticRunRecord r;
  r.condition = condition;
  r.seed = seed;
  r.core_size = core.core.size();
  r.unguarded_rate = unguarded.rate;
  r.guarded_rate = guarded.rate;
  r.no_vocabulary = guarded.no_vocabulary;
  for (const auto& t : vocab) {
    const auto& c = core.certificates.at(t);
    r.certificates.push_back({t, c.status, c.u, c.s});
  }
  return r;
}

inline StaticSummary summarize(sim::Condition condition, const std::vector<StaticRunRecord>& rs) {
  StaticSummary s;
  s.condition = condition;
  s.runs = rs.size();
  std::vector<double> ung, gua, core;
  for (const auto& r : rs) {
    ung.push_back(r.unguarded_rate);
    core.push_back(static_cast<double>(r.core_size));
    if (r.no_vocabulary)
      ++s.empty_cores;
    else
      gua.push_back(r.guarded_rate);
  }
  s.mean_unguarded = mean(ung);
  s.mean_guarded = mean(gua);
  s.mean_core = mean(core);
  return s;
}

inline StaticResult run_static(sim::Condition condition, std::size_t n_runs, const StaticConfig& cfg,
                               std::uint64_t base_seed) {
  if (n_runs == 0) throw Error(ErrorKind::config, "run_static: n_runs must be at least 1");
  cfg.params.validate();
  StaticResult out;
  out.records.resize(n_runs);
  parallel_for(n_runs, cfg.threads, [&](std::size_t i) {
    out.records[i] = run_static_once(condition, derive_seed(base_seed, {i}), cfg);
  });
  out.summary = summarize(condition, out.records);
  return out;
}

/// Sweeps the ModerateDrift center shift and reports mean unguarded rates;
/// `chosen` is the shift whose mean lands closest to `target` inside
/// [lo, hi], or the overall closest if none does.
struct CalibrationPoint {
  double shift = 0.0;
  double mean_unguarded = 0.0;
  double mean_core = 0.0;
};

struct CalibrationResult {
  std::vector<CalibrationPoint> points;
  double chosen = 0.0;
  bool in_band = false;
};

inline CalibrationResult calibrate_moderate_drift(const std::vector<double>& shifts,
                                                  std::size_t n_runs, StaticConfig cfg,
                                                  std::uint64_t base_seed, double target = 0.074,
                                                  double lo = 0.065, double hi = 0.085) {
  CalibrationResult out;
  double best = 1e9;
  bool best_in = false;
  for (double shift : shifts) {
    cfg.condition.drift_shift = shift;
    auto res = run_static(sim::Condition::ModerateDrift, n_runs, cfg, base_seed);
    out.points.push_back({shift, res.summary.mean_unguarded, res.summary.mean_core});
    const bool in = res.summary.mean_unguarded >= lo && res.summary.mean_unguarded <= hi;
    const double d = std::fabs(res.summary.mean_unguarded - target);
    if ((in && !best_in) || (in == best_in && d < best)) {
      best = d;
      best_in = in;
      out.chosen = shift;
    }
  }
  out.in_band = best_in;
  return out;
}

// Drift timeseries ----------------------------------------------------------

enum class Scenario { baseline, frozen, recert, renegotiate };

inline std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::baseline: return "baseline";
    case Scenario::frozen: return "frozen";
    case Scenario::recert: return "recert";
    case Scenario::renegotiate: return "renegotiate";
  }
  return "baseline";
}

inline std::optional<Scenario> parse_scenario(std::string_view s) {
  for (auto v : {Scenario::baseline, Scenario::frozen, Scenario::recert, Scenario::renegotiate})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

struct TimeseriesConfig {
  ProtocolParams params;
  std::size_t epochs = 50;
  std::size_t drift_epoch = 10;
  double drift_magnitude = 17.0;  // degrees, applied to agent 2
  std::size_t audit_events = 400;
  std::size_t heldout_events = 600;
  std::size_t per_term_size = 216;
  std::size_t recert_pool = 1000;
  std::size_t recert_per_term = 1000;
  std::size_t runs = 40;
  sim::NoiseParams noise;
  unsigned threads = 0;
};

struct TimeseriesRecord {
  Scenario scenario = Scenario::baseline;
  std::size_t epoch = 0;
  bool drift = false;
  double guarded_rate = 0.0;    // mean over runs with a non-empty core
  double unguarded_rate = 0.0;  // mean over runs
  double core_size = 0.0;       // mean over runs
  std::size_t runs_with_core = 0;
};

namespace detail {

struct EpochSample {
  double guarded = 0.0;
  double unguarded = 0.0;
  std::size_t core = 0;
  bool has_core = false;
};

inline std::vector<EpochSample> timeseries_run(Scenario scenario, const TimeseriesConfig& cfg,
                                               std::uint64_t seed) {
  const auto& vocab = sim::color_vocabulary();
  const std::set<std::string> all(vocab.begin(), vocab.end());
  sim::ConditionConfig cc;
  cc.noise = cfg.noise;
  auto [p1, p2] = sim::gen_policies(sim::Condition::NoiseOnly, derive_seed(seed, {1}), cc);
  sim::SimProvider a1(std::move(p1)), a2(std::move(p2));

  Ledger ledger;
  std::uint64_t round = 0;
  const auto first = sim::to_events(
      sim::gen_events(cfg.audit_events + cfg.heldout_events, derive_seed(seed, {2, 0})));
  const std::span<const Event> audit(first.data(), cfg.audit_events);
  auto plan = sample_audit_plan(audit, vocab, cfg.per_term_size, derive_seed(seed, {3, 0}));
  CertifiedCore core = certify(a1, a2, plan, cfg.params, ledger, round);

  std::string drift_term = vocab.front();
  for (const auto& t : vocab)
    if (core.contains(t)) {
      drift_term = t;
      break;
    }

  std::vector<EpochSample> out(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (scenario != Scenario::baseline && epoch == cfg.drift_epoch)
      a2.set_policy(sim::inject_drift(a2.policy(), drift_term, cfg.drift_magnitude));

    if (epoch > 0 && (scenario == Scenario::recert || scenario == Scenario::renegotiate)) {
      const auto pool =
          sim::to_events(sim::gen_events(cfg.recert_pool, derive_seed(seed, {2, epoch, 1})));
      ++round;
      core = recertify(core, a1, a2, pool, cfg.params, ledger, round,
                       {cfg.recert_per_term, derive_seed(seed, {3, epoch, 1})})
                 .first;
      if (scenario == Scenario::renegotiate) {
        std::vector<std::string> pending;
        for (const auto& [t, when] : core.revoked)
          if (!core.contains(t)) pending.push_back(t);
        for (std::size_t i = 0; i < pending.size(); ++i) {
          const auto rpool = sim::to_events(
              sim::gen_events(cfg.recert_pool, derive_seed(seed, {2, epoch, 2 + i})));
          ++round;
          auto o = renegotiate(pending[i], a1, a2, ledger, rpool, cfg.params, round,
                               {cfg.recert_per_term, derive_seed(seed, {3, epoch, 2 + i})}, core);
          core = apply_renegotiation(std::move(core), o, round);
        }
      }
    }

    std::vector<Event> fresh;
    std::span<const Event> heldout;
    if (epoch == 0) {
      heldout = std::span<const Event>(first.data() + cfg.audit_events, cfg.heldout_events);
    } else {
      fresh = sim::to_events(sim::gen_events(cfg.heldout_events, derive_seed(seed, {2, epoch, 0})));
      heldout = fresh;
    }
    const auto unguarded = measure_disagreement(a1, a2, all, heldout, 1'000'000 + epoch);
    const auto guarded = restrict_report(unguarded, guarded_vocabulary(core, vocab));
    out[epoch] = {guarded.rate, unguarded.rate, core.core.size(), !guarded.no_vocabulary};
  }
  return out;
}

}  // namespace detail

inline std::vector<TimeseriesRecord> run_timeseries(Scenario scenario, const TimeseriesConfig& cfg,
                                                    std::uint64_t seed) {
  cfg.params.validate();
  if (cfg.drift_epoch >= cfg.epochs)
    throw Error(ErrorKind::config, "drift epoch must precede the last epoch");
  if (cfg.runs == 0) throw Error(ErrorKind::config, "timeseries needs at least one run");

  std::vector<std::vector<detail::EpochSample>> runs(cfg.runs);
  parallel_for(cfg.runs, cfg.threads, [&](std::size_t i) {
    runs[i] = detail::timeseries_run(scenario, cfg, derive_seed(seed, {i}));
  });

  std::vector<TimeseriesRecord> out;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    TimeseriesRecord r;
    r.scenario = scenario;
    r.epoch = e;
    r.drift = scenario != Scenario::baseline && e >= cfg.drift_epoch;
    std::vector<double> g, u, c;
    for (const auto& run : runs) {
      u.push_back(run[e].unguarded);
      c.push_back(static_cast<double>(run[e].core));
      if (run[e].has_core) g.push_back(run[e].guarded);
    }
    r.guarded_rate = mean(g);
    r.unguarded_rate = mean(u);
    r.core_size = mean(c);
    r.runs_with_core = g.size();
    out.push_back(r);
  }
  return out;
}

// Coverage/reliability trade-off ---------------------------------------------

/// Fraction pi of terms contradict at p_lo, the rest at p_hi.
struct TwoPopulationModel {
  double p_lo = 0.01;
  double p_hi = 0.30;
};

struct TradeoffPoint {
  double pi = 0.0;
  double tau = 0.0;
  double coverage = 0.0;
  double guarded_disagreement = 0.0;  // E[p | certified]; 0 when nothing certifies
  double unguarded_baseline = 0.0;
  double coverage_mc = 0.0;
  double guarded_disagreement_mc = 0.0;
};

/// Exact binomial computation of certification probability and the
/// conditional contradiction rate of certified terms, with a Monte Carlo
/// cross-check (n_mc trials per pi; 0 disables it). The coverage floor is not
/// modelled: every audited comparison is taken as eligible.
inline std::vector<TradeoffPoint> run_tradeoff(const std::vector<double>& pi_values,
                                               const std::vector<double>& tau_grid,
                                               const TwoPopulationModel& model,
                                               std::uint64_t k_audit, double delta,
                                               std::uint64_t n_mc, std::uint64_t seed = 0) {
  if (pi_values.empty() || tau_grid.empty())
    throw Error(ErrorKind::config, "trade-off grids must be nonempty");
  for (double p : {model.p_lo, model.p_hi})
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::config, "model rates must lie in [0,1]");
  if (k_audit == 0) throw Error(ErrorKind::config, "k_audit must be positive");

  std::vector<double> u(k_audit + 1);
  for (std::uint64_t c = 0; c <= k_audit; ++c) u[c] = wilson_upper(c, k_audit, delta);
  const auto pmf_lo = binomial_pmf(k_audit, model.p_lo);
  const auto pmf_hi = binomial_pmf(k_audit, model.p_hi);
  auto pass_prob = [&](const std::vector<double>& pmf, double tau) {
    double s = 0.0;
    for (std::uint64_t c = 0; c <= k_audit; ++c)
      if (u[c] <= tau) s += pmf[c];
    return s;
  };

  std::vector<TradeoffPoint> out;
  for (std::size_t pi_idx = 0; pi_idx < pi_values.size(); ++pi_idx) {
    const double pi = pi_values[pi_idx];
    if (!(pi >= 0.0 && pi <= 1.0)) throw Error(ErrorKind::config, "pi must lie in [0,1]");

    // Monte Carlo: per trial, draw a term's population and its c once, then
    // evaluate every tau on that draw.
    std::vector<std::uint64_t> mc_cert(tau_grid.size(), 0);
    std::vector<double> mc_psum(tau_grid.size(), 0.0);
    if (n_mc > 0) {
      Rng rng(derive_seed(seed, {pi_idx}));
      for (std::uint64_t t = 0; t < n_mc; ++t) {
        const double p = rng.uniform() < pi ? model.p_lo : model.p_hi;
        std::uint64_t c = 0;
        for (std::uint64_t i = 0; i < k_audit; ++i) c += rng.uniform() < p ? 1 : 0;
        for (std::size_t j = 0; j < tau_grid.size(); ++j)
          if (u[c] <= tau_grid[j]) {
            ++mc_cert[j];
            mc_psum[j] += p;
          }
      }
    }

    for (std::size_t j = 0; j < tau_grid.size(); ++j) {
      const double tau = tau_grid[j];
      const double lo = pass_prob(pmf_lo, tau);
      const double hi = pass_prob(pmf_hi, tau);
      TradeoffPoint pt;
      pt.pi = pi;
      pt.tau = tau;
      pt.coverage = pi * lo + (1 - pi) * hi;
      pt.guarded_disagreement =
          pt.coverage > 0 ? (pi * lo * model.p_lo + (1 - pi) * hi * model.p_hi) / pt.coverage : 0.0;
      pt.unguarded_baseline = pi * model.p_lo + (1 - pi) * model.p_hi;
      if (n_mc > 0) {
        pt.coverage_mc = static_cast<double>(mc_cert[j]) / static_cast<double>(n_mc);
        pt.guarded_disagreement_mc =
            mc_cert[j] > 0 ? mc_psum[j] / static_cast<double>(mc_cert[j]) : 0.0;
      }
      out.push_back(pt);
    }
  }
  return out;
}

// Output ----------------------------------------------------------------------

inline std::string fmt_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  return out;
}

inline void close_out(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw Error(ErrorKind::io, "write failure on " + path.string());
}

}  // namespace detail

/// Columns: condition,seed,core,unguarded,guarded,no_vocabulary
inline void write_static_runs_csv(const std::vector<StaticRunRecord>& rs,
                                  const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "condition,seed,core,unguarded,guarded,no_vocabulary\n";
  for (const auto& r : rs)
    out << sim::to_string(r.condition) << ',' << r.seed << ',' << r.core_size << ','
        << fmt_num(r.unguarded_rate) << ',' << fmt_num(r.guarded_rate) << ','
        << (r.no_vocabulary ? 1 : 0) << '\n';
  detail::close_out(out, path);
}

/// Columns: condition,unguarded,guarded,core,empty_cores,runs
inline void write_static_summary_csv(const std::vector<StaticSummary>& ss,
                                     const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "condition,unguarded,guarded,core,empty_cores,runs\n";
  for (const auto& s : ss)
    out << sim::to_string(s.condition) << ',' << fmt_num(s.mean_unguarded) << ','
        << fmt_num(s.mean_guarded) << ',' << fmt_num(s.mean_core) << ',' << s.empty_cores << ','
        << s.runs << '\n';
  detail::close_out(out, path);
}

/// Columns: scenario,epoch,drift,core,guarded,unguarded,runs_with_core
inline void write_timeseries_csv(const std::vector<TimeseriesRecord>& rs,
                                 const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "scenario,epoch,drift,core,guarded,unguarded,runs_with_core\n";
  for (const auto& r : rs)
    out << to_string(r.scenario) << ',' << r.epoch << ',' << (r.drift ? 1 : 0) << ','
        << fmt_num(r.core_size) << ',' << fmt_num(r.guarded_rate) << ','
        << fmt_num(r.unguarded_rate) << ',' << r.runs_with_core << '\n';
  detail::close_out(out, path);
}

/// Columns: pi,tau,coverage,guarded,unguarded,coverage_mc,guarded_mc
inline void write_tradeoff_csv(const std::vector<TradeoffPoint>& ps,
                               const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "pi,tau,coverage,guarded,unguarded,coverage_mc,guarded_mc\n";
  for (const auto& p : ps)
    out << fmt_num(p.pi) << ',' << fmt_num(p.tau) << ',' << fmt_num(p.coverage) << ','
        << fmt_num(p.guarded_disagreement) << ',' << fmt_num(p.unguarded_baseline) << ','
        << fmt_num(p.coverage_mc) << ',' << fmt_num(p.guarded_disagreement_mc) << '\n';
  detail::close_out(out, path);
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  detail::close_out(out, path);
}

inline nlohmann::json summary_json(const StaticSummary& s) {
  return {{"condition", std::string(sim::to_string(s.condition))},
          {"runs", s.runs},
          {"mean_unguarded", s.mean_unguarded},
          {"mean_guarded", s.mean_guarded},
          {"mean_core", s.mean_core},
          {"empty_cores", s.empty_cores},
          {"guarded_mean_over", "runs with a non-empty core"}};
}

}  // namespace semcert::exp

#endif  // SEMCERT_EXPERIMENTS_HPP
