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

#ifndef SEMCERT_CERTIFICATION_HPP
#define SEMCERT_CERTIFICATION_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semcert/ledger.hpp"
#include "semcert/rng.hpp"
#include "semcert/stats.hpp"
#include "semcert/types.hpp"

namespace semcert {

/// Anything that can answer "does term T apply to event e?".
///
/// `epoch` identifies the audit round or evaluation pass the query belongs
/// to; simulated agents key their noise on it, external agents ignore it.
class VerdictProvider {
 public:
  virtual ~VerdictProvider() = default;

  virtual const std::string& id() const = 0;
  virtual Verdict verdict(std::string_view term, const Event& event, std::uint64_t epoch) = 0;

  /// Interpretation of `term` in a transferable form, if the provider can
  /// share it. Used by renegotiation.
  virtual std::optional<nlohmann::json> export_policy(std::string_view /*term*/) const {
    return std::nullopt;
  }
  /// Replaces the provider's interpretation of `term`. Returns false to refuse.
  virtual bool adopt_policy(std::string_view /*term*/, const nlohmann::json& /*rule*/) {
    return false;
  }
};

struct TermPlan {
  std::string term;
  std::vector<Event> events;  // W_T, in audit order
};

struct AuditPlan {
  std::vector<TermPlan> terms;  // vocabulary order
  std::uint64_t seed = 0;
  std::size_t per_term_size = 0;
};

/// Independent uniform sample without replacement for every term. A term's
/// sample depends only on (pool, term name, size, seed), not on its position
/// in the vocabulary.
inline AuditPlan sample_audit_plan(std::span<const Event> pool,
                                   std::span<const std::string> vocabulary,
                                   std::size_t per_term_size, std::uint64_t seed) {
  if (per_term_size > pool.size())
    throw Error(ErrorKind::config, "per-term audit size " + std::to_string(per_term_size) +
                                       " exceeds pool of " + std::to_string(pool.size()));
  AuditPlan plan;
  plan.seed = seed;
  plan.per_term_size = per_term_size;
  std::vector<std::size_t> idx(pool.size());
  for (const auto& term : vocabulary) {
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(derive_seed(seed, {fnv1a64(term)}));
    // partial Fisher-Yates: the first per_term_size slots are the sample
    for (std::size_t i = 0; i < per_term_size; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    TermPlan tp{term, {}};
    tp.events.reserve(per_term_size);
    for (std::size_t i = 0; i < per_term_size; ++i) tp.events.push_back(pool[idx[i]]);
    plan.terms.push_back(std::move(tp));
  }
  return plan;
}

/// Queries both providers on every event, records both verdicts, and tallies.
/// A provider failure propagates; entries already written stay in the ledger.
inline TermTally audit_term(VerdictProvider& a1, VerdictProvider& a2, const std::string& term,
                            std::span<const Event> events, Ledger& ledger, std::uint64_t epoch) {
  TermTally t;
  for (const auto& e : events) {
    const Verdict v1 = a1.verdict(term, e, epoch);
    const Verdict v2 = a2.verdict(term, e, epoch);
    ledger.append({a1.id(), e.id, term, v1, epoch});
    ledger.append({a2.id(), e.id, term, v2, epoch});
    if (decided(v1) || decided(v2)) ++t.n_aud;
    if (decided(v1) && decided(v2)) {
      ++t.k;
      if (v1 != v2) ++t.c;
    }
  }
  return t;
}

enum class CertStatus { certified, rejected_bound, rejected_coverage, rejected_both };

inline std::string_view to_string(CertStatus s) {
  switch (s) {
    case CertStatus::certified: return "certified";
    case CertStatus::rejected_bound: return "rejected_bound";
    case CertStatus::rejected_coverage: return "rejected_coverage";
    case CertStatus::rejected_both: return "rejected_both";
  }
  return "rejected_both";
}

inline std::optional<CertStatus> parse_cert_status(std::string_view s) {
  for (auto v : {CertStatus::certified, CertStatus::rejected_bound, CertStatus::rejected_coverage,
                 CertStatus::rejected_both})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

struct TermCertificate {
  std::string term;
  TermTally tally;
  double u = 1.0;
  double s = 0.0;
  ProtocolParams params;
  std::uint64_t epoch = 0;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> ledger_span;  // inclusive seqs
  CertStatus status = CertStatus::rejected_both;

  bool certified() const { return status == CertStatus::certified; }
  bool operator==(const TermCertificate&) const = default;
};

inline CertStatus classify(double u, double s, const ProtocolParams& p) {
  const bool bound_ok = u <= p.tau;
  const bool coverage_ok = s >= p.rho_min;
  if (bound_ok && coverage_ok) return CertStatus::certified;
  if (!bound_ok && !coverage_ok) return CertStatus::rejected_both;
  return bound_ok ? CertStatus::rejected_coverage : CertStatus::rejected_bound;
}

inline TermCertificate make_certificate(
    std::string term, const TermTally& tally, const ProtocolParams& params, std::uint64_t epoch,
    std::optional<std::pair<std::uint64_t, std::uint64_t>> span) {
  TermCertificate c;
  c.term = std::move(term);
  c.tally = tally;
  c.u = wilson_upper(tally.c, tally.k, params.delta);
  c.s = coverage(tally);
  c.params = params;
  c.epoch = epoch;
  c.ledger_span = span;
  c.status = classify(c.u, c.s, params);
  return c;
}

/// The certified core V* with every certificate that produced it.
struct CertifiedCore {
  std::uint64_t epoch = 0;
  ProtocolParams params;
  std::map<std::string, TermCertificate> certificates;
  std::set<std::string> core;
  std::map<std::string, std::string> errors;      // term -> audit failure
  std::map<std::string, std::uint64_t> revoked;   // term -> epoch of revocation

  void set_certificate(TermCertificate c) {
    if (c.certified())
      core.insert(c.term);
    else
      core.erase(c.term);
    std::string key = c.term;
    certificates.insert_or_assign(std::move(key), std::move(c));
  }

  bool contains(const std::string& term) const { return core.contains(term); }
  bool operator==(const CertifiedCore&) const = default;
};

/// Runs the audit for every planned term and certifies. Provider failures
/// are recorded per term in `errors`; other terms proceed.
inline CertifiedCore certify(VerdictProvider& a1, VerdictProvider& a2, const AuditPlan& plan,
                             const ProtocolParams& params, Ledger& ledger, std::uint64_t epoch) {
  params.validate();
  CertifiedCore out;
  out.epoch = epoch;
  out.params = params;
  for (const auto& tp : plan.terms) {
    const std::uint64_t first = ledger.size();
    try {
      const TermTally tally = audit_term(a1, a2, tp.term, tp.events, ledger, epoch);
      std::optional<std::pair<std::uint64_t, std::uint64_t>> span;
      if (ledger.size() > first) span = std::pair{first, ledger.size() - 1};
      out.set_certificate(make_certificate(tp.term, tally, params, epoch, span));
    } catch (const ProviderError& e) {
      out.errors[tp.term] = e.what();
    }
  }
  return out;
}

/// Definition-level view of one agent's responses to one term.
struct StimulusMeaning {
  std::string term;
  std::string agent;
  std::set<EventId> positive;
  std::set<EventId> negative;
  std::set<EventId> neutral;
};

/// Partitions the agent's witnessed tests for `term`. If the same event was
/// tested in several epochs, the latest entry decides its class.
inline StimulusMeaning stimulus_meaning(
    std::span<const WitnessedTest> entries, const std::string& agent, const std::string& term,
    std::optional<std::pair<std::uint64_t, std::uint64_t>> epochs = std::nullopt) {
  std::map<EventId, Verdict> latest;
  LedgerQuery q{term, agent, epochs};
  for (const auto& e : entries)
    if (matches(e, q)) latest.insert_or_assign(e.event, e.verdict);
  StimulusMeaning m{term, agent, {}, {}, {}};
  for (const auto& [ev, v] : latest) {
    switch (v) {
      case Verdict::assent: m.positive.insert(ev); break;
      case Verdict::dissent: m.negative.insert(ev); break;
      case Verdict::neutral: m.neutral.insert(ev); break;
    }
  }
  return m;
}

/// Recomputes every certificate at `epoch` from the ledger alone.
///
/// Refuses a ledger that fails verification, and any (event, term) at the
/// epoch that lacks exactly one verdict from each of the two agents.
inline CertifiedCore replay_certification(std::span<const WitnessedTest> entries,
                                          const ProtocolParams& params, std::uint64_t epoch) {
  params.validate();
  if (auto v = verify_chain(entries); !v.valid())
    throw Error(ErrorKind::ledger_invalid,
                "ledger chain invalid at seq " + std::to_string(*v.invalid_at));

  struct Pair {
    std::uint64_t first_seq = 0;
    std::vector<std::pair<std::string, Verdict>> verdicts;
  };
  struct TermAcc {
    std::uint64_t lo = 0, hi = 0;
    std::set<std::string> agents;
    std::map<std::string, Pair> by_event;  // pei -> verdicts
  };
  std::map<std::string, TermAcc> acc;
  for (const auto& e : entries) {
    if (e.epoch != epoch) continue;
    auto [it, fresh] = acc.try_emplace(e.term);
    auto& t = it->second;
    if (fresh) t.lo = e.seq;
    t.hi = e.seq;
    t.agents.insert(e.agent);
    auto [pit, pfresh] = t.by_event.try_emplace(e.event.str());
    if (pfresh) pit->second.first_seq = e.seq;
    pit->second.verdicts.emplace_back(e.agent, e.verdict);
  }

  CertifiedCore out;
  out.epoch = epoch;
  out.params = params;
  for (const auto& [term, t] : acc) {
    if (t.agents.size() != 2)
      throw Error(ErrorKind::replay, "term '" + term + "' at epoch " + std::to_string(epoch) +
                                         " has " + std::to_string(t.agents.size()) +
                                         " agents, expected 2");
    TermTally tally;
    for (const auto& [pei, p] : t.by_event) {
      if (p.verdicts.size() != 2 || p.verdicts[0].first == p.verdicts[1].first)
        throw Error(ErrorKind::replay, "orphaned verdict at seq " + std::to_string(p.first_seq) +
                                           " (term '" + term + "', pei '" + pei + "')");
      const Verdict v1 = p.verdicts[0].second;
      const Verdict v2 = p.verdicts[1].second;
      if (decided(v1) || decided(v2)) ++tally.n_aud;
      if (decided(v1) && decided(v2)) {
        ++tally.k;
        if (v1 != v2) ++tally.c;
      }
    }
    out.set_certificate(make_certificate(term, tally, params, epoch, std::pair{t.lo, t.hi}));
  }
  return out;
}

inline CertifiedCore replay_certification(const Ledger& ledger, const ProtocolParams& params,
                                          std::uint64_t epoch) {
  return replay_certification(ledger.entries(), params, epoch);
}

// JSON --------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const ProtocolParams& p) {
  j = nlohmann::json{{"tau", p.tau}, {"delta", p.delta}, {"rho_min", p.rho_min}};
}

inline void from_json(const nlohmann::json& j, ProtocolParams& p) {
  j.at("tau").get_to(p.tau);
  j.at("delta").get_to(p.delta);
  j.at("rho_min").get_to(p.rho_min);
}

inline void to_json(nlohmann::json& j, const TermCertificate& c) {
  j = nlohmann::json{{"term", c.term},
                     {"n_aud", c.tally.n_aud},
                     {"k", c.tally.k},
                     {"c", c.tally.c},
                     {"u", c.u},
                     {"s", c.s},
                     {"params", c.params},
                     {"epoch", c.epoch},
                     {"status", std::string(to_string(c.status))}};
  if (c.ledger_span)
    j["ledger_span"] = {c.ledger_span->first, c.ledger_span->second};
  else
    j["ledger_span"] = nullptr;
}

inline void from_json(const nlohmann::json& j, TermCertificate& c) {
  j.at("term").get_to(c.term);
  j.at("n_aud").get_to(c.tally.n_aud);
  j.at("k").get_to(c.tally.k);
  j.at("c").get_to(c.tally.c);
  j.at("u").get_to(c.u);
  j.at("s").get_to(c.s);
  j.at("params").get_to(c.params);
  j.at("epoch").get_to(c.epoch);
  auto st = parse_cert_status(j.at("status").get<std::string>());
  if (!st) throw Error(ErrorKind::config, "unknown certificate status");
  c.status = *st;
  const auto& span = j.at("ledger_span");
  if (span.is_null())
    c.ledger_span.reset();
  else
    c.ledger_span = std::pair{span.at(0).get<std::uint64_t>(), span.at(1).get<std::uint64_t>()};
}

inline void to_json(nlohmann::json& j, const CertifiedCore& core) {
  j = nlohmann::json{{"epoch", core.epoch},
                     {"params", core.params},
                     {"core", core.core},
                     {"certificates", core.certificates},
                     {"errors", core.errors},
                     {"revoked", core.revoked}};
}

inline void from_json(const nlohmann::json& j, CertifiedCore& core) {
  j.at("epoch").get_to(core.epoch);
  j.at("params").get_to(core.params);
  core.certificates.clear();
  core.core.clear();
  for (const auto& [term, cj] : j.at("certificates").items()) {
    auto c = cj.get<TermCertificate>();
    if (c.term != term) throw Error(ErrorKind::config, "certificate key mismatch for " + term);
    core.set_certificate(std::move(c));
  }
  if (j.contains("errors")) j.at("errors").get_to(core.errors);
  if (j.contains("revoked")) j.at("revoked").get_to(core.revoked);
  std::set<std::string> listed;
  j.at("core").get_to(listed);
  if (listed != core.core)
    throw Error(ErrorKind::config, "core list disagrees with certificate statuses");
}

}  // namespace semcert

#endif  // SEMCERT_CERTIFICATION_HPP
