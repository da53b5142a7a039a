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

#ifndef SEMCERT_LIFECYCLE_HPP
#define SEMCERT_LIFECYCLE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semcert/certification.hpp"

namespace semcert {

// Recertification ---------------------------------------------------------

enum class RecertAction { retained, revoked_bound, revoked_coverage };

inline std::string_view to_string(RecertAction a) {
  switch (a) {
    case RecertAction::retained: return "retained";
    case RecertAction::revoked_bound: return "revoked_bound";
    case RecertAction::revoked_coverage: return "revoked_coverage";
  }
  return "revoked_bound";
}

struct RecertOutcome {
  std::string term;
  double u_prime = 1.0;
  double s_prime = 0.0;
  RecertAction action = RecertAction::revoked_bound;
  bool error = false;  // audit failed; revoked conservatively
  std::string message;
};

struct AuditOptions {
  std::size_t per_term_size = 192;
  std::uint64_t seed = 0;
};

namespace detail {

/// PEIs of every entry in the certificates' ledger spans.
inline std::set<std::string> prior_audit_events(const CertifiedCore& core,
                                                const std::set<std::string>& terms,
                                                std::span<const WitnessedTest> entries) {
  std::set<std::string> out;
  for (const auto& t : terms) {
    auto it = core.certificates.find(t);
    if (it == core.certificates.end() || !it->second.ledger_span) continue;
    auto [lo, hi] = *it->second.ledger_span;
    for (auto s = lo; s <= hi && s < entries.size(); ++s)
      if (entries[s].term == t) out.insert(entries[s].event.str());
  }
  return out;
}

}  // namespace detail

/// Re-audits every core term on a fresh sample and revokes the ones that no
/// longer meet the predicate. Never adds a term.
inline std::pair<CertifiedCore, std::vector<RecertOutcome>> recertify(
    const CertifiedCore& core, VerdictProvider& a1, VerdictProvider& a2,
    std::span<const Event> fresh_pool, const ProtocolParams& params, Ledger& ledger,
    std::uint64_t epoch, const AuditOptions& opts) {
  params.validate();
  if (epoch <= core.epoch)
    throw Error(ErrorKind::config, "recertification epoch " + std::to_string(epoch) +
                                       " must exceed core epoch " + std::to_string(core.epoch));
  const auto prior = detail::prior_audit_events(core, core.core, ledger.entries());
  for (const auto& e : fresh_pool)
    if (prior.contains(e.id.str()))
      throw Error(ErrorKind::config, "fresh pool reuses audited event " + e.id.str());

  const std::vector<std::string> terms(core.core.begin(), core.core.end());
  const AuditPlan plan = sample_audit_plan(fresh_pool, terms, opts.per_term_size, opts.seed);

  CertifiedCore updated = core;
  updated.epoch = epoch;
  updated.params = params;
  std::vector<RecertOutcome> outcomes;
  for (const auto& tp : plan.terms) {
    RecertOutcome o;
    o.term = tp.term;
    const std::uint64_t first = ledger.size();
    try {
      const TermTally tally = audit_term(a1, a2, tp.term, tp.events, ledger, epoch);
      std::optional<std::pair<std::uint64_t, std::uint64_t>> span;
      if (ledger.size() > first) span = std::pair{first, ledger.size() - 1};
      auto cert = make_certificate(tp.term, tally, params, epoch, span);
      o.u_prime = cert.u;
      o.s_prime = cert.s;
      switch (cert.status) {
        case CertStatus::certified: o.action = RecertAction::retained; break;
        case CertStatus::rejected_coverage: o.action = RecertAction::revoked_coverage; break;
        default: o.action = RecertAction::revoked_bound; break;
      }
      if (!cert.certified()) updated.revoked[tp.term] = epoch;
      updated.set_certificate(std::move(cert));
    } catch (const ProviderError& e) {
      o.error = true;
      o.message = e.what();
      o.action = RecertAction::revoked_bound;
      updated.core.erase(tp.term);
      updated.errors[tp.term] = e.what();
      updated.revoked[tp.term] = epoch;
      auto it = updated.certificates.find(tp.term);
      if (it != updated.certificates.end()) it->second.status = CertStatus::rejected_both;
    }
    outcomes.push_back(std::move(o));
  }
  return {std::move(updated), std::move(outcomes)};
}

// Renegotiation -----------------------------------------------------------

/// Number of decided verdicts the agent has given on the term, all epochs.
inline std::uint64_t entrenchment(std::span<const WitnessedTest> entries, const std::string& term,
                                  const std::string& agent) {
  std::uint64_t n = 0;
  for (const auto& e : entries)
    if (e.term == term && e.agent == agent && decided(e.verdict)) ++n;
  return n;
}

/// Picks whose interpretation of a term becomes the reference.
class RenegotiationCriterion {
 public:
  virtual ~RenegotiationCriterion() = default;
  virtual std::string reference_agent(std::span<const WitnessedTest> entries,
                                      const std::string& term, const std::string& agent1,
                                      const std::string& agent2,
                                      std::map<std::string, std::uint64_t>& counts) const = 0;
};

/// The agent with more decided verdicts wins; ties go to the smaller id.
class EntrenchmentCriterion final : public RenegotiationCriterion {
 public:
  std::string reference_agent(std::span<const WitnessedTest> entries, const std::string& term,
                              const std::string& agent1, const std::string& agent2,
                              std::map<std::string, std::uint64_t>& counts) const override {
    const auto n1 = entrenchment(entries, term, agent1);
    const auto n2 = entrenchment(entries, term, agent2);
    counts[agent1] = n1;
    counts[agent2] = n2;
    if (n1 != n2) return n1 > n2 ? agent1 : agent2;
    return std::min(agent1, agent2);
  }
};

enum class RenegotiationPath { revoked, never_certified };

inline std::string_view to_string(RenegotiationPath p) {
  return p == RenegotiationPath::revoked ? "revoked" : "never_certified";
}

struct RenegotiationOutcome {
  std::string term;
  std::string reference_agent;
  std::map<std::string, std::uint64_t> entrenchment_counts;
  bool adopted = false;
  bool restored = false;
  std::optional<TermCertificate> certificate;
  RenegotiationPath path = RenegotiationPath::never_certified;
  std::string message;
};

/// The less entrenched agent adopts the reference interpretation of `term`,
/// then the term is re-audited on fresh events. Restored only on a passing
/// certificate.
inline RenegotiationOutcome renegotiate(const std::string& term, VerdictProvider& a1,
                                        VerdictProvider& a2, Ledger& ledger,
                                        std::span<const Event> fresh_pool,
                                        const ProtocolParams& params, std::uint64_t epoch,
                                        const AuditOptions& opts, const CertifiedCore& core,
                                        const RenegotiationCriterion& criterion =
                                            EntrenchmentCriterion{}) {
  params.validate();
  if (core.contains(term))
    throw Error(ErrorKind::config, "term '" + term + "' is already in the core");
  if (epoch <= core.epoch)
    throw Error(ErrorKind::config, "renegotiation epoch must exceed core epoch");

  RenegotiationOutcome out;
  out.term = term;
  out.path = core.revoked.contains(term) ? RenegotiationPath::revoked
                                         : RenegotiationPath::never_certified;
  out.reference_agent =
      criterion.reference_agent(ledger.entries(), term, a1.id(), a2.id(), out.entrenchment_counts);

  VerdictProvider& reference = out.reference_agent == a1.id() ? a1 : a2;
  VerdictProvider& adopter = out.reference_agent == a1.id() ? a2 : a1;
  auto rule = reference.export_policy(term);
  if (!rule) {
    out.message = "reference agent " + reference.id() + " cannot export its policy";
    return out;
  }
  if (!adopter.adopt_policy(term, *rule)) {
    out.message = "agent " + adopter.id() + " refused adoption";
    return out;
  }
  out.adopted = true;

  const std::vector<std::string> terms{term};
  const AuditPlan plan = sample_audit_plan(fresh_pool, terms, opts.per_term_size, opts.seed);
  const std::uint64_t first = ledger.size();
  try {
    const TermTally tally = audit_term(a1, a2, term, plan.terms.front().events, ledger, epoch);
    std::optional<std::pair<std::uint64_t, std::uint64_t>> span;
    if (ledger.size() > first) span = std::pair{first, ledger.size() - 1};
    out.certificate = make_certificate(term, tally, params, epoch, span);
    out.restored = out.certificate->certified();
  } catch (const ProviderError& e) {
    out.message = e.what();
  }
  return out;
}

/// Folds a renegotiation result into the core.
inline CertifiedCore apply_renegotiation(CertifiedCore core, const RenegotiationOutcome& o,
                                         std::uint64_t epoch) {
  if (o.certificate) {
    core.set_certificate(*o.certificate);
    if (o.restored) core.revoked.erase(o.term);
  }
  core.epoch = std::max(core.epoch, epoch);
  return core;
}

inline void to_json(nlohmann::json& j, const RecertOutcome& o) {
  j = nlohmann::json{{"term", o.term},
                     {"u_prime", o.u_prime},
                     {"s_prime", o.s_prime},
                     {"action", std::string(to_string(o.action))},
                     {"error", o.error}};
  if (o.error) j["message"] = o.message;
}

inline void to_json(nlohmann::json& j, const RenegotiationOutcome& o) {
  j = nlohmann::json{{"term", o.term},
                     {"reference_agent", o.reference_agent},
                     {"entrenchment_counts", o.entrenchment_counts},
                     {"adopted", o.adopted},
                     {"restored", o.restored},
                     {"path", std::string(to_string(o.path))}};
  j["certificate"] = o.certificate ? nlohmann::json(*o.certificate) : nlohmann::json(nullptr);
  if (!o.message.empty()) j["message"] = o.message;
}

}  // namespace semcert

#endif  // SEMCERT_LIFECYCLE_HPP
