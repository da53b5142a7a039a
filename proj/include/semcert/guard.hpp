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

#ifndef SEMCERT_GUARD_HPP
#define SEMCERT_GUARD_HPP

#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "semcert/certification.hpp"

namespace semcert {

/// Terms a core-guarded decision rule may consult.
inline std::set<std::string> guarded_vocabulary(const CertifiedCore& core,
                                                std::span<const std::string> full_vocab) {
  std::set<std::string> out;
  for (const auto& t : full_vocab)
    if (core.contains(t)) out.insert(t);
  return out;
}

struct TermDisagreement {
  std::uint64_t eligible = 0;
  std::uint64_t contradictions = 0;
  bool operator==(const TermDisagreement&) const = default;
};

struct DisagreementReport {
  std::set<std::string> terms_used;
  std::uint64_t eligible = 0;
  std::uint64_t contradictions = 0;
  double rate = 0.0;
  std::map<std::string, TermDisagreement> per_term;
  bool no_vocabulary = false;  // terms_used was empty; rate carries no information
  bool incomplete = false;     // a provider failed part-way
  std::string failure;
  ErrorKind failure_kind = ErrorKind::provider;

  bool operator==(const DisagreementReport&) const = default;
};

/// Optional sink for the evaluation verdicts, kept apart from the audit ledger.
class EvaluationLog {
 public:
  virtual ~EvaluationLog() = default;
  virtual void record(const std::string& agent, const EventId& event, const std::string& term,
                      Verdict v) = 0;
};

/// Writes one JSON object per verdict.
class JsonlEvaluationLog final : public EvaluationLog {
 public:
  explicit JsonlEvaluationLog(std::ostream& out) : out_(out) {}
  void record(const std::string& agent, const EventId& event, const std::string& term,
              Verdict v) override {
    out_ << nlohmann::json{{"agent", agent},
                           {"pei", event.str()},
                           {"term", term},
                           {"verdict", std::string(to_string(v))}}
                .dump()
         << '\n';
  }

 private:
  std::ostream& out_;
};

/// Queries both agents on every (term, event) pair and counts contradictory
/// divergence among eligible comparisons. Nothing is written to the ledger.
inline DisagreementReport measure_disagreement(VerdictProvider& a1, VerdictProvider& a2,
                                               const std::set<std::string>& terms,
                                               std::span<const Event> events, std::uint64_t epoch,
                                               EvaluationLog* log = nullptr) {
  DisagreementReport r;
  r.terms_used = terms;
  r.no_vocabulary = terms.empty();
  try {
    for (const auto& term : terms) {
      auto& pt = r.per_term[term];
      for (const auto& e : events) {
        const Verdict v1 = a1.verdict(term, e, epoch);
        const Verdict v2 = a2.verdict(term, e, epoch);
        if (log) {
          log->record(a1.id(), e.id, term, v1);
          log->record(a2.id(), e.id, term, v2);
        }
        if (decided(v1) && decided(v2)) {
          ++pt.eligible;
          if (v1 != v2) ++pt.contradictions;
        }
      }
      r.eligible += pt.eligible;
      r.contradictions += pt.contradictions;
    }
  } catch (const ProviderError& e) {
    r.incomplete = true;
    r.failure = e.what();
    r.failure_kind = e.kind();
    r.eligible = 0;
    r.contradictions = 0;
    for (const auto& [t, pt] : r.per_term) {
      r.eligible += pt.eligible;
      r.contradictions += pt.contradictions;
    }
  }
  r.rate = r.eligible == 0 ? 0.0
                           : static_cast<double>(r.contradictions) / static_cast<double>(r.eligible);
  return r;
}

/// Rate restricted to a subset of an existing report's terms. Per-term counts
/// are independent, so this equals re-measuring on the subset.
inline DisagreementReport restrict_report(const DisagreementReport& full,
                                          const std::set<std::string>& terms) {
  DisagreementReport r;
  r.terms_used = terms;
  r.no_vocabulary = terms.empty();
  r.incomplete = full.incomplete;
  r.failure = full.failure;
  r.failure_kind = full.failure_kind;
  for (const auto& t : terms) {
    auto it = full.per_term.find(t);
    if (it == full.per_term.end()) continue;
    r.per_term[t] = it->second;
    r.eligible += it->second.eligible;
    r.contradictions += it->second.contradictions;
  }
  r.rate = r.eligible == 0 ? 0.0
                           : static_cast<double>(r.contradictions) / static_cast<double>(r.eligible);
  return r;
}

inline void to_json(nlohmann::json& j, const DisagreementReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [t, pt] : r.per_term)
    per[t] = {{"eligible", pt.eligible}, {"contradictions", pt.contradictions}};
  j = nlohmann::json{{"terms_used", r.terms_used},       {"eligible", r.eligible},
                     {"contradictions", r.contradictions}, {"rate", r.rate},
                     {"per_term", per},                    {"no_vocabulary", r.no_vocabulary},
                     {"incomplete", r.incomplete}};
  if (r.incomplete) j["failure"] = r.failure;
}

}  // namespace semcert

#endif  // SEMCERT_GUARD_HPP
